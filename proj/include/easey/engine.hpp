#pragma once

#include "easey/cluster.hpp"
#include "easey/config.hpp"
#include "easey/imageprep.hpp"
#include "easey/job_state.hpp"
#include "easey/staging.hpp"
#include "easey/targets.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace easey {

/// Submission pipeline steps, in execution order.
namespace step {
inline constexpr std::string_view created = "created";
inline constexpr std::string_view move_archive = "move_archive";
inline constexpr std::string_view extract = "extract";
inline constexpr std::string_view mkdir_data = "mkdir_data";
inline constexpr std::string_view stage_in = "stage_in";
inline constexpr std::string_view render = "render";
inline constexpr std::string_view submit = "submit";
inline constexpr std::string_view record = "record";
} // namespace step

struct StepMark {
    std::string step;
    std::int64_t at_us = 0; // microseconds since the epoch, strictly increasing per record
    bool ok = true;
    std::string detail;

    bool operator==(const StepMark&) const = default;
};

struct Transition {
    JobState from = JobState::created;
    JobState to = JobState::created;
    std::string at;

    bool operator==(const Transition&) const = default;
};

struct JobRecord {
    JobId id;
    EaseyConfig config;
    ContainerArchive archive;
    std::string target;
    std::string identity; // session identity every action ran under
    JobState state = JobState::created;
    std::optional<std::string> scheduler_job_id;
    std::string workdir;
    std::string submitted_at;
    std::string finished_at;
    std::vector<TransferResult> staging_ledger;
    std::string stdout_path;
    std::string stderr_path;
    std::vector<StepMark> steps;
    std::vector<Transition> history;
    std::string failed_step;
    std::string failure;
    bool stale = false;

    const StepMark* mark(std::string_view step_name) const;
};

/// One JSON document per job under `dir`, written through a temporary file
/// and an atomic rename. Writes are serialized; reads may run concurrently.
class RecordStore {
public:
    explicit RecordStore(std::filesystem::path dir);

    void save(const JobRecord& record);
    /// Throws StoreCorrupt when the document exists but cannot be read.
    std::optional<JobRecord> load(const JobId& id) const;
    /// Every record in the store. Throws StoreCorrupt.
    std::vector<JobRecord> load_all() const;

    const std::filesystem::path& dir() const noexcept { return dir_; }
    std::filesystem::path path_for(const JobId& id) const;

private:
    std::filesystem::path dir_;
    mutable std::mutex write_mu_;
};

std::string record_to_json(const JobRecord& record);
/// Throws StoreCorrupt.
JobRecord record_from_json(std::string_view text);

struct StatusReport {
    JobState state = JobState::created;
    std::string stdout_excerpt;
    std::string stderr_excerpt;
    bool stale = false;
};

struct EngineOptions {
    /// Local directory for staged inputs, fetched outputs and rendered
    /// scripts (one subdirectory per job).
    std::filesystem::path staging_root;
    /// Cluster directory that holds job workdirs. Empty: the profile's
    /// workdir root, then the session default.
    std::string workdir_root;
    std::function<std::chrono::system_clock::time_point()> clock = std::chrono::system_clock::now;
    /// Called after each pipeline step. The "submit" call happens after the
    /// scheduler accepted the job but before its id is persisted.
    std::function<void(std::string_view step, const JobRecord&)> step_hook;
    /// Bytes of each log returned by poll_status.
    std::size_t excerpt_bytes = 4096;
};

/// Runs the submission pipeline and owns job lifecycles.
class Engine {
public:
    Engine(RecordStore& store, TransferAgent agent, EngineOptions options);

    /// Moves the archive, extracts it, creates the data folder, stages
    /// inputs, renders and submits the batch script. Throws ValueError for an
    /// unsubmittable config, SubmitFailed for an archive that fails its
    /// checksum; step failures persist a failed record and throw
    /// ExtractFailed, StagingFailed or SubmitFailed.
    JobRecord submit(const EaseyConfig& cfg, const ContainerArchive& archive,
                     const TargetProfile& profile, ClusterSession& session);

    /// Refreshes the state from the scheduler. A record left without a
    /// scheduler id by an interrupted submit is resolved first. Throws
    /// UnknownJob; SessionLost after marking the record stale.
    StatusReport poll_status(const JobId& id, ClusterSession& session);

    /// Stage-out for finished jobs; logs are fetched for every terminal job.
    /// Throws NotTerminal, UnknownJob.
    std::vector<TransferResult> finalize(const JobId& id, ClusterSession& session);
    std::vector<TransferResult> finalize(const JobId& id, ClusterSession& session,
                                         const TransferAgent& agent);

    /// Resolves a record interrupted before its scheduler id was persisted:
    /// found by tag means submitted, otherwise failed.
    JobRecord recover(const JobId& id, ClusterSession& session);

    /// Throws UnknownJob.
    JobRecord record(const JobId& id) const;
    std::filesystem::path local_dir(const JobId& id) const;

private:
    void advance(JobRecord& rec, JobState to);
    void mark(JobRecord& rec, std::string_view step, bool ok = true, std::string detail = {});
    void hook(std::string_view step, const JobRecord& rec);
    std::string now_iso();
    std::string tail(ClusterSession& session, const std::string& path);
    JobRecord load_or_throw(const JobId& id) const;

    RecordStore& store_;
    TransferAgent agent_;
    EngineOptions options_;
    std::mutex inflight_mu_;
    std::set<JobId> inflight_;
};

} // namespace easey
