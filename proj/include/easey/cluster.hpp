#pragma once

#include "easey/job_state.hpp"
#include "easey/targets.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace easey {

struct ExecResult {
    int exit_code = 0;
    std::string out;
    std::string err;
};

/// Connection to a cluster's submission host. All cluster-side work (file
/// placement, extraction, scheduler calls) goes through one of these, so the
/// middleware can run inside or outside the cluster.
class ClusterSession {
public:
    virtual ~ClusterSession() = default;

    /// Runs a shell command on the submission host. Throws SessionLost when
    /// the session is closed or the transport drops, AuthFailed when the
    /// identity is refused.
    virtual ExecResult exec(std::string_view command) = 0;
    /// Copies a local file to an absolute cluster path.
    virtual void put(const std::filesystem::path& local, const std::string& remote) = 0;
    /// Copies a cluster file to a local path. Throws easey::Error when the
    /// remote file does not exist.
    virtual void get(const std::string& remote, const std::filesystem::path& local) = 0;

    virtual Scheduler dialect() const = 0;
    /// Authenticated identity every action is attributed to.
    virtual std::string identity() const = 0;
    /// Directory under which job workdirs are created when the profile
    /// does not name one.
    virtual std::string default_workdir_root() const = 0;

    virtual bool live() const = 0;
    virtual void close() = 0;
};

inline ExecResult exec(ClusterSession& session, std::string_view command) {
    return session.exec(command);
}

/// Runs everything on this machine (middleware placed inside the cluster).
class LocalSession : public ClusterSession {
public:
    LocalSession(Scheduler dialect, std::filesystem::path workdir_root);

    ExecResult exec(std::string_view command) override;
    void put(const std::filesystem::path& local, const std::string& remote) override;
    void get(const std::string& remote, const std::filesystem::path& local) override;
    Scheduler dialect() const override { return dialect_; }
    std::string identity() const override;
    std::string default_workdir_root() const override { return root_.string(); }
    bool live() const override { return live_; }
    void close() override { live_ = false; }

protected:
    void ensure_live() const;

    Scheduler dialect_;
    std::filesystem::path root_;
    bool live_ = true;
};

/// ssh/scp with a key file and BatchMode (no password prompts).
class SshSession final : public ClusterSession {
public:
    /// `host` is "[user@]hostname". Throws AuthFailed when the key file is
    /// unreadable.
    SshSession(std::string host, std::filesystem::path key, Scheduler dialect,
               std::string workdir_root);

    ExecResult exec(std::string_view command) override;
    void put(const std::filesystem::path& local, const std::string& remote) override;
    void get(const std::string& remote, const std::filesystem::path& local) override;
    Scheduler dialect() const override { return dialect_; }
    std::string identity() const override { return host_; }
    std::string default_workdir_root() const override { return root_; }
    bool live() const override { return live_; }
    void close() override { live_ = false; }

    std::vector<std::string> exec_argv(std::string_view command) const;
    std::vector<std::string> copy_argv(const std::string& from, const std::string& to) const;

private:
    std::string host_;
    std::filesystem::path key_;
    Scheduler dialect_;
    std::string root_;
    bool live_ = true;
};

// ---------------------------------------------------------------------------
// Scheduler command line (sbatch/squeue/sacct, qsub/qstat)

namespace dialect {

std::string submit_command(Scheduler s, const std::string& script_path);
/// Scheduler job id from the submit command's stdout.
std::optional<std::string> parse_submit(Scheduler s, std::string_view out);

/// Commands tried in order until one yields a state.
std::vector<std::string> status_commands(Scheduler s, const std::string& job_id);
std::optional<JobState> parse_status(Scheduler s, std::string_view out);

/// Commands that list jobs with their easey tag, tried in order.
std::vector<std::string> lookup_commands(Scheduler s);
/// Finds the scheduler id of the job carrying `tag`.
std::optional<std::string> parse_lookup(Scheduler s, std::string_view out, std::string_view tag);

} // namespace dialect

// ---------------------------------------------------------------------------
// Simulator

/// What a simulated job does when it reaches its terminal tick.
struct SimOutcome {
    JobState terminal = JobState::finished;
    std::string stderr_text;
    /// Files written relative to the job's working directory on completion.
    std::vector<std::pair<std::string, std::string>> files;
};

struct SimJob {
    std::string sim_id;
    std::string script;
    JobState state = JobState::pending;
    std::string stdout_buf;
    std::string stderr_buf;
    SimOutcome outcome;
    bool command_failed = false;

    // extracted from the directives
    std::int64_t nodes = 0;
    std::int64_t tasks_per_node = 0;
    std::string time;
    std::string workdir;
    std::string stdout_path;
    std::string stderr_path;
    std::string tag;
};

struct SimEvent {
    std::uint64_t seq = 0;
    std::string sim_id;
    JobState from = JobState::pending;
    JobState to = JobState::pending;

    bool operator==(const SimEvent&) const = default;
};

struct SimOptions {
    /// Execute the script's serial commands through bash. MPI launcher lines
    /// are never executed; they only produce a marker line on stdout.
    bool run_commands = true;
};

/// In-process batch scheduler, clock-free: jobs only move on tick().
/// All public calls are serialized internally.
class Simulator {
public:
    explicit Simulator(Scheduler dialect, SimOptions options = {});

    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;
    Simulator(Simulator&& other) noexcept;
    Simulator& operator=(Simulator&& other) noexcept;

    /// Enqueues a job as pending and returns its id ("1", "2", ...).
    /// Throws ScriptRejected.
    std::string submit(std::string_view script);

    /// Moves every non-terminal job one state forward: pending -> running ->
    /// scripted terminal state. Returns the transitions made.
    std::vector<SimEvent> tick();

    /// Overrides the outcome of an existing job. Throws UnknownJob.
    void set_outcome(const std::string& sim_id, SimOutcome outcome);
    /// Outcome for the next submitted job only.
    void set_next_outcome(SimOutcome outcome);

    std::optional<SimJob> job(const std::string& sim_id) const;
    std::vector<SimJob> jobs() const;
    std::vector<SimEvent> events() const;
    Scheduler dialect() const noexcept { return dialect_; }

    /// Emulates the scheduler CLI. Returns nullopt when argv is not a
    /// scheduler command of this simulator's dialect.
    std::optional<ExecResult> handle_command(const std::vector<std::string>& argv,
                                             const std::filesystem::path& cwd);

    std::string to_json() const;
    /// Throws StoreCorrupt on malformed state.
    static Simulator from_json(std::string_view text);

private:
    void run_chunk(SimJob& job, bool first);
    void write_logs(const SimJob& job) const;
    void record(SimJob& job, JobState to, std::vector<SimEvent>& out);
    ExecResult status_output(const std::vector<std::string>& argv) const;

    Scheduler dialect_;
    SimOptions options_;
    mutable std::mutex mu_;
    std::uint64_t next_id_ = 1;
    std::uint64_t next_seq_ = 1;
    std::map<std::uint64_t, SimJob> jobs_;
    std::vector<SimEvent> events_;
    std::optional<SimOutcome> next_outcome_;
};

std::string sim_submit(Simulator& sim, std::string_view script);
std::vector<SimEvent> sim_tick(Simulator& sim);

/// Session bound to a Simulator. Scheduler commands are answered by the
/// simulator; all other commands run locally through /bin/sh under `root`.
class SimSession final : public LocalSession {
public:
    SimSession(Simulator& sim, std::filesystem::path root);

    ExecResult exec(std::string_view command) override;
    std::string identity() const override;
    std::string default_workdir_root() const override;

private:
    Simulator& sim_;
};

} // namespace easey
