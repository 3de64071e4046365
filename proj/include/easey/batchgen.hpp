#pragma once

#include "easey/config.hpp"
#include "easey/targets.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace easey {

/// Per-job values the script refers to.
struct JobRefs {
    std::string job_id;
    std::string workdir;
    std::string stdout_path;
    std::string stderr_path;
};

struct BatchScript {
    Scheduler scheduler = Scheduler::slurm;
    std::vector<std::string> directive_lines;
    std::vector<std::string> prolog_lines;
    std::vector<std::string> command_lines;
    std::string full_text;
};

inline constexpr std::string_view kPrologMarker = "# easey: prolog";
inline constexpr std::string_view kExecutionMarker = "# easey: execution";

std::string_view directive_prefix(Scheduler s);

/// Renders the deployment and execution sections for the profile's
/// scheduler. Deterministic: equal inputs give byte-identical text.
/// Throws EmptyExecution.
BatchScript render_batch(const EaseyConfig& cfg, const TargetProfile& profile, const JobRefs& job);

/// ceil(mpi_tasks / tasks_per_node); both arguments must be >= 1.
std::int64_t derive_nodes(std::int64_t mpi_tasks, std::int64_t tasks_per_node);

/// Keeps [A-Za-z0-9_:.-], replaces everything else with '_'.
std::string sanitize_job_name(std::string_view name);

/// Tag placed in every script so a submitted job can be found again by its
/// easey id after a crash.
std::string job_tag(std::string_view job_id);

} // namespace easey
