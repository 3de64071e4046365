#pragma once

#include <optional>
#include <string_view>

namespace easey {

/// created -> staging -> submitted -> pending -> running -> {finished, failed};
/// every non-terminal state may also go to failed.
enum class JobState { created, staging, submitted, pending, running, finished, failed };

std::string_view to_string(JobState s);
std::optional<JobState> job_state_from_string(std::string_view s);

bool is_terminal(JobState s);
bool is_legal_transition(JobState from, JobState to);

/// Position on the main path (created=0 .. finished=5); failed has none.
std::optional<int> path_rank(JobState s);

} // namespace easey
