#include "easey/job_state.hpp"

#include <array>

namespace easey {

namespace {
constexpr std::array<std::string_view, 7> kNames = {"created", "staging",  "submitted", "pending",
                                                    "running", "finished", "failed"};
}

std::string_view to_string(JobState s) {
    return kNames[static_cast<std::size_t>(s)];
}

std::optional<JobState> job_state_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (kNames[i] == s)
            return static_cast<JobState>(i);
    }
    return std::nullopt;
}

bool is_terminal(JobState s) {
    return s == JobState::finished || s == JobState::failed;
}

std::optional<int> path_rank(JobState s) {
    if (s == JobState::failed)
        return std::nullopt;
    return static_cast<int>(s);
}

bool is_legal_transition(JobState from, JobState to) {
    if (is_terminal(from))
        return false;
    if (to == JobState::failed)
        return true;
    return static_cast<int>(to) == static_cast<int>(from) + 1;
}

} // namespace easey
