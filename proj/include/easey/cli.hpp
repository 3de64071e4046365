#pragma once

#include <iosfwd>
#include <string_view>

namespace easey {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int unknown_target = 2;
inline constexpr int build_failed = 3;
inline constexpr int pack_failed = 4;
inline constexpr int submit_failed = 5;
inline constexpr int staging_failed = 6;
inline constexpr int unknown_job = 7;
inline constexpr int not_terminal = 8;
inline constexpr int parse_error = 9;
inline constexpr int config_invalid = 10;
inline constexpr int session_lost = 11;
inline constexpr int store_corrupt = 12;
inline constexpr int internal = 13;
} // namespace exit_code

/// Exit code for an easey::Error of the given kind().
int exit_code_for(std::string_view error_kind);

/// The `easey` command line. Writes results to `out` and diagnostics to
/// `err`; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace easey
