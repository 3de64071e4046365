#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace easey {

struct ProcessResult {
    int exit_code = 0;
    std::string out;
    std::string err;
};

/// Spawns argv[0] (PATH lookup) and captures both streams. A program that
/// cannot be started yields exit code 127 with the reason on `err`.
ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::optional<std::filesystem::path>& cwd = std::nullopt);

/// Runs `command` through /bin/sh -c.
ProcessResult run_shell(std::string_view command,
                        const std::optional<std::filesystem::path>& cwd = std::nullopt);

/// True when `program` resolves to an executable on PATH.
bool program_on_path(std::string_view program);

/// Single-quotes `s` for POSIX sh unless it only holds safe characters.
std::string shell_quote(std::string_view s);

/// Splits a command line into words. Honors single and double quotes and
/// backslash escapes; no expansion is performed.
std::vector<std::string> split_words(std::string_view line);

} // namespace easey
