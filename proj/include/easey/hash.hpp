#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace easey {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Lowercase hex SHA-256 of a file's content. Throws easey::Error when the
/// file cannot be read.
std::string sha256_file_hex(const std::filesystem::path& path);

} // namespace easey
