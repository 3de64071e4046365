#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace easey {

struct TarEntry {
    enum class Type { file, directory, symlink };
    std::string path; // relative, '/'-separated
    Type type = Type::file;
    std::string content; // file body, or link target for symlinks
    unsigned mode = 0644;
};

/// Writes a gzip-compressed ustar archive. Output is byte-for-byte
/// deterministic: mtimes, owners and the gzip header timestamp are zero.
/// Throws easey::Error on I/O failure.
void write_tar_gz(const std::filesystem::path& out, const std::vector<TarEntry>& entries);

} // namespace easey
