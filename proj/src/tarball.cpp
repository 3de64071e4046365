#include "easey/tarball.hpp"

#include "easey/error.hpp"

#include <zlib.h>

#include <array>
#include <cstdio>
#include <cstring>
#include <memory>

namespace easey {

namespace {

using Block = std::array<char, 512>;

void put_octal(char* field, std::size_t width, unsigned long long value) {
    // width includes the terminating NUL
    std::snprintf(field, width, "%0*llo", static_cast<int>(width - 1), value);
}

Block header_for(const TarEntry& e) {
    Block h{};
    std::string name = e.path;
    if (e.type == TarEntry::Type::directory && !name.empty() && name.back() != '/')
        name.push_back('/');
    std::string prefix;
    if (name.size() > 100) {
        auto cut = name.rfind('/', name.size() - 2);
        while (cut != std::string::npos && (cut > 155 || name.size() - cut - 1 > 100))
            cut = cut == 0 ? std::string::npos : name.rfind('/', cut - 1);
        if (cut == std::string::npos)
            throw Error("tar: path too long: " + e.path);
        prefix = name.substr(0, cut);
        name = name.substr(cut + 1);
    }
    std::memcpy(h.data(), name.data(), name.size());
    put_octal(h.data() + 100, 8, e.type == TarEntry::Type::directory ? (e.mode | 0111) : e.mode);
    put_octal(h.data() + 108, 8, 0);
    put_octal(h.data() + 116, 8, 0);
    put_octal(h.data() + 124, 12, e.type == TarEntry::Type::file ? e.content.size() : 0);
    put_octal(h.data() + 136, 12, 0);
    std::memset(h.data() + 148, ' ', 8);
    h[156] = e.type == TarEntry::Type::file ? '0' : e.type == TarEntry::Type::directory ? '5' : '2';
    if (e.type == TarEntry::Type::symlink) {
        if (e.content.size() > 100)
            throw Error("tar: link target too long: " + e.content);
        std::memcpy(h.data() + 157, e.content.data(), e.content.size());
    }
    std::memcpy(h.data() + 257, "ustar", 6);
    std::memcpy(h.data() + 263, "00", 2);
    std::memcpy(h.data() + 265, "root", 4);
    std::memcpy(h.data() + 297, "root", 4);
    std::memcpy(h.data() + 345, prefix.data(), prefix.size());
    unsigned sum = 0;
    for (char c : h)
        sum += static_cast<unsigned char>(c);
    std::snprintf(h.data() + 148, 8, "%06o", sum);
    h[155] = ' ';
    return h;
}

struct GzCloser {
    void operator()(gzFile_s* f) const {
        if (f)
            gzclose(f);
    }
};

} // namespace

void write_tar_gz(const std::filesystem::path& out, const std::vector<TarEntry>& entries) {
    std::unique_ptr<gzFile_s, GzCloser> gz(gzopen(out.c_str(), "wb9"));
    if (!gz)
        throw Error("cannot open " + out.string() + " for writing");
    auto write = [&](const char* data, std::size_t n) {
        if (n == 0)
            return;
        if (gzwrite(gz.get(), data, static_cast<unsigned>(n)) != static_cast<int>(n))
            throw Error("write failed: " + out.string());
    };
    for (const auto& e : entries) {
        Block h = header_for(e);
        write(h.data(), h.size());
        if (e.type == TarEntry::Type::file) {
            write(e.content.data(), e.content.size());
            std::size_t pad = (512 - e.content.size() % 512) % 512;
            Block zero{};
            write(zero.data(), pad);
        }
    }
    Block zero{};
    write(zero.data(), zero.size());
    write(zero.data(), zero.size());
    if (gzclose(gz.release()) != Z_OK)
        throw Error("close failed: " + out.string());
}

} // namespace easey
