#include "easey/imageprep.hpp"

#include "easey/error.hpp"
#include "easey/hash.hpp"
#include "easey/process.hpp"
#include "easey/tarball.hpp"
#include "easey/timeutil.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace easey {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
    auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && ws(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && ws(s.back()))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

bool continues(std::string_view line) {
    auto t = trim(line);
    return !t.empty() && t.back() == '\\';
}

} // namespace

std::string TransformedDockerfile::text() const {
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

TransformedDockerfile transform_dockerfile(std::string_view src, const TargetProfile& profile,
                                           std::string_view mount) {
    if (trim(src).empty())
        throw ValueError("Dockerfile is empty");
    if (mount.empty() || mount.front() != '/')
        throw ValueError("mount path '" + std::string(mount) + "' must be absolute");

    auto input = split_lines(src);
    TransformedDockerfile out;
    out.mount_path = std::string(mount);
    out.target = profile.name;

    std::size_t markers = 0;
    bool in_continuation = false;
    for (std::size_t i = 0; i < input.size(); ++i) {
        const auto& line = input[i];
        bool is_marker = trim(line) == kMpiMarker;
        if (is_marker && !in_continuation) {
            if (++markers > 1)
                throw MultipleMarkers("more than one " + std::string(kMpiMarker) +
                                      " line (second at line " + std::to_string(i + 1) + ")");
            out.lines.insert(out.lines.end(), profile.mpi_snippet.lines.begin(),
                             profile.mpi_snippet.lines.end());
        } else if (line.find(kMpiMarker) != std::string::npos) {
            throw MisplacedMarker(std::string(kMpiMarker) + " must be alone on its own line (line " +
                                  std::to_string(i + 1) + ")");
        } else {
            out.lines.push_back(line);
        }
        in_continuation = continues(line);
    }

    std::set<std::string, std::less<>> present;
    for (const auto& l : out.lines)
        present.emplace(trim(l));
    auto append_once = [&](std::string instr) {
        if (present.insert(instr).second)
            out.lines.push_back(std::move(instr));
    };
    append_once("RUN mkdir -p " + shell_quote(mount));
    for (const auto& link : profile.extra_symlinks)
        append_once("RUN ln -sfn " + shell_quote(link.target) + " " + shell_quote(link.link));
    return out;
}

// ---------------------------------------------------------------------------

void MockBuilder::fail_on(std::string needle) {
    std::lock_guard lock(mu_);
    fail_needles_.push_back(std::move(needle));
}

ImageRef MockBuilder::build(const TransformedDockerfile& df, std::string_view image_name) {
    std::vector<std::string> needles;
    {
        std::lock_guard lock(mu_);
        needles = fail_needles_;
    }
    std::string log;
    const auto total = std::to_string(df.lines.size());
    for (std::size_t i = 0; i < df.lines.size(); ++i) {
        const auto& line = df.lines[i];
        log += "Step " + std::to_string(i + 1) + "/" + total + " : " + line + "\n";
        for (const auto& n : needles) {
            if (!n.empty() && line.find(n) != std::string::npos) {
                log += "mock: instruction returned a non-zero code: 1\n";
                throw BuildFailed("build failed at line " + std::to_string(i + 1) + ": " + line, log);
            }
        }
    }
    ImageRef img;
    img.ref = "mock:" + sha256_hex(df.text());
    img.name = std::string(image_name);
    log += "Successfully built " + img.ref + "\n";
    img.log = std::move(log);
    std::lock_guard lock(mu_);
    images_.emplace(img.ref, df);
    return img;
}

std::optional<TransformedDockerfile> MockBuilder::find(std::string_view ref) const {
    std::lock_guard lock(mu_);
    auto it = images_.find(ref);
    if (it == images_.end())
        return std::nullopt;
    return it->second;
}

DockerBuilder::DockerBuilder(fs::path context_dir) : context_(std::move(context_dir)) {}

bool DockerBuilder::available() const {
    return program_on_path("docker");
}

ImageRef DockerBuilder::build(const TransformedDockerfile& df, std::string_view image_name) {
    if (!available())
        throw BuilderUnavailable("docker is not installed or not on PATH");
    auto file = fs::temp_directory_path() / ("easey-" + sha256_hex(df.text()).substr(0, 12) + ".Dockerfile");
    {
        std::ofstream out(file);
        out << df.text();
        if (!out)
            throw BuildFailed("cannot write " + file.string(), "");
    }
    auto res = run_process({"docker", "build", "-t", std::string(image_name), "-f", file.string(),
                            context_.string()});
    std::error_code ec;
    fs::remove(file, ec);
    std::string log = res.out + res.err;
    if (res.exit_code != 0)
        throw BuildFailed("docker build exited with " + std::to_string(res.exit_code), log);
    return ImageRef{"docker:" + std::string(image_name), std::string(image_name), log};
}

ImageRef build_image(const TransformedDockerfile& df, ImageBuilder& builder,
                     std::string_view image_name) {
    if (!builder.available())
        throw BuilderUnavailable("image builder is not available");
    return builder.build(df, image_name);
}

// ---------------------------------------------------------------------------

void MockPacker::write_archive(const ImageRef& img, const fs::path& tarball) {
    auto df = builder_.find(img.ref);
    if (!df)
        throw PackFailed("image " + img.ref + " is unknown to the mock builder");

    std::set<std::string> dirs = {"bin", "etc", "tmp", "usr", "usr/local", "var"};
    auto add_dir_chain = [&](std::string_view abs) {
        std::string path(trim(abs));
        while (!path.empty() && path.front() == '/')
            path.erase(0, 1);
        for (std::size_t pos = path.find('/'); pos != std::string::npos; pos = path.find('/', pos + 1))
            dirs.insert(path.substr(0, pos));
        if (!path.empty())
            dirs.insert(path);
    };
    std::vector<TarEntry> links;
    for (const auto& line : df->lines) {
        auto words = split_words(line);
        if (words.size() >= 4 && words[0] == "RUN" && words[1] == "mkdir" && words[2] == "-p") {
            for (std::size_t i = 3; i < words.size(); ++i)
                add_dir_chain(words[i]);
        } else if (words.size() == 5 && words[0] == "RUN" && words[1] == "ln" && words[2] == "-sfn") {
            std::string link = words[4];
            while (!link.empty() && link.front() == '/')
                link.erase(0, 1);
            if (auto slash = link.rfind('/'); slash != std::string::npos)
                add_dir_chain(link.substr(0, slash));
            links.push_back({link, TarEntry::Type::symlink, words[3], 0777});
        }
    }

    std::vector<TarEntry> entries;
    for (const auto& d : dirs)
        entries.push_back({d, TarEntry::Type::directory, "", 0755});
    entries.push_back({"Dockerfile", TarEntry::Type::file, df->text(), 0644});
    entries.push_back({"etc/easey-image", TarEntry::Type::file,
                       "ref=" + img.ref + "\nname=" + img.name + "\ntarget=" + df->target + "\n", 0644});
    entries.insert(entries.end(), links.begin(), links.end());
    try {
        write_tar_gz(tarball, entries);
    } catch (const Error& ex) {
        throw PackFailed(ex.what());
    }
}

bool ChBuilder2TarPacker::available() {
    return program_on_path("ch-builder2tar");
}

void ChBuilder2TarPacker::write_archive(const ImageRef& img, const fs::path& tarball) {
    if (!available())
        throw PackFailed("ch-builder2tar is not installed or not on PATH");
    auto res = run_process({"ch-builder2tar", img.name, tarball.parent_path().string()});
    if (res.exit_code != 0)
        throw PackFailed("ch-builder2tar exited with " + std::to_string(res.exit_code) + ": " + res.err);
    if (!fs::exists(tarball))
        throw PackFailed("ch-builder2tar did not produce " + tarball.string());
}

ContainerArchive pack_container(const ImageRef& img, const fs::path& out_dir, ArchivePacker& packer) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
        throw OutDirUnwritable("cannot create output directory " + out_dir.string() +
                               (ec ? ": " + ec.message() : ""));
    auto probe = out_dir / ".easey-write-probe";
    {
        std::ofstream p(probe);
        if (!p)
            throw OutDirUnwritable("output directory " + out_dir.string() + " is not writable");
    }
    fs::remove(probe, ec);

    if (img.name.empty())
        throw PackFailed("image has no name");
    ContainerArchive archive;
    archive.image_name = img.name;
    archive.path = out_dir / (img.name + ".tar.gz");
    packer.write_archive(img, archive.path);
    try {
        archive.checksum = sha256_file_hex(archive.path);
    } catch (const Error& ex) {
        throw PackFailed(ex.what());
    }
    archive.created_at = utc_now();

    std::ofstream sidecar(archive.path.string() + ".sha256");
    sidecar << archive.checksum << "  " << archive.path.filename().string() << "\n";
    if (!sidecar)
        throw PackFailed("cannot write checksum file for " + archive.path.string());
    return archive;
}

ContainerArchive read_archive(const fs::path& tarball) {
    ContainerArchive archive;
    archive.path = tarball;
    std::string fname = tarball.filename().string();
    constexpr std::string_view suffix = ".tar.gz";
    if (fname.size() <= suffix.size() || fname.compare(fname.size() - suffix.size(), suffix.size(), suffix) != 0)
        throw Error("archive " + tarball.string() + " does not end in .tar.gz");
    archive.image_name = fname.substr(0, fname.size() - suffix.size());
    if (!fs::is_regular_file(tarball))
        throw Error("archive " + tarball.string() + " does not exist");
    std::ifstream in(tarball.string() + ".sha256");
    if (!in || !(in >> archive.checksum))
        throw Error("checksum file " + tarball.string() + ".sha256 is missing");
    std::error_code ec;
    auto mtime = fs::last_write_time(tarball, ec);
    if (!ec)
        archive.created_at = format_utc(std::chrono::time_point_cast<std::chrono::system_clock::duration>(std::chrono::file_clock::to_sys(mtime)));
    return archive;
}

bool verify_archive(const ContainerArchive& archive) {
    try {
        return sha256_file_hex(archive.path) == archive.checksum;
    } catch (const Error&) {
        return false;
    }
}

std::string image_name_for(std::string_view job_name) {
    std::string out;
    for (char c : job_name) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || c == '.' || c == '_')
            out.push_back(static_cast<char>(std::tolower(u)));
        else if (c == ':' && !out.empty() && out.back() != '.')
            out.push_back('.');
        else if (!out.empty() && out.back() != '-')
            out.push_back('-');
    }
    while (!out.empty() && (out.back() == '-' || out.back() == '.'))
        out.pop_back();
    return out.empty() ? "easey-image" : out;
}

} // namespace easey
