#pragma once

#include "easey/targets.hpp"

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace easey {

inline constexpr std::string_view kMpiMarker = "###includelocalmpi###";

/// A Dockerfile adapted for one target.
struct TransformedDockerfile {
    std::vector<std::string> lines;
    std::string mount_path;
    std::string target;

    /// Lines joined by '\n' with a trailing newline.
    std::string text() const;
};

/// Replaces the marker line with the target's MPI snippet and appends the
/// mount-point and symlink instructions. Lines already carrying an identical
/// mount or symlink instruction are not appended twice, so the transform is
/// idempotent.
///
/// Throws MultipleMarkers when more than one marker line exists,
/// MisplacedMarker when the marker shares its logical line with anything
/// else, ValueError on empty input or a relative mount path.
TransformedDockerfile transform_dockerfile(std::string_view src, const TargetProfile& profile,
                                           std::string_view mount);

/// Opaque handle to a built image.
struct ImageRef {
    std::string ref;  // "mock:<digest>", "docker:<name>", ...
    std::string name; // image name; the archive is named after it
    std::string log;  // captured build output
};

class ImageBuilder {
public:
    virtual ~ImageBuilder() = default;
    /// Throws BuildFailed or BuilderUnavailable.
    virtual ImageRef build(const TransformedDockerfile& df, std::string_view image_name) = 0;
    virtual bool available() const = 0;
    /// Whether build() may be called from several threads at once.
    virtual bool tolerates_concurrency() const = 0;
};

/// Deterministic in-memory builder. The digest is SHA-256 of the
/// Dockerfile text, so identical inputs give identical references.
class MockBuilder final : public ImageBuilder {
public:
    /// Any instruction containing `needle` fails the build.
    void fail_on(std::string needle);

    ImageRef build(const TransformedDockerfile& df, std::string_view image_name) override;
    bool available() const override { return true; }
    bool tolerates_concurrency() const override { return true; }

    std::optional<TransformedDockerfile> find(std::string_view ref) const;

private:
    mutable std::mutex mu_;
    std::vector<std::string> fail_needles_;
    std::map<std::string, TransformedDockerfile, std::less<>> images_;
};

/// Runs `docker build`. Needs a reachable daemon and usually root.
class DockerBuilder final : public ImageBuilder {
public:
    explicit DockerBuilder(std::filesystem::path context_dir);

    ImageRef build(const TransformedDockerfile& df, std::string_view image_name) override;
    bool available() const override;
    bool tolerates_concurrency() const override { return true; }

private:
    std::filesystem::path context_;
};

ImageRef build_image(const TransformedDockerfile& df, ImageBuilder& builder,
                     std::string_view image_name = "easey-image");

// ---------------------------------------------------------------------------

struct ContainerArchive {
    std::filesystem::path path; // <out_dir>/<image_name>.tar.gz
    std::string image_name;
    std::string checksum; // SHA-256 hex of the file
    std::string created_at;
};

class ArchivePacker {
public:
    virtual ~ArchivePacker() = default;
    /// Writes the archive for `img` to `tarball`. Throws PackFailed.
    virtual void write_archive(const ImageRef& img, const std::filesystem::path& tarball) = 0;
};

/// Packs a synthetic root filesystem for images produced by a MockBuilder.
class MockPacker final : public ArchivePacker {
public:
    explicit MockPacker(const MockBuilder& builder) : builder_(builder) {}
    void write_archive(const ImageRef& img, const std::filesystem::path& tarball) override;

private:
    const MockBuilder& builder_;
};

/// Calls Charliecloud's `ch-builder2tar <image> <dir>`.
class ChBuilder2TarPacker final : public ArchivePacker {
public:
    void write_archive(const ImageRef& img, const std::filesystem::path& tarball) override;
    static bool available();
};

/// Writes `<out_dir>/<image name>.tar.gz` plus a `.sha256` sidecar.
/// Throws OutDirUnwritable or PackFailed.
ContainerArchive pack_container(const ImageRef& img, const std::filesystem::path& out_dir,
                                ArchivePacker& packer);

/// Reads the archive and its `.sha256` sidecar. Throws easey::Error when
/// either is missing.
ContainerArchive read_archive(const std::filesystem::path& tarball);

/// Recomputes the file checksum and compares it with the stored one.
bool verify_archive(const ContainerArchive& archive);

/// Lowercase image name derived from a job name ("LULESH:DASH" ->
/// "lulesh.dash"). The archive extracts into a directory of this name.
std::string image_name_for(std::string_view job_name);

} // namespace easey
