#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace easey {

enum class Scheduler { slurm, pbs };

std::string_view to_string(Scheduler s);
std::optional<Scheduler> scheduler_from_string(std::string_view s);

/// Dockerfile instructions injected in place of the MPI marker line.
struct DockerfileFragment {
    std::vector<std::string> lines;
    bool operator==(const DockerfileFragment&) const = default;
};

struct SiteMount {
    std::string host_path;
    std::string container_path;
    bool operator==(const SiteMount&) const = default;
};

/// A symlink created inside the image: `link` -> `target`.
struct Symlink {
    std::string target;
    std::string link;
    bool operator==(const Symlink&) const = default;
};

/// Everything known about one cluster: how to adapt images for it and how
/// to talk to its scheduler.
struct TargetProfile {
    std::string name; // "site:cluster"
    Scheduler scheduler = Scheduler::slurm;
    DockerfileFragment mpi_snippet;
    std::vector<SiteMount> site_mounts;
    std::vector<Symlink> extra_symlinks;
    std::string submit_host;  // "[user@]host"; empty or "localhost" runs locally
    std::string workdir_root; // empty: chosen by the cluster session
    std::string mpi_launcher; // empty: dialect default ("srun -n" / "mpiexec -n")

    /// True for the built-in simulator targets.
    bool simulated = false;

    std::string launcher() const;
};

/// Immutable after construction; safe to share between threads.
class TargetRegistry {
public:
    /// Registry holding only the built-in profiles.
    static TargetRegistry builtins();

    /// Throws UnknownTarget.
    const TargetProfile& lookup(std::string_view name) const;
    bool contains(std::string_view name) const;
    std::size_t size() const noexcept { return profiles_.size(); }
    std::vector<std::string> names() const;

    /// Throws DuplicateTarget.
    void add(TargetProfile profile);

private:
    std::map<std::string, TargetProfile, std::less<>> profiles_;
};

/// Parses one profile document. Throws ProfileParseError.
TargetProfile parse_profile(std::string_view text, const std::string& origin = "<profile>");

/// Built-ins plus one profile per `*.json` file in `dir` (non-recursive).
/// Throws DuplicateTarget or ProfileParseError.
TargetRegistry load_registry(const std::filesystem::path& dir);

const TargetProfile& lookup_target(const TargetRegistry& registry, std::string_view name);

} // namespace easey
