#include "easey/targets.hpp"

#include "easey/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace easey {

using nlohmann::json;

std::string_view to_string(Scheduler s) {
    return s == Scheduler::slurm ? "SLURM" : "PBS";
}

std::optional<Scheduler> scheduler_from_string(std::string_view s) {
    std::string up(s);
    std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
    if (up == "SLURM")
        return Scheduler::slurm;
    if (up == "PBS")
        return Scheduler::pbs;
    return std::nullopt;
}

std::string TargetProfile::launcher() const {
    if (!mpi_launcher.empty())
        return mpi_launcher;
    return scheduler == Scheduler::slurm ? "srun -n" : "mpiexec -n";
}

namespace {

constexpr std::string_view kMarker = "###includelocalmpi###";

TargetProfile simulator_profile(std::string name, Scheduler scheduler) {
    TargetProfile p;
    p.name = std::move(name);
    p.scheduler = scheduler;
    p.mpi_snippet.lines = {
        "RUN (apt-get purge -y 'openmpi*' 'libopenmpi*' 'mpich*' 'libmpich*' || true)",
        "RUN echo 'simulated site MPI' > /etc/easey-site-mpi",
    };
    p.extra_symlinks = {{"/opt/site", "/site"}};
    p.simulated = true;
    return p;
}

} // namespace

TargetRegistry TargetRegistry::builtins() {
    TargetRegistry r;
    r.add(simulator_profile("test:sim", Scheduler::slurm));
    r.add(simulator_profile("test:sim-pbs", Scheduler::pbs));
    return r;
}

const TargetProfile& TargetRegistry::lookup(std::string_view name) const {
    auto it = profiles_.find(name);
    if (it == profiles_.end())
        throw UnknownTarget("unknown target '" + std::string(name) + "'");
    return it->second;
}

bool TargetRegistry::contains(std::string_view name) const {
    return profiles_.find(name) != profiles_.end();
}

std::vector<std::string> TargetRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : profiles_)
        out.push_back(name);
    return out;
}

void TargetRegistry::add(TargetProfile profile) {
    std::string name = profile.name;
    if (!profiles_.emplace(name, std::move(profile)).second)
        throw DuplicateTarget("target '" + name + "' defined more than once");
}

TargetProfile parse_profile(std::string_view text, const std::string& origin) {
    auto fail = [&](const std::string& msg) -> ProfileParseError {
        return ProfileParseError(origin + ": " + msg);
    };
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& ex) {
        throw fail(ex.what());
    }
    if (!doc.is_object())
        throw fail("profile must be an object");

    static const std::vector<std::string> known = {"name",        "scheduler",    "mpi-snippet",
                                                   "site-mounts", "symlinks",     "submit-host",
                                                   "workdir-root", "mpi-launcher"};
    for (const auto& [key, _] : doc.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw fail("unknown key '" + key + "'");
    }

    TargetProfile p;
    try {
        p.name = doc.at("name").get<std::string>();
        auto sched = doc.at("scheduler").get<std::string>();
        auto parsed = scheduler_from_string(sched);
        if (!parsed)
            throw fail("scheduler '" + sched + "' is not supported (SLURM or PBS)");
        p.scheduler = *parsed;
        p.mpi_snippet.lines = doc.at("mpi-snippet").get<std::vector<std::string>>();
        for (const auto& m : doc.value("site-mounts", json::array()))
            p.site_mounts.push_back({m.at("host-path").get<std::string>(),
                                     m.at("container-path").get<std::string>()});
        for (const auto& s : doc.value("symlinks", json::array()))
            p.extra_symlinks.push_back({s.at("target").get<std::string>(),
                                        s.at("link").get<std::string>()});
        p.submit_host = doc.value("submit-host", "");
        p.workdir_root = doc.value("workdir-root", "");
        p.mpi_launcher = doc.value("mpi-launcher", "");
    } catch (const json::exception& ex) {
        throw fail(ex.what());
    }

    if (p.name.empty() || p.name.find(':') == std::string::npos)
        throw fail("name must have the form 'site:cluster'");
    if (p.mpi_snippet.lines.empty())
        throw fail("mpi-snippet must hold at least one instruction");
    for (const auto& line : p.mpi_snippet.lines) {
        if (line.find(kMarker) != std::string::npos)
            throw fail("mpi-snippet must not contain the MPI marker");
    }
    return p;
}

TargetRegistry load_registry(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    TargetRegistry registry = TargetRegistry::builtins();
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        throw ProfileParseError("profile directory '" + dir.string() + "' is not readable");

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    }
    if (ec)
        throw ProfileParseError("cannot list '" + dir.string() + "': " + ec.message());
    std::sort(files.begin(), files.end());

    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in)
            throw ProfileParseError("cannot read " + file.string());
        std::stringstream buf;
        buf << in.rdbuf();
        registry.add(parse_profile(buf.str(), file.string()));
    }
    return registry;
}

const TargetProfile& lookup_target(const TargetRegistry& registry, std::string_view name) {
    return registry.lookup(name);
}

} // namespace easey
