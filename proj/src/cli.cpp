#include "easey/cli.hpp"

#include "easey/batchgen.hpp"
#include "easey/cluster.hpp"
#include "easey/config.hpp"
#include "easey/engine.hpp"
#include "easey/error.hpp"
#include "easey/imageprep.hpp"
#include "easey/metrics.hpp"
#include "easey/process.hpp"
#include "easey/staging.hpp"
#include "easey/targets.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#ifndef EASEY_DEFAULT_PROFILES_DIR
#define EASEY_DEFAULT_PROFILES_DIR "profiles"
#endif
#ifndef EASEY_DEFAULT_FOM_TABLE
#define EASEY_DEFAULT_FOM_TABLE "data/lulesh_dash_fom.csv"
#endif

namespace easey {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(std::string_view kind) {
    static const std::map<std::string_view, int> table = {
        {"UnknownTarget", exit_code::unknown_target},
        {"DuplicateTarget", exit_code::unknown_target},
        {"ProfileParseError", exit_code::unknown_target},
        {"BuildFailed", exit_code::build_failed},
        {"MultipleMarkers", exit_code::build_failed},
        {"MisplacedMarker", exit_code::build_failed},
        {"BuilderUnavailable", exit_code::build_failed},
        {"PackFailed", exit_code::pack_failed},
        {"OutDirUnwritable", exit_code::pack_failed},
        {"SubmitFailed", exit_code::submit_failed},
        {"ExtractFailed", exit_code::submit_failed},
        {"ScriptRejected", exit_code::submit_failed},
        {"EmptyExecution", exit_code::submit_failed},
        {"UnsupportedScheduler", exit_code::submit_failed},
        {"StagingFailed", exit_code::staging_failed},
        {"TransferFailed", exit_code::staging_failed},
        {"PathEscape", exit_code::staging_failed},
        {"ProtocolUnsupported", exit_code::staging_failed},
        {"AuthFailed", exit_code::staging_failed},
        {"UnknownJob", exit_code::unknown_job},
        {"NotTerminal", exit_code::not_terminal},
        {"ParseError", exit_code::parse_error},
        {"NonPositiveFom", exit_code::parse_error},
        {"SyntaxError", exit_code::config_invalid},
        {"SchemaError", exit_code::config_invalid},
        {"ValueError", exit_code::config_invalid},
        {"SessionLost", exit_code::session_lost},
        {"StoreCorrupt", exit_code::store_corrupt},
    };
    auto it = table.find(kind);
    return it == table.end() ? exit_code::internal : it->second;
}

namespace {

struct Globals {
    bool json = false;
    std::string home;
    std::string profiles;
    std::string key;
    int retries = 3;
    int backoff_ms = 1000;
};

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : std::move(fallback);
}

std::string read_file(const fs::path& p, const char* what) {
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw Error(std::string("cannot read ") + what + " " + p.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Strict first; the historical nested form is accepted with a note.
EaseyConfig load_config(const fs::path& path, std::ostream& err) {
    auto text = read_file(path, "config");
    try {
        return parse_config(text);
    } catch (const Error& strict) {
        try {
            auto cfg = parse_config(text, ParseOptions{true});
            err << "note: " << path.string() << " uses the nested job layout; accepted in lax mode\n";
            return cfg;
        } catch (const Error&) {
            throw;
        }
    }
}

class Context {
public:
    explicit Context(Globals g) : g_(std::move(g)) {
        if (g_.home.empty()) {
            auto home = env_or("HOME", ".");
            g_.home = env_or("EASEY_HOME", (fs::path(home) / ".easey").string());
        }
        if (g_.profiles.empty())
            g_.profiles = env_or("EASEY_PROFILES", EASEY_DEFAULT_PROFILES_DIR);
        if (g_.key.empty())
            g_.key = env_or("EASEY_KEY", "");
    }

    const Globals& globals() const { return g_; }
    fs::path home() const { return g_.home; }

    const TargetRegistry& registry() {
        if (!registry_) {
            std::error_code ec;
            registry_ = fs::is_directory(g_.profiles, ec) ? load_registry(g_.profiles) : TargetRegistry::builtins();
        }
        return *registry_;
    }

    RecordStore& store() {
        if (!store_)
            store_ = std::make_unique<RecordStore>(home() / "records");
        return *store_;
    }

    TransferAgent agent() const {
        std::optional<fs::path> key;
        if (!g_.key.empty())
            key = fs::path(g_.key);
        return TransferAgent(CredentialStore(key),
                             RetryPolicy{g_.retries, std::chrono::milliseconds(g_.backoff_ms)});
    }

    Engine engine() {
        EngineOptions opts;
        opts.staging_root = home() / "staging";
        return Engine(store(), agent(), opts);
    }

    fs::path sim_state_path(const TargetProfile& p) const {
        std::string name;
        for (char c : p.name)
            name.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_');
        return home() / "sim" / (name + ".json");
    }

    Simulator& simulator(const TargetProfile& p) {
        auto it = sims_.find(p.name);
        if (it != sims_.end())
            return it->second;
        auto path = sim_state_path(p);
        std::error_code ec;
        Simulator sim = fs::exists(path, ec) ? Simulator::from_json(read_file(path, "simulator state"))
                                             : Simulator(p.scheduler);
        return sims_.emplace(p.name, std::move(sim)).first->second;
    }

    std::unique_ptr<ClusterSession> session(const TargetProfile& p) {
        if (p.simulated)
            return std::make_unique<SimSession>(simulator(p), home() / "cluster");
        if (p.submit_host.empty() || p.submit_host == "localhost") {
            auto root = p.workdir_root.empty() ? (home() / "cluster" / "jobs").string() : p.workdir_root;
            return std::make_unique<LocalSession>(p.scheduler, root);
        }
        if (g_.key.empty())
            throw AuthFailed("target " + p.name + " needs a key: set EASEY_KEY or pass --key");
        return std::make_unique<SshSession>(p.submit_host, g_.key, p.scheduler, p.workdir_root);
    }

    /// Writes every simulator touched by this invocation back to disk.
    void save_simulators() {
        for (auto& [name, sim] : sims_) {
            auto path = sim_state_path(registry().lookup(name));
            fs::create_directories(path.parent_path());
            auto tmp = path;
            tmp += ".tmp";
            {
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                out << sim.to_json();
            }
            fs::rename(tmp, path);
        }
    }

private:
    Globals g_;
    std::optional<TargetRegistry> registry_;
    std::unique_ptr<RecordStore> store_;
    std::map<std::string, Simulator> sims_;
};

JobId parse_job_id(const std::string& text) {
    if (!JobId::is_valid(text))
        throw UnknownJob("'" + text + "' is not a job id");
    return JobId(text);
}

void emit(std::ostream& out, bool as_json, const json& doc, const std::string& text) {
    if (as_json)
        out << doc.dump() << "\n";
    else
        out << text;
}

// ---------------------------------------------------------------------------

struct BuildArgs {
    std::string dockerfile;
    std::string target;
    std::string config;
    std::string out = ".";
    std::string builder = "auto";
    std::string image;
};

int cmd_build(Context& ctx, const BuildArgs& a, std::ostream& out, std::ostream& err) {
    const auto& profile = lookup_target(ctx.registry(), a.target);
    std::string mount = "/data";
    std::string image = a.image;
    if (!a.config.empty()) {
        auto cfg = load_config(a.config, err);
        if (cfg.data && !cfg.data->mount.empty())
            mount = cfg.data->mount;
        if (image.empty())
            image = image_name_for(cfg.job.name);
    }
    if (image.empty())
        image = "easey-image";

    auto df = transform_dockerfile(read_file(a.dockerfile, "Dockerfile"), profile, mount);

    std::string kind = a.builder;
    if (kind == "auto")
        kind = DockerBuilder(".").available() && ChBuilder2TarPacker::available() ? "docker" : "mock";

    ImageRef img;
    ContainerArchive archive;
    if (kind == "mock") {
        MockBuilder builder;
        img = build_image(df, builder, image);
        MockPacker packer(builder);
        archive = pack_container(img, a.out, packer);
    } else if (kind == "docker") {
        DockerBuilder builder(fs::path(a.dockerfile).parent_path().empty() ? fs::path(".")
                                                                         : fs::path(a.dockerfile).parent_path());
        img = build_image(df, builder, image);
        ChBuilder2TarPacker packer;
        archive = pack_container(img, a.out, packer);
    } else {
        throw BuilderUnavailable("unknown builder '" + a.builder + "'");
    }
    emit(out, ctx.globals().json,
         {{"archive", archive.path.string()}, {"checksum", archive.checksum}, {"image", img.ref}, {"target", profile.name}},
         "archive " + archive.path.string() + "\nchecksum " + archive.checksum + "\n");
    return exit_code::ok;
}

struct SubmitArgs {
    std::string config;
    std::string archive;
    std::string target;
};

int cmd_submit(Context& ctx, const SubmitArgs& a, std::ostream& out, std::ostream& err) {
    const auto& profile = lookup_target(ctx.registry(), a.target);
    auto cfg = load_config(a.config, err);
    for (const auto& v : validate(cfg).violations) {
        if (severity(v.code) == Severity::warning)
            err << "warning: " << to_string(v.code) << " at " << v.path << ": " << v.message << "\n";
    }
    ContainerArchive archive;
    try {
        archive = read_archive(a.archive);
    } catch (const StepError&) {
        throw;
    } catch (const Error& ex) {
        throw SubmitFailed(ex.what(), "", "");
    }
    auto session = ctx.session(profile);
    auto engine = ctx.engine();
    try {
        auto rec = engine.submit(cfg, archive, profile, *session);
        ctx.save_simulators();
        emit(out, ctx.globals().json,
             {{"job_id", rec.id.str()}, {"state", std::string(to_string(rec.state))},
              {"scheduler_job_id", rec.scheduler_job_id.value_or("")}, {"workdir", rec.workdir}},
             rec.id.str() + "\n");
        return exit_code::ok;
    } catch (const StepError& ex) {
        ctx.save_simulators();
        if (!ex.job_id().empty())
            err << "job " << ex.job_id() << " failed\n";
        if (!ex.log().empty())
            err << ex.log();
        throw;
    }
}

struct StatusArgs {
    std::string id;
    bool logs = false;
};

int cmd_status(Context& ctx, const StatusArgs& a, std::ostream& out) {
    auto id = parse_job_id(a.id);
    auto engine = ctx.engine();
    auto rec = engine.record(id);
    const auto& profile = lookup_target(ctx.registry(), rec.target);
    auto session = ctx.session(profile);
    auto report = engine.poll_status(id, *session);
    ctx.save_simulators();
    rec = engine.record(id);

    json doc = {{"job_id", id.str()},
                {"state", std::string(to_string(report.state))},
                {"scheduler_job_id", rec.scheduler_job_id.value_or("")}};
    std::string text = std::string(to_string(report.state)) + "\n";
    if (!rec.failure.empty()) {
        doc["failure"] = rec.failed_step + ": " + rec.failure;
        if (!ctx.globals().json && a.logs)
            text += "failed at " + rec.failed_step + ": " + rec.failure + "\n";
    }
    if (a.logs) {
        doc["stdout"] = report.stdout_excerpt;
        doc["stderr"] = report.stderr_excerpt;
        text += "--- stdout ---\n" + report.stdout_excerpt;
        if (!report.stdout_excerpt.empty() && report.stdout_excerpt.back() != '\n')
            text += "\n";
        text += "--- stderr ---\n" + report.stderr_excerpt;
        if (!report.stderr_excerpt.empty() && report.stderr_excerpt.back() != '\n')
            text += "\n";
    }
    emit(out, ctx.globals().json, doc, text);
    return exit_code::ok;
}

int cmd_fetch(Context& ctx, const std::string& id_text, std::ostream& out) {
    auto id = parse_job_id(id_text);
    auto engine = ctx.engine();
    auto rec = engine.record(id);
    const auto& profile = lookup_target(ctx.registry(), rec.target);
    auto session = ctx.session(profile);
    auto results = engine.finalize(id, *session);
    ctx.save_simulators();

    bool failed = false;
    json items = json::array();
    std::string text;
    for (const auto& r : results) {
        auto file = r.task.local_path.filename().string();
        bool ok = r.status == TransferStatus::ok;
        failed = failed || !ok;
        items.push_back({{"file", file}, {"destination", r.task.endpoint.location},
                         {"status", std::string(to_string(r.status))}, {"bytes", r.bytes}, {"detail", r.detail}});
        text += ok ? "ok " + file + "\n" : "failed " + file + ": " + r.detail + "\n";
    }
    if (results.empty())
        text = rec.state == JobState::failed ? "nothing to fetch (job failed; logs in " + engine.local_dir(id).string() + ")\n"
                                             : "nothing to fetch\n";
    emit(out, ctx.globals().json,
         {{"job_id", id.str()}, {"state", std::string(to_string(rec.state))}, {"transfers", items},
          {"logs", engine.local_dir(id).string()}},
         text);
    return failed ? exit_code::staging_failed : exit_code::ok;
}

int cmd_report(Context& ctx, const std::string& table, std::ostream& out) {
    auto rows = load_fom_table(table);
    json items = json::array();
    std::ostringstream text;
    text << std::left << std::setw(4) << "p" << std::right << std::setw(8) << "cores" << std::setw(7) << "nodes"
         << std::setw(14) << "fom_easey" << std::setw(14) << "fom_native" << std::setw(8) << "delta"
         << std::setw(12) << "easey/core" << std::setw(12) << "native/core" << "\n";
    for (const auto& r : rows) {
        auto delta = fom_delta(r.fom_easey, r.fom_native);
        auto pe = fom_per_core(r.fom_easey, r.cores);
        auto pn = fom_per_core(r.fom_native, r.cores);
        items.push_back({{"p", r.p}, {"cores", r.cores}, {"nodes", r.nodes}, {"fom_easey", r.fom_easey},
                         {"fom_native", r.fom_native}, {"delta", delta}, {"fom_per_core_easey", pe},
                         {"fom_per_core_native", pn}});
        text << std::left << std::setw(4) << r.p << std::right << std::setw(8) << r.cores << std::setw(7) << r.nodes
             << std::fixed << std::setprecision(1) << std::setw(14) << r.fom_easey << std::setw(14) << r.fom_native
             << std::setw(8) << format_delta(delta) << std::setprecision(2) << std::setw(12) << pe << std::setw(12)
             << pn << "\n";
    }
    emit(out, ctx.globals().json, items, text.str());
    return exit_code::ok;
}

struct SimArgs {
    std::string target = "test:sim";
    int count = 1;
    std::string sim_id;
    std::string state = "finished";
    std::string stderr_text;
    std::vector<std::string> files;
};

int cmd_sim_tick(Context& ctx, const SimArgs& a, std::ostream& out) {
    const auto& profile = lookup_target(ctx.registry(), a.target);
    if (!profile.simulated)
        throw UnknownTarget(profile.name + " is not a simulator target");
    auto& sim = ctx.simulator(profile);
    json items = json::array();
    std::string text;
    for (int i = 0; i < a.count; ++i) {
        for (const auto& e : sim.tick()) {
            items.push_back({{"seq", e.seq}, {"sim_id", e.sim_id}, {"from", std::string(to_string(e.from))},
                             {"to", std::string(to_string(e.to))}});
            text += e.sim_id + " " + std::string(to_string(e.from)) + " -> " + std::string(to_string(e.to)) + "\n";
        }
    }
    ctx.save_simulators();
    emit(out, ctx.globals().json, items, text);
    return exit_code::ok;
}

int cmd_sim_outcome(Context& ctx, const SimArgs& a, std::ostream& out) {
    const auto& profile = lookup_target(ctx.registry(), a.target);
    if (!profile.simulated)
        throw UnknownTarget(profile.name + " is not a simulator target");
    SimOutcome outcome;
    auto state = job_state_from_string(a.state);
    if (!state || !is_terminal(*state))
        throw ValueError("outcome state must be finished or failed");
    outcome.terminal = *state;
    outcome.stderr_text = a.stderr_text;
    for (const auto& f : a.files) {
        auto eq = f.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ValueError("--file expects <relative path>=<content>");
        outcome.files.emplace_back(f.substr(0, eq), f.substr(eq + 1));
    }
    auto& sim = ctx.simulator(profile);
    if (a.sim_id.empty())
        sim.set_next_outcome(outcome);
    else
        sim.set_outcome(a.sim_id, outcome);
    ctx.save_simulators();
    emit(out, ctx.globals().json, {{"ok", true}}, "");
    return exit_code::ok;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Deploy containerized jobs to HPC batch schedulers", "easey"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "easey 1.0.0");

    Globals g;
    app.add_flag("--json", g.json, "Machine-readable output");
    app.add_option("--home", g.home, "State directory (default $EASEY_HOME or ~/.easey)");
    app.add_option("--profiles", g.profiles, "Target profile directory (default $EASEY_PROFILES)");
    app.add_option("--key", g.key, "Default credential key file (default $EASEY_KEY)");
    app.add_option("--retries", g.retries, "Attempts per transfer")->check(CLI::Range(1, 100));
    app.add_option("--retry-backoff-ms", g.backoff_ms, "Initial retry backoff")->check(CLI::Range(0, 600000));

    BuildArgs build;
    auto* c_build = app.add_subcommand("build", "Adapt a Dockerfile for a target and pack the image");
    c_build->add_option("dockerfile", build.dockerfile)->required();
    c_build->add_option("--target,-t", build.target)->required();
    c_build->add_option("--config,-c", build.config);
    c_build->add_option("--out,-o", build.out);
    c_build->add_option("--builder", build.builder)->check(CLI::IsMember({"auto", "mock", "docker"}));
    c_build->add_option("--image", build.image, "Image name (default derived from job.name)");

    SubmitArgs submit;
    auto* c_submit = app.add_subcommand("submit", "Deploy an archive and submit the job");
    c_submit->add_option("--config,-c", submit.config)->required();
    c_submit->add_option("--archive,-a", submit.archive)->required();
    c_submit->add_option("--target,-t", submit.target)->required();

    StatusArgs status;
    auto* c_status = app.add_subcommand("status", "Poll the scheduler for a job's state");
    c_status->add_option("id", status.id)->required();
    c_status->add_flag("--logs", status.logs, "Show stdout/stderr excerpts");

    std::string fetch_id;
    auto* c_fetch = app.add_subcommand("fetch", "Stage out the results of a terminated job");
    c_fetch->add_option("id", fetch_id)->required();

    std::string fom_table = EASEY_DEFAULT_FOM_TABLE;
    auto* c_report = app.add_subcommand("report", "Print FOM deltas and FOM per core");
    c_report->add_option("--fom-table", fom_table);

    SimArgs sim;
    auto* c_sim = app.add_subcommand("sim", "Drive a simulator target");
    c_sim->require_subcommand(1);
    auto* c_tick = c_sim->add_subcommand("tick", "Advance every simulated job one state");
    c_tick->add_option("--target,-t", sim.target);
    c_tick->add_option("--count,-n", sim.count)->check(CLI::Range(1, 1000));
    auto* c_outcome = c_sim->add_subcommand("outcome", "Script how a simulated job ends");
    c_outcome->add_option("--target,-t", sim.target);
    c_outcome->add_option("--job", sim.sim_id, "Simulator job id (default: next submission)");
    c_outcome->add_option("--state", sim.state)->check(CLI::IsMember({"finished", "failed"}));
    c_outcome->add_option("--stderr", sim.stderr_text);
    c_outcome->add_option("--file", sim.files, "<relative path>=<content>, written on completion");

    for (auto* sub : {c_build, c_submit, c_status, c_fetch, c_report, c_sim})
        sub->fallthrough();
    c_tick->fallthrough();
    c_outcome->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? exit_code::ok : exit_code::usage;
    }

    try {
        Context ctx(g);
        if (*c_build)
            return cmd_build(ctx, build, out, err);
        if (*c_submit)
            return cmd_submit(ctx, submit, out, err);
        if (*c_status)
            return cmd_status(ctx, status, out);
        if (*c_fetch)
            return cmd_fetch(ctx, fetch_id, out);
        if (*c_report)
            return cmd_report(ctx, fom_table, out);
        if (*c_tick)
            return cmd_sim_tick(ctx, sim, out);
        if (*c_outcome)
            return cmd_sim_outcome(ctx, sim, out);
    } catch (const BuildFailed& ex) {
        err << "error: BuildFailed: " << ex.what() << "\n";
        if (!ex.log().empty())
            err << ex.log();
        return exit_code::build_failed;
    } catch (const Error& ex) {
        err << "error: " << ex.kind() << ": " << ex.what() << "\n";
        return exit_code_for(ex.kind());
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        return exit_code::internal;
    }
    return exit_code::usage;
}

} // namespace easey
