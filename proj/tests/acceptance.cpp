// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "easey/batchgen.hpp"
#include "easey/cluster.hpp"
#include "easey/config.hpp"
#include "easey/engine.hpp"
#include "easey/error.hpp"
#include "easey/imageprep.hpp"
#include "easey/metrics.hpp"
#include "easey/targets.hpp"
#include "engine_harness.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>

using namespace easey;
using testing::EngineHarness;
using testing::fixture;
using testing::Gen;
using testing::lulesh_config;
using testing::read_text;
using testing::TempDir;
using testing::with_data;
using testing::write_text;
namespace fs = std::filesystem;

namespace {

struct Failure {
    std::string why;
};

void expect(bool cond, const std::string& why) {
    if (!cond)
        throw Failure{why};
}

struct Interrupt {};

int failures = 0;

void criterion(int n, const std::string& name, double limit_s, const std::function<std::string()>& body) {
    auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
        detail = body();
    } catch (const Failure& f) {
        ok = false;
        detail = f.why;
    } catch (const std::exception& ex) {
        ok = false;
        detail = std::string("unexpected exception: ") + ex.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (ok && limit_s > 0 && secs >= limit_s) {
        ok = false;
        detail = "took " + std::to_string(secs) + " s, limit " + std::to_string(limit_s) + " s";
    }
    failures += ok ? 0 : 1;
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.3f s", secs);
    std::cout << (ok ? "PASS" : "FAIL") << " [" << n << "] " << name << " (" << timing << ")"
              << (detail.empty() ? "" : ": " + detail) << std::endl;
}

void check_legal_history(const JobRecord& rec, const std::string& ctx) {
    JobState at = JobState::created;
    for (const auto& t : rec.history) {
        expect(t.from == at, ctx + ": history breaks at " + std::string(to_string(t.from)));
        expect(is_legal_transition(t.from, t.to),
               ctx + ": illegal " + std::string(to_string(t.from)) + " -> " + std::string(to_string(t.to)));
        at = t.to;
    }
    expect(at == rec.state, ctx + ": history does not end in the current state");
    if (rec.state >= JobState::submitted && rec.state != JobState::failed)
        expect(rec.scheduler_job_id.has_value(), ctx + ": submitted without scheduler id");
    if (rec.state < JobState::submitted)
        expect(!rec.scheduler_job_id.has_value(), ctx + ": scheduler id before submission");
}

// ---------------------------------------------------------------------------

std::string measured_nodes() {
    const std::int64_t ps[] = {10, 13, 16, 20, 25, 32};
    const std::int64_t nodes[] = {21, 46, 86, 167, 326, 683};
    for (int i = 0; i < 6; ++i) {
        auto got = derive_nodes(ps[i] * ps[i] * ps[i], 48);
        expect(got == nodes[i], "p=" + std::to_string(ps[i]) + " gives " + std::to_string(got));
    }
    return "6/6 rows";
}

std::string measured_deltas() {
    const double expected[] = {0.71, 0.78, -3.65, -2.44, -0.71, -1.67};
    auto rows = load_fom_table(fs::path(EASEY_DATA_DIR) / "lulesh_dash_fom.csv");
    expect(rows.size() == 6, "fixture has " + std::to_string(rows.size()) + " rows");
    double lo = 1e9, hi = -1e9;
    std::string shown;
    for (std::size_t i = 0; i < 6; ++i) {
        double d = fom_delta(rows[i].fom_easey, rows[i].fom_native);
        expect(std::fabs(d - expected[i]) <= 0.01 + 1e-9,
               "p=" + std::to_string(rows[i].p) + " gives " + format_delta(d));
        lo = std::min(lo, d);
        hi = std::max(hi, d);
        shown += (i ? " " : "") + format_delta(d);
    }
    // stated range "+0,8 % to -3,6 %", one decimal
    expect(std::fabs(hi - 0.8) <= 0.05 + 1e-9, "largest delta " + format_delta(hi));
    expect(std::fabs(lo + 3.6) <= 0.05 + 1e-9, "smallest delta " + format_delta(lo));
    return shown;
}

std::string golden_scripts() {
    auto reg = load_registry(EASEY_PROFILES_DIR);
    auto cfg = lulesh_config();
    const std::string id = "0123456789abcdef";
    auto refs = [&](const std::string& root) {
        std::string w = root + "/" + id;
        return JobRefs{id, w, w + "/easey-" + id + ".out", w + "/easey-" + id + ".err"};
    };
    auto slurm = render_batch(cfg, reg.lookup("lrz:supermuc-ng"), refs("/hppfs/work/easey"));
    expect(slurm.full_text == read_text(fixture("golden_slurm.sh")), "SLURM script differs from golden file");
    expect(slurm.full_text.find("srun -n 2197 ch-run -b /lrz/sys/.:/lrz/sys -w lulesh.dash -- /built/lulesh -i "
                                "1000 -s 13\n") != std::string::npos,
           "SLURM launcher line missing");
    auto pbs = render_batch(cfg, reg.lookup("example:pbs-cluster"), refs("/scratch/easey"));
    expect(pbs.full_text == read_text(fixture("golden_pbs.sh")), "PBS script differs from golden file");
    return "SLURM and PBS byte-identical";
}

std::string end_to_end() {
    EngineHarness h(Scheduler::slurm, SimOptions{true});
    TempDir src, dest;
    write_text(src / "mesh.dat", "mesh 13");
    write_text(src / "params.dat", "iterations 1000");
    auto cfg = with_data(lulesh_config(), {(src / "mesh.dat").string(), (src / "params.dat").string()},
                         {(dest / "fom.txt").string()});
    auto rec = h.submit(cfg);
    expect(rec.state == JobState::pending, "state after submit is " + std::string(to_string(rec.state)));

    const std::vector<std::string_view> order = {step::move_archive, step::extract, step::stage_in, step::render,
                                                 step::submit};
    for (std::size_t i = 1; i < order.size(); ++i) {
        auto a = rec.mark(order[i - 1]);
        auto b = rec.mark(order[i]);
        expect(a && b, "missing step mark");
        expect(a->at_us < b->at_us, std::string(order[i - 1]) + " not before " + std::string(order[i]));
    }
    fs::path wd = rec.workdir;
    expect(read_text(wd / "data/mesh.dat") == "mesh 13", "input 1 not staged");
    expect(read_text(wd / "data/params.dat") == "iterations 1000", "input 2 not staged");

    h.sim.set_outcome(*rec.scheduler_job_id, SimOutcome{JobState::finished, "", {{"data/fom.txt", "873366.4"}}});
    sim_tick(h.sim);
    expect(h.engine->poll_status(rec.id, h.session).state == JobState::running, "not running after one tick");
    sim_tick(h.sim);
    auto st = h.engine->poll_status(rec.id, h.session);
    expect(st.state == JobState::finished, "not finished after two ticks");
    expect(st.stdout_excerpt.find("[sim] srun -n 2197") != std::string::npos, "launcher line missing from stdout");

    auto results = h.engine->finalize(rec.id, h.session);
    expect(results.size() == 1 && results[0].status == TransferStatus::ok, "stage-out failed");
    expect(read_text(dest / "fom.txt") == "873366.4", "output content differs");

    auto final_rec = h.engine->record(rec.id);
    std::vector<JobState> path = {JobState::created};
    for (const auto& t : final_rec.history)
        path.push_back(t.to);
    const std::vector<JobState> want = {JobState::created, JobState::staging, JobState::submitted,
                                        JobState::pending, JobState::running, JobState::finished};
    expect(path == want, "state path differs");

    auto plain = h.submit(lulesh_config());
    expect(!fs::exists(fs::path(plain.workdir) / "data"), "data folder created without data");
    return "2 inputs, 1 output, state path created..finished";
}

std::string dockerfile_property() {
    const auto registry = TargetRegistry::builtins();
    const auto& profile = registry.lookup("test:sim");
    Gen g(20200601);
    static const std::vector<std::string> kinds = {"RUN", "COPY", "ENV", "WORKDIR", "LABEL", "ARG", "USER"};
    for (int i = 0; i < 200; ++i) {
        std::vector<std::string> src = {"FROM " + g.word() + ":" + g.word()};
        for (auto n = g.range(0, 30); n > 0; --n)
            src.push_back(g.pick(kinds) + " " + g.word() + " " + g.word());
        bool marker = g.chance(0.75);
        if (marker)
            src.insert(src.begin() + g.range(1, static_cast<std::int64_t>(src.size())),
                       (g.chance(0.2) ? "  " : "") + std::string(kMpiMarker));
        std::string text;
        for (const auto& l : src)
            text += l + "\n";
        std::string mount = "/" + g.word() + "/" + g.word();
        auto df = transform_dockerfile(text, profile, mount);
        const std::string ctx = "case " + std::to_string(i);

        std::size_t m = marker ? 1 : 0;
        expect(df.lines.size() ==
                   src.size() - m + m * profile.mpi_snippet.lines.size() + 1 + profile.extra_symlinks.size(),
               ctx + ": line-count law");
        for (const auto& l : df.lines)
            expect(l.find(kMpiMarker) == std::string::npos, ctx + ": marker survived");
        const auto& snip = profile.mpi_snippet.lines;
        std::size_t occurrences = 0;
        for (std::size_t k = 0; k + snip.size() <= df.lines.size(); ++k)
            occurrences += std::equal(snip.begin(), snip.end(), df.lines.begin() + static_cast<long>(k));
        expect(occurrences == m, ctx + ": snippet inserted " + std::to_string(occurrences) + " times");
        expect(std::count(df.lines.begin(), df.lines.end(), "RUN mkdir -p " + mount) == 1, ctx + ": mkdir missing");
        auto again = transform_dockerfile(df.text(), profile, mount);
        expect(again.lines == df.lines, ctx + ": not idempotent");
    }
    return "200 randomized Dockerfiles";
}

EaseyConfig random_config(Gen& g) {
    EaseyConfig cfg;
    cfg.job.name = g.word() + ":" + g.word();
    if (g.chance(0.5))
        cfg.job.mail = g.word() + "@" + g.word() + ".org";
    if (g.chance(0.5)) {
        DataSpec d;
        d.mount = "/" + g.word();
        for (auto n = g.range(0, 3); n > 0; --n)
            d.input.push_back({"host:/" + g.word() + "/" + g.word(), Protocol::scp, "", ""});
        for (auto n = g.range(0, 2); n > 0; --n)
            d.output.push_back({"https://" + g.word() + ".org/" + g.word(), Protocol::https, "", ""});
        cfg.data = d;
    }
    cfg.deployment.nodes = g.range(1, 1000);
    cfg.deployment.tasks_per_node = g.range(1, 64);
    cfg.deployment.cores_per_task = g.range(1, 4);
    if (g.chance(0.4))
        cfg.deployment.ram_mb = g.range(1, 200000);
    cfg.deployment.clocktime = Clocktime{static_cast<int>(g.range(0, 72)), static_cast<int>(g.range(0, 59)),
                                         static_cast<int>(g.range(0, 59))};
    for (auto n = g.range(1, 6); n > 0; --n) {
        if (g.chance(0.5))
            cfg.execution.steps.push_back(MpiStep{g.word() + " -x " + g.word(), g.range(1, 4096)});
        else
            cfg.execution.steps.push_back(SerialStep{"echo \"" + g.word() + "\""});
    }
    return cfg;
}

bool typed_config_error(const Error& ex) {
    return dynamic_cast<const SyntaxError*>(&ex) || dynamic_cast<const SchemaError*>(&ex) ||
           dynamic_cast<const ValueError*>(&ex);
}

std::string mutate(const std::string& base, Gen& g) {
    std::string s = base;
    static const std::string junk = "{}[]:,\"\\0123456789-.eE truefalsnul\x01\xff";
    for (auto n = g.range(1, 4); n > 0; --n) {
        if (s.empty())
            s = "{";
        auto pos = static_cast<std::size_t>(g.range(0, static_cast<std::int64_t>(s.size()) - 1));
        switch (g.range(0, 5)) {
        case 0: s[pos] = g.pick(junk); break;
        case 1: s.erase(pos, static_cast<std::size_t>(g.range(1, 8))); break;
        case 2: s.insert(pos, 1, g.pick(junk)); break;
        case 3: s.resize(pos); break;
        case 4: s.insert(pos, s.substr(pos, static_cast<std::size_t>(g.range(1, 20)))); break;
        default: {
            // swap a value for one of a different type
            auto colon = s.find(':', pos);
            if (colon != std::string::npos) {
                static const std::vector<std::string> values = {"null", "[]", "{}", "-1", "0", "1e400",
                                                                "\"\"", "true", "\"99:99:99\"", "3.5"};
                s.insert(colon + 1, g.pick(values) + ",");
            }
        }
        }
    }
    return s;
}

std::string config_roundtrip_and_fuzz() {
    std::vector<EaseyConfig> corpus = {parse_config(read_text(fixture("lulesh_dash.json"))),
                                       parse_config(read_text(fixture("lulesh_dash_nested.json")), ParseOptions{true})};
    Gen g(4);
    for (int i = 0; i < 300; ++i)
        corpus.push_back(random_config(g));
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        auto text = serialize_config(corpus[i]);
        auto once = parse_config(text);
        expect(once == corpus[i], "corpus " + std::to_string(i) + ": parse(serialize(c)) != c");
        expect(serialize_config(once) == text, "corpus " + std::to_string(i) + ": serialization not stable");
    }

    const std::vector<std::string> seeds = {read_text(fixture("lulesh_dash.json")),
                                            read_text(fixture("lulesh_dash_nested.json")),
                                            serialize_config(corpus[5])};
    int valid = 0, rejected = 0;
    for (int i = 0; i < 1000; ++i) {
        auto text = mutate(seeds[static_cast<std::size_t>(i) % seeds.size()], g);
        for (bool lax : {false, true}) {
            try {
                auto cfg = parse_config(text, ParseOptions{lax});
                expect(parse_config(serialize_config(cfg)) == cfg, "mutant " + std::to_string(i) + " round-trip");
                ++valid;
            } catch (const Error& ex) {
                expect(typed_config_error(ex),
                       "mutant " + std::to_string(i) + " raised untyped " + std::string(ex.kind()));
                ++rejected;
            }
        }
    }
    return std::to_string(corpus.size()) + " round-trips; 1000 mutants: " + std::to_string(valid) + " parsed, " +
           std::to_string(rejected) + " typed errors";
}

std::string state_machine_safety() {
    Gen g(7777);
    std::size_t polls = 0, finalizes = 0, ticks = 0, submits = 0;
    for (int run = 0; run < 500; ++run) {
        EngineHarness h;
        std::vector<JobId> ids;
        for (int op = 0; op < 12; ++op) {
            auto pick = g.range(0, 9);
            if (ids.empty() || (pick == 0 && ids.size() < 3)) {
                if (g.chance(0.3))
                    h.sim.set_next_outcome(SimOutcome{JobState::failed, "x", {}});
                ids.push_back(h.submit(lulesh_config()).id);
                ++submits;
            } else if (pick < 4) {
                sim_tick(h.sim);
                ++ticks;
            } else if (pick < 8) {
                h.engine->poll_status(g.pick(ids), h.session);
                ++polls;
            } else {
                const auto& id = g.pick(ids);
                bool terminal = is_terminal(h.engine->record(id).state);
                try {
                    h.engine->finalize(id, h.session);
                    expect(terminal, "finalize accepted a live job");
                } catch (const NotTerminal&) {
                    expect(!terminal, "finalize refused a terminal job");
                }
                ++finalizes;
            }
            for (const auto& id : ids)
                check_legal_history(h.engine->record(id), "run " + std::to_string(run));
        }
        for (const auto& id : ids) {
            auto rec = h.engine->record(id);
            auto truth = h.sim.job(*rec.scheduler_job_id);
            expect(truth.has_value(), "record points at an unknown simulator job");
            if (is_terminal(rec.state))
                expect(rec.state == truth->state, "terminal record disagrees with the simulator");
            else
                expect(*path_rank(rec.state) <= *path_rank(truth->state) || is_terminal(truth->state),
                       "record is ahead of the simulator");
        }
    }
    return "500 runs, " + std::to_string(submits) + " submits, " + std::to_string(ticks) + " ticks, " +
           std::to_string(polls) + " polls, " + std::to_string(finalizes) + " finalizes";
}

std::string crash_consistency() {
    const std::vector<std::string_view> points = {step::created, step::move_archive, step::extract,
                                                  step::mkdir_data, step::stage_in, step::render,
                                                  step::submit, step::record};
    TempDir src, dest;
    write_text(src / "a.in", "A");
    write_text(src / "b.in", "B");
    int converged = 0;
    for (auto point : points) {
        for (bool fail_job : {false, true}) {
            const std::string ctx = "crash after " + std::string(point) + (fail_job ? " (failing job)" : "");
            EngineHarness h;
            EngineOptions crash;
            crash.step_hook = [point](std::string_view s, const JobRecord&) {
                if (s == point)
                    throw Interrupt{};
            };
            h.restart(crash);
            if (fail_job)
                h.sim.set_next_outcome(SimOutcome{JobState::failed, "boom", {}});
            auto cfg = with_data(lulesh_config(), {(src / "a.in").string(), (src / "b.in").string()},
                                 {(dest / "out.txt").string()});
            bool interrupted = false;
            try {
                h.submit(cfg);
            } catch (const Interrupt&) {
                interrupted = true;
            }
            expect(interrupted, ctx + ": hook did not fire");

            // process dies: only the store and the cluster survive
            auto cluster_state = h.sim.to_json();
            Simulator cluster = Simulator::from_json(cluster_state);
            SimSession session(cluster, h.home / "cluster");
            RecordStore store(h.home / "records");
            EngineOptions fresh;
            fresh.staging_root = h.home / "staging";
            Engine engine(store, EngineHarness::agent(), fresh);

            auto all = store.load_all();
            expect(all.size() == 1, ctx + ": expected one persisted record");
            const auto id = all[0].id;
            expect(cluster.jobs().size() <= 1, ctx + ": duplicate submission");

            for (int round = 0; round < 4; ++round) {
                engine.poll_status(id, session);
                auto rec = engine.record(id);
                check_legal_history(rec, ctx);
                if (cluster.jobs().empty()) {
                    expect(rec.state == JobState::failed && rec.failure == "interrupted before submission",
                           ctx + ": unsubmitted job not marked failed");
                } else {
                    const auto truth = cluster.jobs().front();
                    expect(rec.scheduler_job_id == truth.sim_id, ctx + ": scheduler id not recovered");
                    expect(rec.state == truth.state, ctx + ": record says " + std::string(to_string(rec.state)) +
                                                         ", simulator says " + std::string(to_string(truth.state)));
                }
                sim_tick(cluster);
            }
            ++converged;
        }
    }
    return std::to_string(converged) + " crash points converged";
}

} // namespace

int main() {
    std::cout << "easey acceptance\n";
    criterion(1, "node allocation per cube size", 1.0, measured_nodes);
    criterion(2, "FOM deltas of the measured runs", 0, measured_deltas);
    criterion(3, "golden batch scripts", 0, golden_scripts);
    criterion(4, "submission workflow end to end on the simulator", 5.0, end_to_end);
    criterion(5, "Dockerfile transformation property", 10.0, dockerfile_property);
    criterion(6, "config round-trip and fuzz", 0, config_roundtrip_and_fuzz);
    criterion(7, "state-machine safety", 0, state_machine_safety);
    criterion(8, "crash consistency", 0, crash_consistency);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
    return failures == 0 ? 0 : 1;
}
