#pragma once

#include "easey/cluster.hpp"
#include "easey/config.hpp"
#include "easey/engine.hpp"
#include "easey/imageprep.hpp"
#include "easey/targets.hpp"
#include "support.hpp"

#include <memory>

namespace testing {

/// Engine wired to a simulator, a record store and a mock-packed archive,
/// all under one temporary directory.
struct EngineHarness {
    explicit EngineHarness(easey::Scheduler s = easey::Scheduler::slurm, easey::SimOptions sim_opts = {false},
                           easey::EngineOptions extra = {})
        : sim(s, sim_opts), session(sim, home / "cluster"), store(home / "records") {
        static const auto reg = easey::TargetRegistry::builtins();
        profile = reg.lookup(s == easey::Scheduler::slurm ? "test:sim" : "test:sim-pbs");
        extra.staging_root = home / "staging";
        options = extra;
        engine = std::make_unique<easey::Engine>(store, agent(), options);

        easey::MockBuilder builder;
        easey::MockPacker packer(builder);
        auto df = easey::transform_dockerfile("FROM ubuntu:20.04\n###includelocalmpi###\n", profile, "/data");
        archive = easey::pack_container(easey::build_image(df, builder, "lulesh.dash"), home / "out", packer);
    }

    static easey::TransferAgent agent() {
        return easey::TransferAgent(easey::CredentialStore{}, easey::RetryPolicy{1, std::chrono::milliseconds(0)});
    }

    /// Reopens the engine over the same store, as a restarted process would.
    void restart(easey::EngineOptions extra = {}) {
        extra.staging_root = home / "staging";
        options = extra;
        engine = std::make_unique<easey::Engine>(store, agent(), options);
    }

    easey::JobRecord submit(const easey::EaseyConfig& cfg) { return engine->submit(cfg, archive, profile, session); }

    TempDir home;
    easey::Simulator sim;
    easey::SimSession session;
    easey::RecordStore store;
    easey::TargetProfile profile;
    easey::EngineOptions options;
    std::unique_ptr<easey::Engine> engine;
    easey::ContainerArchive archive;
};

inline easey::EaseyConfig lulesh_config() {
    return easey::parse_config(read_text(fixture("lulesh_dash.json")));
}

/// The LULESH config with its data section replaced by local-path inputs/outputs.
inline easey::EaseyConfig with_data(easey::EaseyConfig cfg, std::vector<std::string> inputs,
                                    std::vector<std::string> outputs) {
    easey::DataSpec d;
    d.mount = "/data";
    for (auto& in : inputs)
        d.input.push_back({std::move(in), easey::Protocol::scp, "", ""});
    for (auto& out : outputs)
        d.output.push_back({std::move(out), easey::Protocol::scp, "", ""});
    cfg.data = d;
    return cfg;
}

} // namespace testing
