#include "easey/error.hpp"
#include "easey/imageprep.hpp"
#include "easey/targets.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace easey;
using testing::TempDir;
using testing::write_text;

TEST_CASE("built-in simulator targets") {
    auto reg = TargetRegistry::builtins();
    CHECK(reg.size() == 2);
    CHECK(reg.lookup("test:sim").scheduler == Scheduler::slurm);
    CHECK(reg.lookup("test:sim").simulated);
    CHECK(reg.lookup("test:sim-pbs").scheduler == Scheduler::pbs);
    CHECK(reg.lookup("test:sim").launcher() == "srun -n");
    CHECK(reg.lookup("test:sim-pbs").launcher() == "mpiexec -n");
    CHECK_THROWS_AS(reg.lookup("lrz:supermuc-ng"), UnknownTarget);
}

TEST_CASE("shipped profiles load") {
    auto reg = load_registry(EASEY_PROFILES_DIR);
    const auto& lrz = lookup_target(reg, "lrz:supermuc-ng");
    CHECK(lrz.scheduler == Scheduler::slurm);
    CHECK(lrz.submit_host == "skx.supermuc.lrz.de");
    REQUIRE(lrz.site_mounts.size() == 1);
    CHECK(lrz.site_mounts[0].host_path == "/lrz/sys/.");
    CHECK(lrz.site_mounts[0].container_path == "/lrz/sys");
    CHECK_FALSE(lrz.mpi_snippet.lines.empty());
    CHECK(lookup_target(reg, "example:pbs-cluster").scheduler == Scheduler::pbs);
    CHECK(reg.contains("test:sim"));
    CHECK_THROWS_AS(lookup_target(reg, "nope:nope"), UnknownTarget);
}

TEST_CASE("profile validation") {
    const std::string good = R"({"name":"a:b","scheduler":"PBS","mpi-snippet":["RUN true"]})";
    auto p = parse_profile(good);
    CHECK(p.name == "a:b");
    CHECK(p.scheduler == Scheduler::pbs);
    CHECK(p.site_mounts.empty());

    CHECK_THROWS_AS(parse_profile(R"({"name":"ab","scheduler":"PBS","mpi-snippet":["RUN true"]})"), ProfileParseError);
    CHECK_THROWS_AS(parse_profile(R"({"name":"a:b","scheduler":"LSF","mpi-snippet":["RUN true"]})"), ProfileParseError);
    CHECK_THROWS_AS(parse_profile(R"({"name":"a:b","scheduler":"PBS","mpi-snippet":[]})"), ProfileParseError);
    CHECK_THROWS_AS(parse_profile(R"({"name":"a:b","scheduler":"PBS","mpi-snippet":["###includelocalmpi###"]})"),
                    ProfileParseError);
    CHECK_THROWS_AS(parse_profile(R"({"name":"a:b","scheduler":"PBS","mpi-snippet":["RUN true"],"colour":1})"),
                    ProfileParseError);
    CHECK_THROWS_AS(parse_profile("not json"), ProfileParseError);
}

TEST_CASE("duplicate profile names") {
    TempDir dir;
    write_text(dir / "a.json", R"({"name":"x:y","scheduler":"SLURM","mpi-snippet":["RUN true"]})");
    write_text(dir / "b.json", R"({"name":"x:y","scheduler":"SLURM","mpi-snippet":["RUN false"]})");
    CHECK_THROWS_AS(load_registry(dir.path()), DuplicateTarget);

    TempDir shadow;
    write_text(shadow / "a.json", R"({"name":"test:sim","scheduler":"SLURM","mpi-snippet":["RUN true"]})");
    CHECK_THROWS_AS(load_registry(shadow.path()), DuplicateTarget);
}

TEST_CASE("scheduler names") {
    CHECK(to_string(Scheduler::slurm) == "SLURM");
    CHECK(scheduler_from_string("PBS") == Scheduler::pbs);
    CHECK_FALSE(scheduler_from_string("lsf"));
}

TEST_CASE("empty profile directory gives only built-ins") {
    TempDir dir;
    auto reg = load_registry(dir.path());
    CHECK(reg.size() == 2);
    CHECK_THROWS_AS(lookup_target(reg, ""), UnknownTarget);
    CHECK(lookup_target(reg, "test:sim").simulated);
}

TEST_CASE("two distinct profiles") {
    TempDir dir;
    write_text(dir / "a.json", R"({"name":"s:one","scheduler":"SLURM","mpi-snippet":["RUN true"]})");
    write_text(dir / "b.json", R"({"name":"s:two","scheduler":"PBS","mpi-snippet":["RUN true"]})");
    write_text(dir / "notes.txt", "ignored");
    auto reg = load_registry(dir.path());
    CHECK(reg.size() == 4);
    CHECK(lookup_target(reg, "s:two").scheduler == Scheduler::pbs);
}
