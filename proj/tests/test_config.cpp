#include "easey/batchgen.hpp"
#include "easey/config.hpp"
#include "easey/error.hpp"
#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <set>

using namespace easey;
using testing::fixture;
using testing::Gen;
using testing::read_text;

namespace {

const std::string kMpiCommand =
    "ch-run -b /lrz/sys/.:/lrz/sys -w lulesh.dash -- /built/lulesh -i 1000 -s 13";

std::string with_data(const std::string& data) {
    return R"({"job":{"name":"x"},"data":)" + data +
           R"(,"deployment":{"nodes":1,"cores-per-task":1,"tasks-per-node":1,"clocktime":"00:10:00"},)"
           R"("execution":[{"serial":{"command":"true"}}]})";
}

std::string minimal(const std::string& deployment = R"({"nodes":1,"cores-per-task":1,"tasks-per-node":1,"clocktime":"00:10:00"})",
                    const std::string& execution = R"([{"serial":{"command":"true"}}])") {
    return R"({"job":{"name":"x"},"deployment":)" + deployment + R"(,"execution":)" + execution + "}";
}

void check_lulesh(const EaseyConfig& cfg) {
    CHECK(cfg.job.name == "LULESH:DASH");
    CHECK(cfg.job.mail == "hoeb@mnm-team.org");
    CHECK(cfg.job.id.empty());
    CHECK_FALSE(cfg.data.has_value());
    CHECK(cfg.deployment.nodes == 46);
    CHECK_FALSE(cfg.deployment.ram_mb.has_value());
    CHECK(cfg.deployment.cores_per_task == 1);
    CHECK(cfg.deployment.tasks_per_node == 48);
    CHECK(cfg.deployment.clocktime == Clocktime{6, 0, 0});
    REQUIRE(cfg.execution.steps.size() == 3);
    CHECK(std::get<SerialStep>(cfg.execution.steps[0]).command == "echo \"Starting LULESH:DASH\"");
    const auto& mpi = std::get<MpiStep>(cfg.execution.steps[1]);
    CHECK(mpi.command == kMpiCommand);
    CHECK(mpi.mpi_tasks == 2197);
    CHECK(std::get<SerialStep>(cfg.execution.steps[2]).command == "echo \"Finished LULESH:DASH\"");
}

} // namespace

TEST_CASE("LULESH config in array form parses strictly") {
    check_lulesh(parse_config(read_text(fixture("lulesh_dash.json"))));
}

TEST_CASE("nested LULESH config needs lax mode") {
    auto text = read_text(fixture("lulesh_dash_nested.json"));
    CHECK_THROWS_AS(parse_config(text), SyntaxError);
    auto cfg = parse_config(text, ParseOptions{true});
    check_lulesh(cfg);
    CHECK(cfg == parse_config(read_text(fixture("lulesh_dash.json"))));
}

TEST_CASE("execution object with repeated keys is rejected in strict mode") {
    auto text = minimal(R"({"nodes":1,"cores-per-task":1,"tasks-per-node":1,"clocktime":"00:10:00"})",
                        R"({"serial":{"command":"a"},"serial":{"command":"b"}})");
    auto relaxed = parse_config_relaxed(text);
    std::set<ViolationCode> codes;
    for (const auto& v : relaxed.violations)
        codes.insert(v.code);
    CHECK(codes.count(ViolationCode::DUPLICATE_KEY));
    CHECK_THROWS_AS(parse_config(text), SchemaError);

    auto lax = parse_config(text, ParseOptions{true});
    REQUIRE(lax.execution.steps.size() == 2);
    CHECK(std::get<SerialStep>(lax.execution.steps[0]).command == "a");
    CHECK(std::get<SerialStep>(lax.execution.steps[1]).command == "b");
}

TEST_CASE("data section is optional") {
    auto cfg = parse_config(minimal());
    CHECK_FALSE(cfg.data.has_value());
}

TEST_CASE("data section with endpoints") {
    auto cfg = parse_config(with_data(
        R"({"input":[{"source":"https://example.org/a.dat","protocol":"https","user":"","auth":""},
                     {"source":"login:/tmp/b.dat","protocol":"scp","user":"u","auth":"/keys/id"}],
            "output":[{"destination":"ftp://example.org/up/","protocol":"ftp","user":"","auth":""}],
            "mount":{"container-path":"/data"}})"));
    REQUIRE(cfg.data);
    REQUIRE(cfg.data->input.size() == 2);
    CHECK(cfg.data->input[0].location == "https://example.org/a.dat");
    CHECK(cfg.data->input[0].protocol == Protocol::https);
    CHECK(cfg.data->input[1].protocol == Protocol::scp);
    CHECK(cfg.data->input[1].user == "u");
    CHECK(cfg.data->input[1].auth == "/keys/id");
    REQUIRE(cfg.data->output.size() == 1);
    CHECK(cfg.data->output[0].protocol == Protocol::ftp);
    CHECK(cfg.data->mount == "/data");
}

TEST_CASE("gridftp parses but is flagged by validate") {
    auto cfg = parse_config(with_data(
        R"({"input":[{"source":"gsiftp://grid/x","protocol":"gridftp"}],"output":[],"mount":{"container-path":"/data"}})"));
    auto report = validate(cfg);
    CHECK(report.violations.size() == 1);
    CHECK(report.has(ViolationCode::PROTOCOL_UNSUPPORTED_GRIDFTP));
    CHECK_FALSE(report.submittable());
}

TEST_CASE("unknown protocol is a schema error") {
    CHECK_THROWS_AS(parse_config(with_data(
                        R"({"input":[{"source":"x","protocol":"rsync"}],"output":[],"mount":{"container-path":"/data"}})")),
                    SchemaError);
}

TEST_CASE("relative mount is a value error") {
    CHECK_THROWS_AS(parse_config(with_data(R"({"input":[],"output":[],"mount":{"container-path":"data"}})")),
                    ValueError);
}

TEST_CASE("clocktime format") {
    CHECK(Clocktime::parse("06:00:00") == Clocktime{6, 0, 0});
    CHECK(Clocktime::parse("120:59:59") == Clocktime{120, 59, 59});
    CHECK_FALSE(Clocktime::parse("6:00"));
    CHECK_FALSE(Clocktime::parse("6:00:00"));
    CHECK_FALSE(Clocktime::parse("06:60:00"));
    CHECK_FALSE(Clocktime::parse("06:00:60"));
    CHECK_FALSE(Clocktime::parse("06:00:00 "));
    CHECK_FALSE(Clocktime::parse("aa:bb:cc"));
    CHECK(Clocktime{6, 0, 0}.str() == "06:00:00");
    CHECK(Clocktime{6, 0, 0}.total_seconds() == 21600);

    auto text = read_text(fixture("lulesh_dash.json"));
    auto bad = text.replace(text.find("06:00:00"), 8, "6:00");
    CHECK_THROWS_AS(parse_config(bad), ValueError);
}

TEST_CASE("integers from numbers or decimal strings") {
    auto cfg = parse_config(minimal(R"({"nodes":"3","cores-per-task":2,"tasks-per-node":"4","clocktime":"01:00:00"})"));
    CHECK(cfg.deployment.nodes == 3);
    CHECK(cfg.deployment.cores_per_task == 2);
    CHECK(cfg.deployment.tasks_per_node == 4);
    CHECK_THROWS_AS(parse_config(minimal(R"({"nodes":"3x","cores-per-task":1,"tasks-per-node":1,"clocktime":"01:00:00"})")),
                    ValueError);
    CHECK_THROWS_AS(parse_config(minimal(R"({"nodes":0,"cores-per-task":1,"tasks-per-node":1,"clocktime":"01:00:00"})")),
                    ValueError);
    CHECK_THROWS_AS(parse_config(minimal(R"({"nodes":-2,"cores-per-task":1,"tasks-per-node":1,"clocktime":"01:00:00"})")),
                    ValueError);
    CHECK_THROWS_AS(parse_config(minimal(R"({"nodes":1.5,"cores-per-task":1,"tasks-per-node":1,"clocktime":"01:00:00"})")),
                    ValueError);
}

TEST_CASE("ram units") {
    auto ram = [](const std::string& value) {
        return parse_config(minimal(R"({"nodes":1,"cores-per-task":1,"tasks-per-node":1,"clocktime":"01:00:00","ram":)" +
                                    value + "}"))
            .deployment.ram_mb;
    };
    CHECK(ram("512") == 512);
    CHECK(ram("\"512\"") == 512);
    CHECK(ram("\"512M\"") == 512);
    CHECK(ram("\"2G\"") == 2048);
    CHECK_FALSE(ram("\"\"").has_value());
    CHECK_FALSE(ram("null").has_value());
    CHECK_THROWS_AS(ram("\"2T\""), ValueError);
    CHECK_THROWS_AS(ram("0"), ValueError);
}

TEST_CASE("mandatory sections and unknown keys") {
    CHECK_THROWS_AS(parse_config(R"({"job":{"name":"x"},"execution":[{"serial":{"command":"a"}}]})"), SchemaError);
    CHECK_THROWS_AS(parse_config(minimal().insert(1, R"("extra":1,)")), SchemaError);
    CHECK_THROWS_AS(parse_config(R"({"job":{"name":"x","colour":"red"},"deployment":{"nodes":1,"cores-per-task":1,"tasks-per-node":1,"clocktime":"00:10:00"},"execution":[{"serial":{"command":"a"}}]})"),
                    SchemaError);
    CHECK_THROWS_AS(parse_config("{\"job\": "), SyntaxError);
    CHECK_THROWS_AS(parse_config("[]"), SchemaError);
}

TEST_CASE("empty execution and bad steps") {
    CHECK_THROWS_AS(parse_config(minimal(R"({"nodes":1,"cores-per-task":1,"tasks-per-node":1,"clocktime":"00:10:00"})", "[]")),
                    ValueError);
    CHECK_THROWS_AS(parse_config(minimal(R"({"nodes":1,"cores-per-task":1,"tasks-per-node":1,"clocktime":"00:10:00"})",
                                         R"([{"shell":{"command":"a"}}])")),
                    SchemaError);
    CHECK_THROWS_AS(parse_config(minimal(R"({"nodes":1,"cores-per-task":1,"tasks-per-node":1,"clocktime":"00:10:00"})",
                                         R"([{"serial":{"command":"a"},"mpi":{"command":"b","mpi-tasks":1}}])")),
                    SchemaError);
}

TEST_CASE("user supplied id is ignored") {
    auto cfg = parse_config(minimal().insert(8, R"("id":"deadbeef",)"));
    CHECK(cfg.job.id.empty());
    CHECK(serialize_config(cfg).find("deadbeef") == std::string::npos);
}

TEST_CASE("validate") {
    auto cfg = parse_config(read_text(fixture("lulesh_dash.json")));
    CHECK(validate(cfg).empty());

    auto zero = cfg;
    std::get<MpiStep>(zero.execution.steps[1]).mpi_tasks = 0;
    auto report = validate(zero);
    CHECK(report.violations.size() == 1);
    CHECK(report.has(ViolationCode::MPI_TASKS_NONPOSITIVE));

    auto mismatch = cfg;
    mismatch.deployment.nodes = 40;
    report = validate(mismatch);
    CHECK(report.violations.size() == 1);
    CHECK(report.has(ViolationCode::NODES_MISMATCH));
    CHECK(report.submittable());
}

TEST_CASE("canonical serialization") {
    auto cfg = parse_config(read_text(fixture("lulesh_dash.json")));
    CHECK(serialize_config(cfg) ==
          R"({"deployment":{"clocktime":"06:00:00","cores-per-task":1,"nodes":46,"tasks-per-node":48},)"
          R"("execution":[{"serial":{"command":"echo \"Starting LULESH:DASH\""}},)"
          R"({"mpi":{"command":"ch-run -b /lrz/sys/.:/lrz/sys -w lulesh.dash -- /built/lulesh -i 1000 -s 13","mpi-tasks":2197}},)"
          R"({"serial":{"command":"echo \"Finished LULESH:DASH\""}}],)"
          R"("job":{"mail":"hoeb@mnm-team.org","name":"LULESH:DASH"}})");
}

TEST_CASE("job id") {
    auto cfg = parse_config(read_text(fixture("lulesh_dash.json")));
    // sha256 over the canonical bytes + timestamp, computed with python hashlib
    CHECK(assign_job_id(cfg, "2020-06-01T12:00:00.000000Z").str() == "aeb66e2894ac0dde");
    CHECK(assign_job_id(cfg, "t") == assign_job_id(cfg, "t"));
    CHECK(assign_job_id(cfg, "2020-06-01T12:00:00Z") != assign_job_id(cfg, "2020-06-01T12:00:01Z"));

    CHECK(JobId::is_valid("0123456789abcdef"));
    CHECK_FALSE(JobId::is_valid("0123456789ABCDEF"));
    CHECK_FALSE(JobId::is_valid("0123456789abcde"));
    CHECK_THROWS_AS(JobId("nothex!!nothex!!"), ValueError);
}

// ---------------------------------------------------------------------------
// properties

namespace {

EaseyConfig random_config(Gen& g) {
    EaseyConfig cfg;
    cfg.job.name = g.word(1, 12) + (g.chance(0.3) ? ":" + g.word() : "");
    if (g.chance(0.5))
        cfg.job.mail = g.word() + "@" + g.word() + ".org";
    if (g.chance(0.6)) {
        DataSpec d;
        static const std::vector<Protocol> protos = {Protocol::https, Protocol::scp, Protocol::ftp};
        for (auto i = g.range(0, 3); i > 0; --i)
            d.input.push_back({"https://" + g.word() + ".org/" + g.word(), g.pick(protos), g.chance(0.5) ? g.word() : "",
                               g.chance(0.3) ? "/keys/" + g.word() : ""});
        for (auto i = g.range(0, 2); i > 0; --i)
            d.output.push_back({g.word() + ":/out/" + g.word(), Protocol::scp, "", ""});
        d.mount = "/" + g.word();
        cfg.data = d;
    }
    cfg.deployment.tasks_per_node = g.range(1, 64);
    cfg.deployment.cores_per_task = g.range(1, 4);
    if (g.chance(0.4))
        cfg.deployment.ram_mb = g.range(1, 1 << 20);
    cfg.deployment.clocktime = Clocktime{static_cast<int>(g.range(0, 99)), static_cast<int>(g.range(0, 59)),
                                         static_cast<int>(g.range(0, 59))};
    std::int64_t max_tasks = 0;
    for (auto i = g.range(1, 6); i > 0; --i) {
        std::string cmd = g.word(1, 6) + " \"" + g.word() + "\" \\ 'q' ü";
        if (g.chance(0.4)) {
            auto tasks = g.range(1, 5000);
            max_tasks = std::max(max_tasks, tasks);
            cfg.execution.steps.push_back(MpiStep{cmd, tasks});
        } else {
            cfg.execution.steps.push_back(SerialStep{cmd});
        }
    }
    cfg.deployment.nodes = max_tasks ? derive_nodes(max_tasks, cfg.deployment.tasks_per_node) : g.range(1, 100);
    return cfg;
}

} // namespace

TEST_CASE("property: parse . serialize . parse is the identity") {
    Gen g(20200601);
    for (int i = 0; i < 300; ++i) {
        auto cfg = random_config(g);
        auto once = parse_config(serialize_config(cfg));
        CHECK(once == cfg);
        CHECK(parse_config(serialize_config(once)) == once);
        CHECK(validate(cfg).empty());
    }
}

TEST_CASE("property: step order is preserved") {
    Gen g(7);
    for (int i = 0; i < 200; ++i) {
        auto cfg = random_config(g);
        auto parsed = parse_config(serialize_config(cfg));
        REQUIRE(parsed.execution.steps.size() == cfg.execution.steps.size());
        for (std::size_t k = 0; k < cfg.execution.steps.size(); ++k)
            CHECK(parsed.execution.steps[k] == cfg.execution.steps[k]);
    }
}

TEST_CASE("property: every strict parse error has a relaxed violation of the same class") {
    Gen g(99);
    for (int i = 0; i < 200; ++i) {
        auto cfg = random_config(g);
        auto doc = nlohmann::json::parse(serialize_config(cfg));
        // corrupt one field at random
        switch (g.range(0, 5)) {
        case 0: doc["deployment"]["nodes"] = 0; break;
        case 1: doc["deployment"]["clocktime"] = "1:2"; break;
        case 2: doc["execution"][0] = {{"bogus", {{"command", "x"}}}}; break;
        case 3: doc["deployment"].erase("clocktime"); break;
        case 4: doc["job"]["name"] = ""; break;
        default: doc["extra"] = 1; break;
        }
        auto text = doc.dump();
        auto relaxed = parse_config_relaxed(text);
        try {
            parse_config(text);
            CHECK(relaxed.violations.empty());
        } catch (const SyntaxError&) {
            FAIL("mutated JSON is still well formed");
        } catch (const SchemaError&) {
            bool found = false;
            for (const auto& v : relaxed.violations)
                found = found || error_class(v.code) == ErrorClass::schema;
            CHECK(found);
        } catch (const ValueError&) {
            bool found = false;
            for (const auto& v : relaxed.violations)
                found = found || error_class(v.code) == ErrorClass::value;
            CHECK(found);
        }
    }
}
