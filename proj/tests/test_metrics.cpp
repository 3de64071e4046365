#include "easey/batchgen.hpp"
#include "easey/error.hpp"
#include "easey/metrics.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace easey;
using testing::Gen;
using testing::TempDir;
using testing::write_text;

namespace {

struct Row {
    std::int64_t p, cores, nodes;
    double easey, native, delta;
};

// LULESH/DASH measurements, decimal commas normalized
const Row kMeasured[] = {
    {10, 1000, 21, 412122.1, 409204.8, 0.71},       {13, 2197, 46, 873366.4, 866515.2, 0.78},
    {16, 4096, 86, 1511665.1, 1566899.9, -3.65},    {20, 8000, 167, 2846589.0, 2916102.0, -2.44},
    {25, 15625, 326, 5423072.1, 5461509.5, -0.71},  {32, 32768, 683, 10627767.7, 10805287.0, -1.67},
};

} // namespace

TEST_CASE("fom_delta examples") {
    CHECK(fom_delta(412122.1, 409204.8) == doctest::Approx(0.71).epsilon(1e-12));
    CHECK(fom_delta(1511665.1, 1566899.9) == doctest::Approx(-3.65).epsilon(1e-12));
    CHECK(fom_delta(5.0, 5.0) == 0.0);
    CHECK_THROWS_AS(fom_delta(0.0, 1.0), NonPositiveFom);
    CHECK_THROWS_AS(fom_delta(-1.0, 1.0), NonPositiveFom);
}

TEST_CASE("every measured delta is reproduced") {
    for (const auto& r : kMeasured) {
        CHECK(std::fabs(fom_delta(r.easey, r.native) - r.delta) < 0.01 + 1e-9);
        CHECK(format_delta(fom_delta(r.easey, r.native)) == format_delta(r.delta));
    }
    // the other denominator misses p=10 and p=16
    CHECK(std::fabs(100 * (412122.1 - 409204.8) / 409204.8 - 0.71) > 0.002);
}

TEST_CASE("rounding") {
    CHECK(fom_delta(100.0, 99.875) == doctest::Approx(0.13));
    CHECK(fom_delta(100.0, 100.125) == doctest::Approx(-0.13));
    CHECK(format_delta(0.78) == "+0.78");
    CHECK(format_delta(-3.65) == "-3.65");
    CHECK(format_delta(0.0) == "0.00");
    CHECK(format_delta(-0.001) == "0.00");
}

TEST_CASE("fom_per_core") {
    CHECK(fom_per_core(412122.1, 1000) == doctest::Approx(412.1221));
    CHECK(fom_per_core(0, 5) == 0.0);
    CHECK(fom_per_core(10627767.7, 32768) == doctest::Approx(324.33373107910154));
    CHECK_THROWS_AS(fom_per_core(1, 0), ValueError);
}

TEST_CASE("shipped FOM table") {
    auto rows = load_fom_table(std::filesystem::path(EASEY_DATA_DIR) / "lulesh_dash_fom.csv");
    REQUIRE(rows.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        const auto& r = kMeasured[i];
        CHECK(rows[i].p == r.p);
        CHECK(rows[i].cores == r.cores);
        CHECK(rows[i].nodes == r.nodes);
        CHECK(rows[i].fom_easey == r.easey);
        CHECK(rows[i].fom_native == r.native);
        CHECK(rows[i].delta == r.delta);
        CHECK(derive_nodes(rows[i].cores, 48) == rows[i].nodes);
    }
    CHECK(rows[1].nodes == 46);
}

TEST_CASE("FOM table errors") {
    const std::string header = "p,cores,nodes,fom_easey,fom_native,delta\n";
    CHECK_THROWS_AS(parse_fom_table(""), ParseError);
    CHECK_THROWS_AS(parse_fom_table(header), ParseError);
    CHECK_THROWS_AS(parse_fom_table(header + "10,999,21,1,1,0\n"), ParseError);
    CHECK_THROWS_AS(parse_fom_table(header + "10,1000,21,1,1\n"), ParseError);
    CHECK_THROWS_AS(parse_fom_table(header + "10,1000,21,abc,1,0\n"), ParseError);
    CHECK_THROWS_AS(parse_fom_table("p,cores\n10,1000\n"), ParseError);
    CHECK(parse_fom_table(header + "# comment\n\n2,8,1,1.5,1.0,+33.33\n").size() == 1);
    TempDir dir;
    write_text(dir / "empty.csv", "");
    CHECK_THROWS_AS(load_fom_table(dir / "empty.csv"), ParseError);
    CHECK_THROWS_AS(load_fom_table(dir / "missing.csv"), ParseError);
}

TEST_CASE("property: sign law") {
    Gen g(5);
    std::uniform_real_distribution<double> fom(1e-3, 1e8);
    for (int i = 0; i < 2000; ++i) {
        double e = fom(g.engine());
        double n = g.chance(0.1) ? e : fom(g.engine());
        double d = fom_delta(e, n);
        if (d > 0)
            CHECK(e > n);
        if (d < 0)
            CHECK(e < n);
        if (e == n)
            CHECK(d == 0.0);
        CHECK(std::fabs(d * 100 - std::round(d * 100)) < 1e-6);
    }
}
