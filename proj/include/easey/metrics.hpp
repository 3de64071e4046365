#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace easey {

struct FomSample {
    std::int64_t p = 0; // cube length
    std::int64_t cores = 0;
    std::int64_t nodes = 0;
    double fom_easey = 0;
    double fom_native = 0;
    double delta = 0; // percentage as printed in the fixture
};

/// 100 * (fom_easey - fom_native) / fom_easey, rounded half away from zero
/// to two decimals. Throws NonPositiveFom when fom_easey <= 0.
double fom_delta(double fom_easey, double fom_native);

/// fom / cores. Throws ValueError when cores < 1.
double fom_per_core(double fom, std::int64_t cores);

/// Parses `p,cores,nodes,fom_easey,fom_native,delta` rows after a header
/// line. Throws ParseError, including for rows with cores != p^3.
std::vector<FomSample> parse_fom_table(std::string_view text);
std::vector<FomSample> load_fom_table(const std::filesystem::path& file);

/// "+0.78", "-3.65", "0.00".
std::string format_delta(double delta);

} // namespace easey
