#include "easey/metrics.hpp"

#include "easey/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace easey {

namespace {

double round2(double v) {
    // half away from zero; the small epsilon absorbs binary representation
    // error in values such as 0.125 computed from decimal inputs
    double scaled = std::fabs(v) * 100.0;
    double r = std::floor(scaled + 0.5 + 1e-9);
    return std::copysign(r / 100.0, v);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

std::int64_t parse_int(std::string_view s, std::size_t line, const char* column) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
        throw ParseError("line " + std::to_string(line) + ": " + column + " '" + std::string(s) +
                         "' is not an integer");
    return v;
}

double parse_double(std::string_view s, std::size_t line, const char* column) {
    std::string text(s);
    if (!text.empty() && text.front() == '+')
        text.erase(0, 1);
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (text.empty() || used != text.size() || !std::isfinite(v))
        throw ParseError("line " + std::to_string(line) + ": " + column + " '" + std::string(s) +
                         "' is not a number");
    return v;
}

} // namespace

double fom_delta(double fom_easey, double fom_native) {
    if (!(fom_easey > 0))
        throw NonPositiveFom("EASEY figure of merit must be positive");
    return round2(100.0 * (fom_easey - fom_native) / fom_easey);
}

double fom_per_core(double fom, std::int64_t cores) {
    if (cores < 1)
        throw ValueError("cores must be at least 1");
    return fom / static_cast<double>(cores);
}

std::vector<FomSample> parse_fom_table(std::string_view text) {
    std::vector<FomSample> rows;
    bool header = false;
    std::size_t lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        auto line = trim(text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        if (line.empty() || line.front() == '#')
            continue;
        auto cols = split_commas(line);
        if (!header) {
            if (cols.size() != 6 || cols[0] != "p" || cols[1] != "cores" || cols[2] != "nodes" ||
                cols[3] != "fom_easey" || cols[4] != "fom_native" || cols[5] != "delta")
                throw ParseError("line " + std::to_string(lineno) +
                                 ": expected header p,cores,nodes,fom_easey,fom_native,delta");
            header = true;
            continue;
        }
        if (cols.size() != 6)
            throw ParseError("line " + std::to_string(lineno) + ": expected 6 columns, got " +
                             std::to_string(cols.size()));
        FomSample s;
        s.p = parse_int(cols[0], lineno, "p");
        s.cores = parse_int(cols[1], lineno, "cores");
        s.nodes = parse_int(cols[2], lineno, "nodes");
        s.fom_easey = parse_double(cols[3], lineno, "fom_easey");
        s.fom_native = parse_double(cols[4], lineno, "fom_native");
        s.delta = parse_double(cols[5], lineno, "delta");
        if (s.p < 1 || s.p > 2097151 || s.cores != s.p * s.p * s.p)
            throw ParseError("line " + std::to_string(lineno) + ": cores " + std::to_string(s.cores) +
                             " is not p^3 for p=" + std::to_string(s.p));
        if (s.nodes < 1)
            throw ParseError("line " + std::to_string(lineno) + ": nodes must be positive");
        rows.push_back(s);
    }
    if (!header)
        throw ParseError("FOM table is empty");
    if (rows.empty())
        throw ParseError("FOM table has no rows");
    return rows;
}

std::vector<FomSample> load_fom_table(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in)
        throw ParseError("cannot read " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_fom_table(buf.str());
}

std::string format_delta(double delta) {
    char buf[32];
    double r = round2(delta);
    if (r == 0)
        r = 0; // no "-0.00"
    std::snprintf(buf, sizeof buf, r > 0 ? "+%.2f" : "%.2f", r);
    return buf;
}

} // namespace easey
