#include "easey/timeutil.hpp"

#include <cstdio>
#include <ctime>

namespace easey {

std::string format_utc(std::chrono::system_clock::time_point t, bool micros) {
    using namespace std::chrono;
    auto secs = time_point_cast<seconds>(t);
    if (secs > t)
        secs -= seconds(1);
    std::time_t tt = system_clock::to_time_t(secs);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[48];
    std::size_t n = std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    std::string out(buf, n);
    if (micros) {
        auto us = duration_cast<microseconds>(t - secs).count();
        std::snprintf(buf, sizeof buf, ".%06lld", static_cast<long long>(us));
        out += buf;
    }
    out += 'Z';
    return out;
}

} // namespace easey
