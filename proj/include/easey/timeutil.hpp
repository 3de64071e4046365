#pragma once

#include <chrono>
#include <string>

namespace easey {

/// "YYYY-MM-DDTHH:MM:SSZ", or with microseconds when `micros` is set.
std::string format_utc(std::chrono::system_clock::time_point t, bool micros = false);

inline std::string utc_now(bool micros = false) {
    return format_utc(std::chrono::system_clock::now(), micros);
}

} // namespace easey
