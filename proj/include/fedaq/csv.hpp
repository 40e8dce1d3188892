#pragma once

#include <charconv>
#include <string>

namespace fedaq {

// Shortest decimal form that parses back to the same double. Keeps CSV and
// JSON output readable, locale-independent, and byte-stable across runs.
inline std::string format_double(double x) {
    char buf[40];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, end);
}

}  // namespace fedaq
