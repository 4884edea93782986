#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <system_error>

namespace jdsim {

/// Shortest decimal string that parses back to exactly `v`; "inf", "-inf"
/// and "nan" for non-finite values.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Strict whole-string parse; accepts "inf"/"-inf"/"nan" as written above.
inline bool parse_double(const std::string& s, double& out) {
    if (s == "inf" || s == "+inf") {
        out = INFINITY;
        return true;
    }
    if (s == "-inf") {
        out = -INFINITY;
        return true;
    }
    if (s == "nan") {
        out = NAN;
        return true;
    }
    const char* b = s.data();
    const char* e = b + s.size();
    if (b != e && *b == '+') ++b;
    const auto res = std::from_chars(b, e, out);
    return res.ec == std::errc{} && res.ptr == e && b != e;
}

inline bool parse_u64(const std::string& s, std::uint64_t& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    const auto res = std::from_chars(b, e, out);
    return res.ec == std::errc{} && res.ptr == e && b != e;
}

}  // namespace jdsim
