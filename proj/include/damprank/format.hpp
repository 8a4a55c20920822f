#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace damprank {

/// Shortest round-trip decimal form, locale-independent. Used for every
/// float emitted to CSV/JSON so strict-mode runs are byte-identical.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

} // namespace damprank
