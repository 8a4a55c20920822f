#pragma once

namespace damprank {

inline constexpr const char* version = "1.0.0";
inline constexpr int run_json_schema = 1;

} // namespace damprank
