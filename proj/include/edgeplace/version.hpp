#pragma once

#include <string_view>

namespace edgeplace {

inline constexpr std::string_view kVersion = "edgeplace 0.1.0";

}  // namespace edgeplace
