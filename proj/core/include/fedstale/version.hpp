#pragma once

#include <string_view>

namespace fedstale {

#ifdef FEDSTALE_VERSION
inline constexpr std::string_view kVersion = FEDSTALE_VERSION;
#else
inline constexpr std::string_view kVersion = "unknown";
#endif

}  // namespace fedstale
