#pragma once

namespace fcgo {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fcgo
