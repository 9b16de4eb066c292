#pragma once

namespace polybandit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace polybandit
