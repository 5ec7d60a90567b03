#pragma once

namespace auglab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace auglab
