#pragma once

namespace jdsim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace jdsim
