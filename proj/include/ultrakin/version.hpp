#pragma once

namespace ultrakin {

inline constexpr const char* kVersion = "0.1.0";

} // namespace ultrakin
