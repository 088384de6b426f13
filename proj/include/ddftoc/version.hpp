#pragma once

namespace ddftoc {

inline constexpr const char* kVersion = "1.0.0";

} // namespace ddftoc
