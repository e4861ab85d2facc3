#pragma once

namespace airtraj {

inline constexpr const char* kVersion = "airtraj 0.1.0";

} // namespace airtraj
