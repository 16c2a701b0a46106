#pragma once

namespace winhalt {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace winhalt
