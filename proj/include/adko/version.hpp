#pragma once

namespace adko {
inline constexpr const char* kVersion = "0.1.0";
}
