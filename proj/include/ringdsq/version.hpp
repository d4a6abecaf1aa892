#pragma once

namespace ringdsq {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ringdsq
