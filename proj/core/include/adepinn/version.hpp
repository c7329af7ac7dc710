#pragma once

namespace adepinn {

inline constexpr const char* kVersionString = "adepinn 0.1.0";

}  // namespace adepinn
