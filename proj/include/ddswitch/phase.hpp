#pragma once

#include <string_view>

namespace ddswitch {

/// Controller phase: mode detection (0) or stabilization (1).
enum class Phase { Detect = 0, Stabilize = 1 };

inline std::string_view to_string(Phase p) { return p == Phase::Detect ? "detect" : "stabilize"; }

}  // namespace ddswitch
