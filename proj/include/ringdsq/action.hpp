#pragma once

#include <stdexcept>
#include <string>

namespace ringdsq {

/// Lateral command for the controlled vehicle. Lane 0 is the rightmost lane,
/// so "left" moves to a higher lane index.
enum class Action : int { ChangeLeft = 0, KeepLane = 1, ChangeRight = 2 };

inline constexpr int kNumActions = 3;

inline const char* to_string(Action a) {
  switch (a) {
    case Action::ChangeLeft: return "change_left";
    case Action::KeepLane: return "keep_lane";
    case Action::ChangeRight: return "change_right";
  }
  throw std::invalid_argument("unknown action");
}

}  // namespace ringdsq
