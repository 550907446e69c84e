#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace wip {

// The nine in-place gestures, in the fixed vocabulary order used by every
// file format (label index = enum value).
enum class Gesture : int {
  Standing = 0,
  Walking,
  Jogging,
  Jumping,
  SquatDown,
  SquatKeep,
  SquatUp,
  StepForward,
  StepBackward,
};

inline constexpr std::size_t kNumGestures = 9;

inline constexpr std::array<std::string_view, kNumGestures> kGestureNames = {
    "standing",   "walking",    "jogging",      "jumping",      "squat_down",
    "squat_keep", "squat_up",   "step_forward", "step_backward"};

inline constexpr std::array<Gesture, kNumGestures> kAllGestures = {
    Gesture::Standing,  Gesture::Walking,   Gesture::Jogging,
    Gesture::Jumping,   Gesture::SquatDown, Gesture::SquatKeep,
    Gesture::SquatUp,   Gesture::StepForward, Gesture::StepBackward};

inline constexpr std::size_t index_of(Gesture g) {
  return static_cast<std::size_t>(g);
}

inline std::string_view name_of(Gesture g) { return kGestureNames[index_of(g)]; }

std::optional<Gesture> parse_gesture(std::string_view name);
std::optional<Gesture> gesture_from_index(long index);

// Throwing variants for input validation.
Gesture gesture_from_name(std::string_view name);

}  // namespace wip
