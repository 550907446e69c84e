#include "wip/gestures.hpp"

#include <stdexcept>

namespace wip {

std::optional<Gesture> parse_gesture(std::string_view name) {
  for (std::size_t i = 0; i < kNumGestures; ++i) {
    if (kGestureNames[i] == name) return kAllGestures[i];
  }
  return std::nullopt;
}

std::optional<Gesture> gesture_from_index(long index) {
  if (index < 0 || index >= static_cast<long>(kNumGestures)) return std::nullopt;
  return kAllGestures[static_cast<std::size_t>(index)];
}

Gesture gesture_from_name(std::string_view name) {
  if (auto g = parse_gesture(name)) return *g;
  throw std::invalid_argument("unknown gesture label '" + std::string(name) + "'");
}

}  // namespace wip
