#pragma once

// Seedable generator of 30 Hz head/thigh tracker recordings for the nine
// in-place gestures. Subjects differ in height, movement amplitude, cadence,
// step length and sensor noise, which is what produces the per-user domain
// gap the classifier has to adapt to.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "wip/gestures.hpp"
#include "wip/seed.hpp"

namespace wip {

inline constexpr double kSampleRate = 30.0;
inline constexpr std::size_t kNumDevices = 3;
inline constexpr std::size_t kFeaturesPerDevice = 12;
inline constexpr std::size_t kFrameFeatures = kNumDevices * kFeaturesPerDevice;

enum class Device : int { Hmd = 0, LeftTracker = 1, RightTracker = 2 };

using Vec3 = std::array<double, 3>;

// Wraps an angle in degrees to [-180, 180).
inline double wrap_degrees(double a) {
  double w = std::fmod(a + 180.0, 360.0);
  if (w < 0) w += 360.0;
  return w - 180.0;
}

// Feature layout of one device (12 channels):
//   0-2 position (m), 3-5 velocity (m/s),
//   6-8 rotation (deg: pitch about x, yaw about y, roll about z; y is up),
//   9-11 angular velocity (deg/s).
struct DeviceSample {
  Vec3 position{};
  Vec3 velocity{};
  Vec3 rotation{};
  Vec3 angular_velocity{};

  std::array<double, kFeaturesPerDevice> features() const;
  static DeviceSample from_features(const double* f);
};

struct Frame {
  double timestamp = 0.0;
  std::array<DeviceSample, kNumDevices> devices{};

  const DeviceSample& device(Device d) const {
    return devices[static_cast<std::size_t>(d)];
  }
  std::array<double, kFrameFeatures> features() const;
};

struct LabeledFrame {
  Frame frame;
  Gesture label = Gesture::Standing;
};

using Recording = std::vector<LabeledFrame>;

struct SubjectProfile {
  std::string subject_id;
  double standing_head_height = 1.7;  // m, in [1.4, 2.0]
  double amplitude_scale = 1.0;       // in [0.5, 1.5]
  double frequency_pref = 1.8;        // Hz, walking cadence
  double phase_jitter = 0.1;          // rad
  double noise_sigma = 0.002;         // m
  double step_length = 0.35;          // m

  bool operator==(const SubjectProfile&) const = default;
};

struct GestureSegment {
  Gesture gesture = Gesture::Standing;
  double duration = 1.0;  // seconds
};

struct GestureScript {
  std::vector<GestureSegment> segments;

  double total_duration() const;

  // Session covering all nine gestures with per-class window counts ranked
  // like the collected dataset (standing most frequent, keeping squat least).
  static GestureScript default_script();
  // Text form: one "label duration" pair per line, '#' starts a comment.
  static GestureScript parse(const std::string& text);
  std::string to_text() const;
};

struct SubjectRecording {
  SubjectProfile profile;
  Recording frames;
};

SubjectProfile sample_subject(std::uint64_t seed);

// Frame count is round(total_duration * 30). Throws std::invalid_argument for
// an empty script, non-positive durations or labels outside the vocabulary.
Recording generate_recording(const SubjectProfile& profile,
                             const GestureScript& script, std::uint64_t seed);

// Subjects are named S1..Sn. Throws if n_subjects < 2.
std::vector<SubjectRecording> generate_dataset(int n_subjects,
                                               const GestureScript& script,
                                               std::uint64_t seed);

}  // namespace wip
