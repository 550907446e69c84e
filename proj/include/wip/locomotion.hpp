#pragma once

// Turns the recognised gesture stream plus raw tracker readings into avatar
// commands: heading from the thigh trackers, step interval from the head's
// vertical bob, walking/jogging speed, jump impulses and squat posture.

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wip/gestures.hpp"

namespace wip {

// How step interval maps to walking speed. AsWritten follows the printed
// formula (speed grows with the interval, V_max below I_min); Inverted makes
// the mapping monotone (shorter interval, faster walk).
enum class SpeedMapping { AsWritten, Inverted };

struct LocomotionConfig {
  double i_min = 0.25;  // s
  double i_max = 1.0;   // s
  double v_min = 0.6;   // m/s
  double v_max = 2.0;   // m/s
  double k_jog = 2.0;
  double jump_impulse_forward = 1.5;  // N s
  double jump_impulse_up = 4.0;       // N s
  double peak_prominence = 0.005;     // m
  double peak_min_separation = 0.15;  // s
  std::size_t smoothing_width = 5;    // frames
  SpeedMapping speed_mapping = SpeedMapping::AsWritten;

  void validate() const;
};

enum class Posture { Upright, Squatting };

struct HeightPeak {
  double time = 0;
  double height = 0;
};

struct ControllerState {
  double forward_direction = 0;  // deg in [0, 360)
  bool direction_reversed = false;
  Posture posture = Posture::Upright;
  bool airborne = false;
  double current_velocity = 0;
  std::deque<std::pair<double, double>> hmd_height_buffer;  // (t, raw height)
  std::optional<HeightPeak> last_max_peak;
  std::optional<HeightPeak> last_min_peak;

  // zig-zag detector on the smoothed series
  int trend = 0;  // +1 looking for a maximum, -1 for a minimum, 0 undecided
  std::optional<HeightPeak> candidate_max;
  std::optional<HeightPeak> candidate_min;
  std::optional<double> last_time;

  // standing head height (running mean / variance) for the landing test
  std::size_t baseline_n = 0;
  double baseline_mean = 0;
  double baseline_m2 = 0;
  bool left_ground = false;
  std::optional<Gesture> last_gesture;
};

enum class CommandKind { SetVelocity, Jump, SetPosture, SetDirection, Stop };

struct AvatarCommand {
  CommandKind kind = CommandKind::Stop;
  double timestamp = 0;
  double velocity = 0;       // SetVelocity
  double direction = 0;      // SetDirection, deg
  Posture posture = Posture::Upright;  // SetPosture
  double impulse_forward = 0;  // Jump
  double impulse_up = 0;       // Jump

  nlohmann::json to_json() const;
};

std::string to_string(CommandKind k);
std::string to_string(Posture p);
SpeedMapping parse_speed_mapping(const std::string& s);

// Circular mean of the two yaws, plus 180 deg while reversed.
double update_direction(ControllerState& state, double left_yaw, double right_yaw);

// Feeds one head-height sample; returns |t_max - t_min| of the latest
// confirmed maximum and minimum once both exist and are at least
// peak_min_separation apart. Throws on a non-increasing timestamp.
std::optional<double> detect_t_step(ControllerState& state, double t, double height,
                                    const LocomotionConfig& cfg);

// Throw std::invalid_argument when t_step <= 0.
double walking_velocity(double t_step, const LocomotionConfig& cfg);
double jogging_velocity(double t_step, const LocomotionConfig& cfg);

std::vector<AvatarCommand> on_gesture(ControllerState& state, Gesture gesture,
                                      const LocomotionConfig& cfg, double timestamp = 0);

// Clears the airborne latch once the head is back within 2 sigma of the
// standing height after having left that band; also learns the standing
// height while the last gesture was standing.
void update_landing(ControllerState& state, double height);

// Single-owner driver combining the operations above.
class LocomotionController {
 public:
  explicit LocomotionController(LocomotionConfig cfg = {});

  // Call at 30 Hz with the raw tracker readings.
  void on_frame(double t, double hmd_height, double left_yaw, double right_yaw);
  // Call with each classified window; returns (and logs) the commands.
  std::vector<AvatarCommand> on_prediction(Gesture g, double t);

  const ControllerState& state() const { return state_; }
  const LocomotionConfig& config() const { return cfg_; }
  const std::vector<AvatarCommand>& log() const { return log_; }
  std::optional<double> t_step() const { return t_step_; }

 private:
  LocomotionConfig cfg_;
  ControllerState state_;
  std::optional<double> t_step_;
  std::vector<AvatarCommand> log_;
};

}  // namespace wip
