#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "wip/locomotion.hpp"

using namespace wip;

namespace {

constexpr double kPi = std::numbers::pi;

// unit-vector sum, mapped to [0, 360)
double circular_mean_oracle(double a, double b) {
  const double x = std::cos(a * kPi / 180) + std::cos(b * kPi / 180);
  const double y = std::sin(a * kPi / 180) + std::sin(b * kPi / 180);
  double m = std::atan2(y, x) * 180 / kPi;
  if (m < 0) m += 360;
  return m;
}

double angle_gap(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

std::optional<double> run_sinusoid(double amplitude, double freq_hz, double seconds,
                                   double phase = 0) {
  ControllerState s;
  LocomotionConfig cfg;
  std::optional<double> last;
  const int n = static_cast<int>(seconds * 30);
  for (int i = 0; i < n; ++i) {
    const double t = i / 30.0;
    last = detect_t_step(s, t, 1.6 + amplitude * std::sin(2 * kPi * freq_hz * t + phase), cfg);
  }
  return last;
}

bool has(const std::vector<AvatarCommand>& cmds, CommandKind k) {
  for (const auto& c : cmds) {
    if (c.kind == k) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("direction: circular mean of the thigh yaws") {
  ControllerState s;
  CHECK(update_direction(s, 10, 20) == doctest::Approx(15));
  CHECK(update_direction(s, 350, 10) == 0.0);
  CHECK(update_direction(s, 90, 90) == doctest::Approx(90));
  CHECK(update_direction(s, -170, 170) == doctest::Approx(180));
  CHECK_THROWS(update_direction(s, NAN, 0));
}

TEST_CASE("direction: random pairs agree with the unit-vector oracle") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-180, 180);
  for (int i = 0; i < 500; ++i) {
    const double a = u(rng), b = u(rng);
    if (angle_gap(a, b) > 179) continue;  // no mean for opposite yaws
    ControllerState s;
    const double got = update_direction(s, a, b);
    CHECK(got >= 0.0);
    CHECK(got < 360.0);
    CHECK(angle_gap(got, circular_mean_oracle(a, b)) < 1e-6);
  }
}

TEST_CASE("direction: reversal adds 180 degrees") {
  ControllerState s;
  LocomotionConfig cfg;
  on_gesture(s, Gesture::StepBackward, cfg);
  CHECK(s.direction_reversed);
  CHECK(update_direction(s, 30, 50) == doctest::Approx(220));
  on_gesture(s, Gesture::StepForward, cfg);
  CHECK_FALSE(s.direction_reversed);
  CHECK(update_direction(s, 30, 50) == doctest::Approx(40));
}

TEST_CASE("gestures map to commands") {
  ControllerState s;
  LocomotionConfig cfg;
  auto stop = on_gesture(s, Gesture::Standing, cfg);
  REQUIRE(stop.size() == 1);
  CHECK(stop[0].kind == CommandKind::Stop);
  CHECK(s.current_velocity == 0.0);

  auto back = on_gesture(s, Gesture::StepBackward, cfg);
  CHECK(has(back, CommandKind::SetDirection));
  CHECK(s.direction_reversed);
  on_gesture(s, Gesture::StepForward, cfg);
  CHECK_FALSE(s.direction_reversed);

  on_gesture(s, Gesture::SquatDown, cfg);
  CHECK(s.posture == Posture::Squatting);
  on_gesture(s, Gesture::SquatKeep, cfg);
  CHECK(s.posture == Posture::Squatting);
  on_gesture(s, Gesture::SquatUp, cfg);
  CHECK(s.posture == Posture::Upright);

  // no step interval yet: walking starts at V_min, jogging at k V_min
  on_gesture(s, Gesture::Walking, cfg);
  CHECK(s.current_velocity == cfg.v_min);
  on_gesture(s, Gesture::Jogging, cfg);
  CHECK(s.current_velocity == cfg.k_jog * cfg.v_min);
}

TEST_CASE("jump: one impulse per jump, re-armed by landing or another gesture") {
  ControllerState s;
  LocomotionConfig cfg;
  on_gesture(s, Gesture::Standing, cfg);
  for (int i = 0; i < 10; ++i) update_landing(s, 1.6 + (i % 2 ? 0.001 : -0.001));
  auto first = on_gesture(s, Gesture::Jumping, cfg);
  REQUIRE(first.size() == 1);
  CHECK(first[0].kind == CommandKind::Jump);
  CHECK(first[0].impulse_forward == cfg.jump_impulse_forward);
  CHECK(first[0].impulse_up == cfg.jump_impulse_up);
  CHECK(on_gesture(s, Gesture::Jumping, cfg).empty());
  update_landing(s, 1.6);  // still on the ground
  CHECK(s.airborne);
  update_landing(s, 1.9);
  CHECK(s.airborne);
  update_landing(s, 1.6);
  CHECK_FALSE(s.airborne);
  CHECK(has(on_gesture(s, Gesture::Jumping, cfg), CommandKind::Jump));
  on_gesture(s, Gesture::Walking, cfg);
  CHECK(has(on_gesture(s, Gesture::Jumping, cfg), CommandKind::Jump));
}

TEST_CASE("t_step: 2 Hz sinusoid gives a quarter second within one frame") {
  const auto t = run_sinusoid(0.02, 2.0, 3.0);
  REQUIRE(t.has_value());
  CHECK(std::abs(*t - 0.25) <= 1.0 / 30.0 + 1e-12);
}

TEST_CASE("t_step: half period across frequencies and phases") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> f(0.6, 2.5), ph(0, 2 * kPi);
  for (int i = 0; i < 40; ++i) {
    const double hz = f(rng);
    const auto t = run_sinusoid(0.03, hz, 4.0, ph(rng));
    REQUIRE(t.has_value());
    CHECK(std::abs(*t - 0.5 / hz) <= 1.0 / 30.0 + 1e-12);
  }
}

TEST_CASE("t_step: flat or sub-threshold signals give none") {
  CHECK_FALSE(run_sinusoid(0.0, 2.0, 3.0).has_value());
  CHECK_FALSE(run_sinusoid(0.002, 2.0, 3.0).has_value());
  ControllerState s;
  LocomotionConfig cfg;
  detect_t_step(s, 1.0, 1.6, cfg);
  CHECK_THROWS(detect_t_step(s, 1.0, 1.6, cfg));
}

TEST_CASE("walking velocity endpoints") {
  LocomotionConfig cfg;
  CHECK(walking_velocity(cfg.i_min, cfg) == cfg.v_min);
  CHECK(walking_velocity(cfg.i_min * 0.5, cfg) == cfg.v_max);
  CHECK(walking_velocity(cfg.i_max, cfg) == cfg.v_max);
  CHECK(walking_velocity(cfg.i_max * 3, cfg) == cfg.v_max);
  CHECK_THROWS(walking_velocity(0.0, cfg));
  cfg.speed_mapping = SpeedMapping::Inverted;
  CHECK(walking_velocity(cfg.i_min, cfg) == cfg.v_max);
  CHECK(walking_velocity(cfg.i_max, cfg) == cfg.v_min);
}

TEST_CASE("walking velocity stays in [V_min, V_max]") {
  LocomotionConfig cfg;
  for (double t = 0.01; t < 2.0; t += 0.01) {
    const double v = walking_velocity(t, cfg);
    CHECK(v >= cfg.v_min);
    CHECK(v <= cfg.v_max);
    CHECK(jogging_velocity(t, cfg) >= v);
  }
}

TEST_CASE("jogging is k times walking") {
  LocomotionConfig cfg;
  // as written: (t - I_min) / (I_max - I_min) * (V_max - V_min) + V_min = 1.0
  const double t = cfg.i_min + (1.0 - cfg.v_min) / (cfg.v_max - cfg.v_min) * (cfg.i_max - cfg.i_min);
  REQUIRE(walking_velocity(t, cfg) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(jogging_velocity(t, cfg) == doctest::Approx(2.0).epsilon(1e-12));
  cfg.k_jog = 1.0;
  CHECK_THROWS(cfg.validate());
  cfg.k_jog = 2.0;
  cfg.i_min = 2.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("controller: walking speed follows the head bob, standing resets it") {
  LocomotionController ctl;
  ctl.on_prediction(Gesture::Walking, 0.0);
  for (int i = 0; i < 90; ++i) {
    const double t = i / 30.0;
    ctl.on_frame(t, 1.6 + 0.02 * std::sin(2 * kPi * 1.0 * t), 5, 15);
  }
  REQUIRE(ctl.t_step().has_value());
  CHECK(std::abs(*ctl.t_step() - 0.5) <= 1.0 / 30.0 + 1e-12);
  const auto cmds = ctl.on_prediction(Gesture::Walking, 3.0);
  REQUIRE(cmds.size() == 1);
  CHECK(cmds[0].velocity == doctest::Approx(walking_velocity(*ctl.t_step(), ctl.config())));
  CHECK(ctl.state().forward_direction == doctest::Approx(10));
  ctl.on_prediction(Gesture::Standing, 3.1);
  CHECK_FALSE(ctl.t_step().has_value());
  CHECK(ctl.state().current_velocity == 0.0);
  CHECK(ctl.log().size() == 3);
  CHECK(ctl.log().back().to_json().at("kind") == "stop");
}
