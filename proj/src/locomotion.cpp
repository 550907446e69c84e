#include "wip/locomotion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace wip {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double wrap360(double a) {
  double w = std::fmod(a, 360.0);
  if (w < 0) w += 360.0;
  return (w >= 360.0 || w == 0.0) ? 0.0 : w;
}

void check_t_step(double t_step) {
  if (!(t_step > 0)) throw std::invalid_argument("t_step must be positive");
}

void reset_peaks(ControllerState& s) {
  s.hmd_height_buffer.clear();
  s.last_max_peak.reset();
  s.last_min_peak.reset();
  s.candidate_max.reset();
  s.candidate_min.reset();
  s.trend = 0;
}

}  // namespace

void LocomotionConfig::validate() const {
  if (!(i_min > 0 && i_min < i_max)) throw std::invalid_argument("need 0 < I_min < I_max");
  if (!(v_min >= 0 && v_min < v_max)) throw std::invalid_argument("need 0 <= V_min < V_max");
  if (!(k_jog > 1)) throw std::invalid_argument("k_jog must be greater than 1");
  if (!(peak_prominence > 0)) throw std::invalid_argument("peak_prominence must be positive");
  if (!(peak_min_separation >= 0)) {
    throw std::invalid_argument("peak_min_separation must be >= 0");
  }
  if (smoothing_width < 1) throw std::invalid_argument("smoothing_width must be >= 1");
}

std::string to_string(CommandKind k) {
  switch (k) {
    case CommandKind::SetVelocity: return "set_velocity";
    case CommandKind::Jump: return "jump";
    case CommandKind::SetPosture: return "set_posture";
    case CommandKind::SetDirection: return "set_direction";
    case CommandKind::Stop: return "stop";
  }
  return "?";
}

std::string to_string(Posture p) { return p == Posture::Upright ? "upright" : "squatting"; }

SpeedMapping parse_speed_mapping(const std::string& s) {
  if (s == "as-written") return SpeedMapping::AsWritten;
  if (s == "inverted") return SpeedMapping::Inverted;
  throw std::invalid_argument("speed mapping must be as-written or inverted, got '" + s + "'");
}

nlohmann::json AvatarCommand::to_json() const {
  nlohmann::json j = {{"t", timestamp}, {"kind", wip::to_string(kind)}};
  switch (kind) {
    case CommandKind::SetVelocity: j["velocity"] = velocity; break;
    case CommandKind::Jump: j["impulse"] = {impulse_forward, impulse_up}; break;
    case CommandKind::SetPosture: j["posture"] = wip::to_string(posture); break;
    case CommandKind::SetDirection: j["direction"] = direction; break;
    case CommandKind::Stop: j["velocity"] = 0.0; break;
  }
  return j;
}

double update_direction(ControllerState& state, double left_yaw, double right_yaw) {
  if (!std::isfinite(left_yaw) || !std::isfinite(right_yaw)) {
    throw std::invalid_argument("update_direction: yaw must be finite");
  }
  const double x = std::cos(left_yaw * kDeg) + std::cos(right_yaw * kDeg);
  const double y = std::sin(left_yaw * kDeg) + std::sin(right_yaw * kDeg);
  // opposite yaws have no mean; keep the previous heading
  double mean = state.direction_reversed ? state.forward_direction - 180.0 : state.forward_direction;
  if (std::hypot(x, y) > 1e-9) mean = std::atan2(y, x) / kDeg;
  // round-off guard so that e.g. (350, 10) reports exactly 0
  mean = std::round(mean * 1e9) / 1e9;
  state.forward_direction = wrap360(mean + (state.direction_reversed ? 180.0 : 0.0));
  return state.forward_direction;
}

std::optional<double> detect_t_step(ControllerState& s, double t, double height,
                                    const LocomotionConfig& cfg) {
  if (s.last_time && !(t > *s.last_time)) {
    throw std::invalid_argument("detect_t_step: timestamps must increase");
  }
  s.last_time = t;
  s.hmd_height_buffer.emplace_back(t, height);
  while (s.hmd_height_buffer.size() > cfg.smoothing_width) s.hmd_height_buffer.pop_front();

  if (s.hmd_height_buffer.size() == cfg.smoothing_width) {
    double sum = 0;
    for (const auto& [bt, bh] : s.hmd_height_buffer) sum += bh;
    const HeightPeak p{t, sum / static_cast<double>(cfg.smoothing_width)};
    const double d = cfg.peak_prominence;
    if (!s.candidate_max || p.height > s.candidate_max->height) {
      if (s.trend >= 0) s.candidate_max = p;
    }
    if (!s.candidate_min || p.height < s.candidate_min->height) {
      if (s.trend <= 0) s.candidate_min = p;
    }
    if (s.trend >= 0 && s.candidate_max && p.height <= s.candidate_max->height - d) {
      s.last_max_peak = s.candidate_max;
      s.trend = -1;
      s.candidate_min = p;
      s.candidate_max.reset();
    } else if (s.trend <= 0 && s.candidate_min && p.height >= s.candidate_min->height + d) {
      s.last_min_peak = s.candidate_min;
      s.trend = 1;
      s.candidate_max = p;
      s.candidate_min.reset();
    }
  }

  if (!s.last_max_peak || !s.last_min_peak) return std::nullopt;
  const double dt = std::abs(s.last_max_peak->time - s.last_min_peak->time);
  if (dt < cfg.peak_min_separation) return std::nullopt;
  return dt;
}

double walking_velocity(double t_step, const LocomotionConfig& c) {
  check_t_step(t_step);
  if (t_step < c.i_min) return c.v_max;
  const double t = std::min(t_step, c.i_max);
  const double span = c.v_max - c.v_min;
  if (c.speed_mapping == SpeedMapping::AsWritten) {
    return (t - c.i_min) / (c.i_max - c.i_min) * span + c.v_min;
  }
  return (c.i_max - t) / (c.i_max - c.i_min) * span + c.v_min;
}

double jogging_velocity(double t_step, const LocomotionConfig& c) {
  return std::min(c.k_jog * walking_velocity(t_step, c), c.k_jog * c.v_max);
}

void update_landing(ControllerState& s, double height) {
  if (s.last_gesture == Gesture::Standing && !s.airborne) {
    ++s.baseline_n;
    const double delta = height - s.baseline_mean;
    s.baseline_mean += delta / static_cast<double>(s.baseline_n);
    s.baseline_m2 += delta * (height - s.baseline_mean);
  }
  if (!s.airborne || s.baseline_n == 0) return;
  const double var = s.baseline_n > 1 ? s.baseline_m2 / static_cast<double>(s.baseline_n - 1) : 0.0;
  const double band = 2.0 * std::max(std::sqrt(var), 0.005);
  const bool inside = std::abs(height - s.baseline_mean) <= band;
  if (!inside) {
    s.left_ground = true;
  } else if (s.left_ground) {
    s.airborne = false;
    s.left_ground = false;
  }
}

std::vector<AvatarCommand> on_gesture(ControllerState& s, Gesture g, const LocomotionConfig& cfg,
                                      double timestamp) {
  if (index_of(g) >= kNumGestures) throw std::invalid_argument("on_gesture: unknown gesture");
  std::vector<AvatarCommand> out;
  auto cmd = [&](CommandKind k) {
    AvatarCommand c;
    c.kind = k;
    c.timestamp = timestamp;
    return c;
  };
  auto set_direction = [&](bool reversed) {
    if (s.direction_reversed != reversed) {
      s.forward_direction = wrap360(s.forward_direction + 180.0);
    }
    s.direction_reversed = reversed;
    AvatarCommand c = cmd(CommandKind::SetDirection);
    c.direction = s.forward_direction;
    out.push_back(c);
  };
  auto set_velocity = [&](double v) {
    s.current_velocity = v;
    AvatarCommand c = cmd(CommandKind::SetVelocity);
    c.velocity = v;
    out.push_back(c);
  };
  auto set_posture = [&](Posture p) {
    s.posture = p;
    AvatarCommand c = cmd(CommandKind::SetPosture);
    c.posture = p;
    out.push_back(c);
  };

  // a jump latch only survives a run of jumping predictions
  if (g != Gesture::Jumping) {
    s.airborne = false;
    s.left_ground = false;
  }

  std::optional<double> t_step;
  if (s.last_max_peak && s.last_min_peak) {
    const double dt = std::abs(s.last_max_peak->time - s.last_min_peak->time);
    if (dt >= cfg.peak_min_separation && dt > 0) t_step = dt;
  }

  switch (g) {
    case Gesture::Standing:
      s.current_velocity = 0;
      reset_peaks(s);
      out.push_back(cmd(CommandKind::Stop));
      break;
    case Gesture::Walking:
      set_velocity(t_step ? walking_velocity(*t_step, cfg) : cfg.v_min);
      break;
    case Gesture::Jogging:
      set_velocity(t_step ? jogging_velocity(*t_step, cfg) : cfg.k_jog * cfg.v_min);
      break;
    case Gesture::Jumping:
      if (!s.airborne) {
        s.airborne = true;
        s.left_ground = false;
        AvatarCommand c = cmd(CommandKind::Jump);
        c.impulse_forward = cfg.jump_impulse_forward;
        c.impulse_up = cfg.jump_impulse_up;
        out.push_back(c);
      }
      break;
    case Gesture::SquatDown:
    case Gesture::SquatKeep:
      set_posture(Posture::Squatting);
      break;
    case Gesture::SquatUp:
      set_posture(Posture::Upright);
      break;
    case Gesture::StepForward:
      set_direction(false);
      break;
    case Gesture::StepBackward:
      set_direction(true);
      break;
  }
  s.last_gesture = g;
  return out;
}

LocomotionController::LocomotionController(LocomotionConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void LocomotionController::on_frame(double t, double hmd_height, double left_yaw,
                                    double right_yaw) {
  update_direction(state_, left_yaw, right_yaw);
  t_step_ = detect_t_step(state_, t, hmd_height, cfg_);
  update_landing(state_, hmd_height);
}

std::vector<AvatarCommand> LocomotionController::on_prediction(Gesture g, double t) {
  auto cmds = on_gesture(state_, g, cfg_, t);
  if (g == Gesture::Standing) t_step_.reset();
  log_.insert(log_.end(), cmds.begin(), cmds.end());
  return cmds;
}

}  // namespace wip
