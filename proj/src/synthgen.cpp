#include "wip/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace wip {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kGravity = 9.81;

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

double smoothstep(double u) {
  u = clamp01(u);
  return u * u * (3.0 - 2.0 * u);
}

// Fade oscillations in and out over the first/last 0.1 s of a segment.
double envelope(double tau, double duration) {
  constexpr double ramp = 0.1;
  const double r = std::min(ramp, duration / 2.0);
  if (r <= 0) return 1.0;
  return clamp01(std::min(tau, duration - tau) / r);
}

// Horizontal unit vectors for a heading (deg) under a right-handed rotation
// about +y: forward(0) = +z, right(0) = +x.
Vec3 forward_of(double heading_deg) {
  const double h = heading_deg * kPi / 180.0;
  return {std::sin(h), 0.0, std::cos(h)};
}
Vec3 right_of(double heading_deg) {
  const double h = heading_deg * kPi / 180.0;
  return {std::cos(h), 0.0, -std::sin(h)};
}

Vec3 add(Vec3 a, const Vec3& b, double s = 1.0) {
  for (int i = 0; i < 3; ++i) a[i] += s * b[i];
  return a;
}

// Noise-free pose of the three devices; rotations are unwrapped degrees.
struct Pose {
  std::array<Vec3, kNumDevices> position{};
  std::array<Vec3, kNumDevices> rotation{};
};

// Everything about one script segment that is fixed before sampling.
struct SegmentPlan {
  Gesture gesture = Gesture::Standing;
  long first_frame = 0;
  long end_frame = 0;
  double duration = 0.0;
  double frequency = 0.0;
  double phase = 0.0;
  double amplitude = 1.0;
  double squat_from = 0.0;
  double squat_to = 0.0;
  Vec3 base_from{};
  Vec3 base_to{};
  double jump_height = 0.25;
};

class Kinematics {
 public:
  Kinematics(const SubjectProfile& profile, double heading0, double drift_phase,
             Vec3 origin)
      : p_(profile), heading0_(heading0), drift_phase_(drift_phase),
        origin_(origin) {
    squat_depth_ = 0.3 + 0.2 * clamp01(p_.amplitude_scale - 0.5);
  }

  double squat_depth() const { return squat_depth_; }

  double heading(double t) const {
    return heading0_ + 3.0 * std::sin(2.0 * kPi * 0.05 * t + drift_phase_);
  }

  Pose pose(const SegmentPlan& s, double t) const {
    const double tau = t - static_cast<double>(s.first_frame) / kSampleRate;
    const double u = s.duration > 0 ? clamp01(tau / s.duration) : 1.0;
    const double psi = heading(t);
    const Vec3 fwd = forward_of(psi);
    const Vec3 right = right_of(psi);
    const double a = s.amplitude;

    double squat = s.squat_from;
    Vec3 base = s.base_from;
    std::array<double, kNumDevices> dy{};     // vertical offsets
    std::array<double, kNumDevices> dfwd{};   // offsets along heading
    std::array<double, kNumDevices> pitch{};  // extra pitch (deg)
    double head_roll = 0.0;

    switch (s.gesture) {
      case Gesture::Standing:
        break;
      case Gesture::Walking:
      case Gesture::Jogging: {
        const double k = s.gesture == Gesture::Jogging ? 2.0 : 1.0;
        const double env = envelope(tau, s.duration);
        const double ph = 2.0 * kPi * s.frequency * tau + s.phase;
        const double sl = std::sin(ph);
        pitch[1] = env * k * 22.0 * a * sl;
        pitch[2] = -env * k * 22.0 * a * sl;
        dy[1] = env * k * 0.035 * a * sl;
        dy[2] = -env * k * 0.035 * a * sl;
        dfwd[1] = env * k * 0.05 * a * sl;
        dfwd[2] = -env * k * 0.05 * a * sl;
        dy[0] = env * k * 0.02 * a * std::sin(ph - kPi / 2.0);
        pitch[0] = env * k * 1.5 * std::sin(ph);
        head_roll = env * k * 2.0 * a * sl;
        break;
      }
      case Gesture::Jumping: {
        const double v0 = std::sqrt(2.0 * kGravity * s.jump_height);
        const double flight = 2.0 * v0 / kGravity;
        constexpr double crouch = 0.25, land = 0.2;
        const double cycle = crouch + flight + land;
        const int n_jumps = std::max(1, static_cast<int>(s.duration / cycle));
        const double slot = s.duration / n_jumps;
        const double c = std::fmod(std::max(tau, 0.0), slot);
        double y = 0.0, bend = 0.0;
        if (c < crouch) {
          bend = std::sin(kPi * c / crouch);
          y = -0.06 * a * bend;
        } else if (c < crouch + flight) {
          const double f = c - crouch;
          y = v0 * f - 0.5 * kGravity * f * f;
        } else if (c < cycle) {
          bend = std::sin(kPi * (c - crouch - flight) / land);
          y = -0.05 * a * bend;
        }
        for (auto& v : dy) v = y;
        dy[1] = dy[2] = y * 0.95;
        pitch[1] = pitch[2] = 25.0 * bend;
        pitch[0] = -4.0 * bend;
        break;
      }
      case Gesture::SquatDown:
      case Gesture::SquatUp: {
        const double shape = 0.8 * u + 0.2 * (1.0 - std::cos(kPi * u)) / 2.0;
        squat = s.squat_from + (s.squat_to - s.squat_from) * shape;
        break;
      }
      case Gesture::SquatKeep:
        squat = s.squat_to;
        break;
      case Gesture::StepForward:
      case Gesture::StepBackward: {
        const double w = smoothstep(u);
        for (int i = 0; i < 3; ++i)
          base[i] = s.base_from[i] + (s.base_to[i] - s.base_from[i]) * w;
        const double lift = std::sin(kPi * u);
        const bool fwd_step = s.gesture == Gesture::StepForward;
        const std::size_t leg = fwd_step ? 2 : 1;
        pitch[leg] = (fwd_step ? 35.0 : -20.0) * a * lift;
        dy[leg] = 0.05 * a * lift;
        dfwd[leg] = (fwd_step ? 0.08 : -0.08) * a * lift;
        dy[0] = -0.015 * a * lift;
        pitch[0] = (fwd_step ? 3.0 : -3.0) * lift;
        break;
      }
    }

    const double h = p_.standing_head_height;
    const double drop = squat * squat_depth_;
    Pose out;
    const Vec3 root = add(origin_, base);
    // HMD
    out.position[0] = add(root, Vec3{0.0, h - drop + dy[0], 0.0});
    out.position[0] = add(out.position[0], fwd, 0.03 * squat + dfwd[0]);
    out.rotation[0] = {8.0 * squat + pitch[0], psi, head_roll};
    // Thigh trackers (front of left / right thigh)
    for (std::size_t d = 1; d <= 2; ++d) {
      const double side = d == 1 ? -1.0 : 1.0;
      Vec3 p = add(root, right, side * 0.1);
      p = add(p, fwd, 0.08 + 0.15 * squat + dfwd[d]);
      p[1] += 0.5 * h - 0.5 * drop + dy[d];
      out.position[d] = p;
      out.rotation[d] = {10.0 + 60.0 * squat + pitch[d], psi + side * 4.0,
                         side * 2.0};
    }
    return out;
  }

 private:
  SubjectProfile p_;
  double heading0_;
  double drift_phase_;
  Vec3 origin_;
  double squat_depth_ = 0.4;
};

void validate_script(const GestureScript& script) {
  if (script.segments.empty()) {
    throw std::invalid_argument("gesture script is empty");
  }
  for (const auto& seg : script.segments) {
    if (!gesture_from_index(static_cast<long>(seg.gesture))) {
      throw std::invalid_argument("gesture script contains an unknown label");
    }
    if (!(seg.duration > 0.0) || !std::isfinite(seg.duration)) {
      throw std::invalid_argument("gesture script durations must be positive");
    }
  }
}

double truncated_normal(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0) return 0.0;
  std::normal_distribution<double> n(0.0, sigma);
  return std::clamp(n(rng), -3.0 * sigma, 3.0 * sigma);
}

}  // namespace

std::array<double, kFeaturesPerDevice> DeviceSample::features() const {
  std::array<double, kFeaturesPerDevice> f{};
  for (int i = 0; i < 3; ++i) {
    f[i] = position[i];
    f[3 + i] = velocity[i];
    f[6 + i] = rotation[i];
    f[9 + i] = angular_velocity[i];
  }
  return f;
}

DeviceSample DeviceSample::from_features(const double* f) {
  DeviceSample d;
  for (int i = 0; i < 3; ++i) {
    d.position[i] = f[i];
    d.velocity[i] = f[3 + i];
    d.rotation[i] = f[6 + i];
    d.angular_velocity[i] = f[9 + i];
  }
  return d;
}

std::array<double, kFrameFeatures> Frame::features() const {
  std::array<double, kFrameFeatures> out{};
  for (std::size_t d = 0; d < kNumDevices; ++d) {
    const auto f = devices[d].features();
    std::copy(f.begin(), f.end(), out.begin() + d * kFeaturesPerDevice);
  }
  return out;
}

double GestureScript::total_duration() const {
  double t = 0;
  for (const auto& s : segments) t += s.duration;
  return t;
}

GestureScript GestureScript::default_script() {
  // Durations are whole multiples of 3 frames so that, with the default
  // 6-frame / 3-frame windowing, a segment of n frames yields n/3 windows.
  using G = Gesture;
  auto f = [](int frames) { return frames / kSampleRate; };
  GestureScript s;
  s.segments = {
      {G::Standing, f(63)},    {G::Walking, f(84)},       {G::Standing, f(21)},
      {G::Jogging, f(75)},     {G::Standing, f(21)},      {G::Jumping, f(54)},
      {G::Standing, f(21)},    {G::SquatDown, f(24)},     {G::SquatKeep, f(12)},
      {G::SquatUp, f(24)},     {G::Standing, f(21)},      {G::StepForward, f(21)},
      {G::Standing, f(21)},    {G::StepBackward, f(21)},  {G::Standing, f(21)},
      {G::Walking, f(81)},     {G::Standing, f(21)},      {G::Jogging, f(75)},
      {G::Standing, f(21)},    {G::Jumping, f(54)},       {G::Standing, f(21)},
      {G::SquatDown, f(24)},   {G::SquatKeep, f(9)},      {G::SquatUp, f(21)},
      {G::Standing, f(21)},    {G::StepForward, f(21)},   {G::Standing, f(15)},
      {G::StepBackward, f(18)},
  };
  return s;
}

GestureScript GestureScript::parse(const std::string& text) {
  GestureScript s;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string label;
    if (!(ls >> label)) continue;
    double duration = 0;
    if (!(ls >> duration)) {
      throw std::invalid_argument("script line " + std::to_string(line_no) +
                                  ": expected '<label> <seconds>'");
    }
    s.segments.push_back({gesture_from_name(label), duration});
  }
  validate_script(s);
  return s;
}

std::string GestureScript::to_text() const {
  std::ostringstream out;
  out.precision(17);
  for (const auto& seg : segments)
    out << name_of(seg.gesture) << ' ' << seg.duration << '\n';
  return out.str();
}

SubjectProfile sample_subject(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x5u));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  SubjectProfile p;
  p.subject_id = "subject-" + std::to_string(seed);
  p.standing_head_height = uniform(1.50, 1.90);
  p.amplitude_scale = uniform(0.70, 1.30);
  p.frequency_pref = uniform(1.50, 2.20);
  p.phase_jitter = uniform(0.0, 0.4);
  p.noise_sigma = uniform(0.001, 0.003);
  p.step_length = uniform(0.25, 0.45);
  return p;
}

Recording generate_recording(const SubjectProfile& profile,
                             const GestureScript& script, std::uint64_t seed) {
  validate_script(script);
  std::mt19937_64 rng(mix_seed(seed, 0x7u));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

  const double heading0 = uniform(-10.0, 10.0);
  const double drift_phase = uniform(0.0, 2.0 * kPi);
  const Vec3 origin{uniform(-0.2, 0.2), 0.0, uniform(-0.2, 0.2)};
  Kinematics kin(profile, heading0, drift_phase, origin);

  // Jogging cadence maps the walking range [1.5, 2.2] Hz onto [2.4, 3.2] Hz.
  const double jog_frequency =
      2.4 + 0.8 * clamp01((profile.frequency_pref - 1.5) / 0.7);
  const double apex = 0.15 + 0.2 * clamp01(profile.amplitude_scale - 0.5);

  std::vector<SegmentPlan> plans;
  double cumulative = 0.0;
  double squat_level = 0.0;
  Vec3 base{};
  for (const auto& seg : script.segments) {
    SegmentPlan p;
    p.gesture = seg.gesture;
    p.first_frame = std::lround(cumulative * kSampleRate);
    cumulative += seg.duration;
    p.end_frame = std::lround(cumulative * kSampleRate);
    p.duration = seg.duration;
    p.amplitude = profile.amplitude_scale * uniform(0.95, 1.05);
    p.phase = uniform(-profile.phase_jitter, profile.phase_jitter);
    p.frequency = (seg.gesture == Gesture::Jogging ? jog_frequency
                                                   : profile.frequency_pref) *
                  uniform(0.97, 1.03);
    p.jump_height = std::clamp(apex + uniform(-0.02, 0.02), 0.15, 0.35);
    p.squat_from = squat_level;
    if (seg.gesture == Gesture::SquatDown || seg.gesture == Gesture::SquatKeep) {
      squat_level = 1.0;
    } else if (seg.gesture == Gesture::SquatUp) {
      squat_level = 0.0;
    }
    p.squat_to = squat_level;
    p.base_from = base;
    if (seg.gesture == Gesture::StepForward ||
        seg.gesture == Gesture::StepBackward) {
      // Steps are taken along the segment-start heading.
      const double sign = seg.gesture == Gesture::StepForward ? 1.0 : -1.0;
      const double t0 = static_cast<double>(p.first_frame) / kSampleRate;
      base = add(base, forward_of(kin.heading(t0)), sign * profile.step_length);
    }
    p.base_to = base;
    plans.push_back(p);
  }

  const long n_frames = std::lround(script.total_duration() * kSampleRate);
  if (n_frames <= 0) {
    throw std::invalid_argument("gesture script is shorter than one frame");
  }
  const double rot_sigma = 100.0 * profile.noise_sigma;  // degrees

  // Noisy poses for frames -1 .. n-1; frame -1 seeds the first derivative.
  std::vector<Pose> poses;
  std::vector<std::size_t> segment_of;
  poses.reserve(static_cast<std::size_t>(n_frames + 1));
  std::size_t seg_idx = 0;
  for (long i = -1; i < n_frames; ++i) {
    while (seg_idx + 1 < plans.size() && i >= plans[seg_idx].end_frame) ++seg_idx;
    const double t = static_cast<double>(i) / kSampleRate;
    Pose pose = kin.pose(plans[seg_idx], t);
    for (std::size_t d = 0; d < kNumDevices; ++d) {
      for (int c = 0; c < 3; ++c) {
        pose.position[d][c] += truncated_normal(rng, profile.noise_sigma);
        pose.rotation[d][c] += truncated_normal(rng, rot_sigma);
      }
    }
    poses.push_back(pose);
    segment_of.push_back(seg_idx);
  }

  Recording rec;
  rec.reserve(static_cast<std::size_t>(n_frames));
  for (long i = 0; i < n_frames; ++i) {
    const Pose& prev = poses[static_cast<std::size_t>(i)];
    const Pose& cur = poses[static_cast<std::size_t>(i + 1)];
    LabeledFrame lf;
    lf.frame.timestamp = static_cast<double>(i) / kSampleRate;
    lf.label = plans[segment_of[static_cast<std::size_t>(i + 1)]].gesture;
    for (std::size_t d = 0; d < kNumDevices; ++d) {
      DeviceSample& s = lf.frame.devices[d];
      for (int c = 0; c < 3; ++c) {
        s.position[c] = cur.position[d][c];
        s.velocity[c] = (cur.position[d][c] - prev.position[d][c]) * kSampleRate;
        s.rotation[c] = wrap_degrees(cur.rotation[d][c]);
        s.angular_velocity[c] =
            (cur.rotation[d][c] - prev.rotation[d][c]) * kSampleRate;
      }
    }
    rec.push_back(lf);
  }
  return rec;
}

std::vector<SubjectRecording> generate_dataset(int n_subjects,
                                               const GestureScript& script,
                                               std::uint64_t seed) {
  if (n_subjects < 2) {
    throw std::invalid_argument(
        "at least 2 subjects are required for leave-one-subject-out splits");
  }
  validate_script(script);
  std::vector<SubjectRecording> out(static_cast<std::size_t>(n_subjects));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_subjects; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    SubjectProfile p = sample_subject(mix_seed(seed, 2 * idx));
    p.subject_id = "S" + std::to_string(i + 1);
    out[static_cast<std::size_t>(i)] = {
        p, generate_recording(p, script, mix_seed(seed, 2 * idx + 1))};
  }
  return out;
}

}  // namespace wip
