#include "wip/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "wip/seed.hpp"

namespace wip {

const std::array<std::string_view, kFeaturesPerDevice> kChannelNames = {
    "pos_x", "pos_y",   "pos_z", "vel_x", "vel_y", "vel_z",
    "pitch", "yaw",     "roll",  "avel_x", "avel_y", "avel_z"};

void WindowConfig::validate() const {
  if (window_frames < 1) throw std::invalid_argument("window_frames must be >= 1");
  if (step_frames < 1 || step_frames > window_frames) {
    throw std::invalid_argument("step_frames must be in [1, window_frames]");
  }
  if (!(sample_rate > 0)) throw std::invalid_argument("sample_rate must be positive");
}

std::size_t WindowConfig::overlap_reach() const {
  return (window_frames + step_frames - 1) / step_frames - 1;
}

std::size_t window_count(std::size_t n_frames, const WindowConfig& cfg) {
  cfg.validate();
  if (n_frames < cfg.window_frames) return 0;
  return (n_frames - cfg.window_frames) / cfg.step_frames + 1;
}

Matrix<double> window_points(std::span<const Frame> frames) {
  Matrix<double> pts(frames.size() * kNumDevices, kFeaturesPerDevice);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (std::size_t d = 0; d < kNumDevices; ++d) {
      const auto feat = frames[f].devices[d].features();
      std::copy(feat.begin(), feat.end(), pts.row(f * kNumDevices + d).begin());
    }
  }
  return pts;
}

Gesture majority_label(std::span<const Gesture> labels) {
  if (labels.empty()) throw std::invalid_argument("majority_label: empty window");
  std::array<std::size_t, kNumGestures> count{};
  std::array<std::size_t, kNumGestures> last{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++count[index_of(labels[i])];
    last[index_of(labels[i])] = i;
  }
  std::size_t best = index_of(labels.front());
  for (std::size_t c = 0; c < kNumGestures; ++c) {
    if (count[c] > count[best] || (count[c] == count[best] && count[c] > 0 && last[c] > last[best])) {
      best = c;
    }
  }
  return kAllGestures[best];
}

std::vector<PointCloudSample> segment_windows(const Recording& recording,
                                              const WindowConfig& cfg,
                                              const std::string& subject_id) {
  cfg.validate();
  if (recording.size() < cfg.window_frames) {
    throw std::invalid_argument("segment_windows: recording has " +
                                std::to_string(recording.size()) +
                                " frames, shorter than one window of " +
                                std::to_string(cfg.window_frames));
  }
  const std::size_t n = window_count(recording.size(), cfg);
  std::vector<PointCloudSample> out(n);
  std::vector<Frame> frames(cfg.window_frames);
  std::vector<Gesture> labels(cfg.window_frames);
  for (std::size_t w = 0; w < n; ++w) {
    const std::size_t start = w * cfg.step_frames;
    for (std::size_t f = 0; f < cfg.window_frames; ++f) {
      frames[f] = recording[start + f].frame;
      labels[f] = recording[start + f].label;
    }
    out[w].points = window_points(frames);
    out[w].label = majority_label(labels);
    out[w].subject_id = subject_id;
    out[w].first_frame = start;
  }
  return out;
}

void NormalizationStats::validate() const {
  for (std::size_t c = 0; c < kFeaturesPerDevice; ++c) {
    if (!(min[c] <= max[c]) || !std::isfinite(min[c]) || !std::isfinite(max[c])) {
      throw std::invalid_argument("NormalizationStats: invalid bounds for channel " +
                                  std::string(kChannelNames[c]));
    }
  }
}

NormalizationStats compute_norm_stats(std::span<const PointCloudSample> samples) {
  if (samples.empty()) throw std::invalid_argument("compute_norm_stats: no samples");
  NormalizationStats s;
  s.min.fill(std::numeric_limits<double>::infinity());
  s.max.fill(-std::numeric_limits<double>::infinity());
  for (const auto& smp : samples) {
    for (std::size_t r = 0; r < smp.points.rows(); ++r) {
      const auto row = smp.points.row(r);
      for (std::size_t c = 0; c < kFeaturesPerDevice; ++c) {
        s.min[c] = std::min(s.min[c], row[c]);
        s.max[c] = std::max(s.max[c], row[c]);
      }
    }
  }
  return s;
}

void normalize_points(Matrix<double>& points, const NormalizationStats& stats) {
  if (points.cols() != kFeaturesPerDevice) {
    throw std::invalid_argument("normalize: expected 12 feature columns");
  }
  for (std::size_t r = 0; r < points.rows(); ++r) {
    auto row = points.row(r);
    for (std::size_t c = 0; c < kFeaturesPerDevice; ++c) {
      const double range = stats.max[c] - stats.min[c];
      row[c] = range > 0 ? std::clamp((row[c] - stats.min[c]) / range, 0.0, 1.0) : 0.5;
    }
  }
}

PointCloudSample normalize(const PointCloudSample& sample, const NormalizationStats& stats) {
  PointCloudSample out = sample;
  normalize_points(out.points, stats);
  return out;
}

PointCloudSample denormalize(const PointCloudSample& sample, const NormalizationStats& stats) {
  PointCloudSample out = sample;
  for (std::size_t r = 0; r < out.points.rows(); ++r) {
    auto row = out.points.row(r);
    for (std::size_t c = 0; c < kFeaturesPerDevice; ++c) {
      const double range = stats.max[c] - stats.min[c];
      row[c] = range > 0 ? stats.min[c] + row[c] * range : stats.min[c];
    }
  }
  return out;
}

AugmentParams draw_augment(const AugmentConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AugmentParams p;
  p.yaw_deg = cfg.max_yaw_deg * (2.0 * unit(rng) - 1.0);
  for (auto& s : p.shift) s = cfg.max_shift * (2.0 * unit(rng) - 1.0);
  // log-uniform so that 0.8 and 1.25 are equally likely extremes
  const double lo = std::log(cfg.min_scale), hi = std::log(cfg.max_scale);
  p.scale = std::exp(lo + (hi - lo) * unit(rng));
  p.jitter_sigma = cfg.jitter_sigma;
  p.jitter_clip = cfg.jitter_clip;
  return p;
}

PointCloudSample apply_augment(const PointCloudSample& sample, const AugmentParams& p,
                               std::mt19937_64& rng, const NormalizationStats* stats) {
  PointCloudSample out = sample;
  Matrix<double>& pts = out.points;
  if (pts.cols() != kFeaturesPerDevice) {
    throw std::invalid_argument("augment: expected 12 feature columns");
  }

  if (p.jitter_sigma > 0) {
    std::normal_distribution<double> noise(0.0, p.jitter_sigma);
    for (std::size_t r = 0; r < pts.rows(); ++r) {
      auto row = pts.row(r);
      for (std::size_t c = 0; c < kFeaturesPerDevice; ++c) {
        const double range = stats ? stats->max[c] - stats->min[c] : 1.0;
        const double e = std::clamp(noise(rng), -p.jitter_clip, p.jitter_clip);
        row[c] += e * range;
      }
    }
  }

  const double th = p.yaw_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  auto rotate = [cs, sn](std::span<double> v, std::size_t at) {
    const double x = v[at], z = v[at + 2];
    v[at] = cs * x + sn * z;
    v[at + 2] = -sn * x + cs * z;
  };
  for (std::size_t r = 0; r < pts.rows(); ++r) {
    auto row = pts.row(r);
    if (p.yaw_deg != 0.0) {
      rotate(row, 0);
      rotate(row, 3);
      rotate(row, 9);
      row[7] = wrap_degrees(row[7] + p.yaw_deg);
    }
    for (std::size_t a = 0; a < 3; ++a) {
      row[a] = (row[a] + p.shift[a]) * p.scale;
      row[3 + a] *= p.scale;
    }
  }
  return out;
}

PointCloudSample augment(const PointCloudSample& sample, std::uint64_t seed,
                         const AugmentConfig& cfg, const NormalizationStats* stats) {
  std::mt19937_64 rng(mix_seed(seed, 0xa5));
  const AugmentParams p = draw_augment(cfg, rng);
  return apply_augment(sample, p, rng, stats);
}

std::vector<SubjectWindows> segment_subjects(std::span<const SubjectRecording> recordings,
                                             const WindowConfig& cfg) {
  cfg.validate();
  for (const auto& r : recordings) {
    if (r.frames.size() < cfg.window_frames) {
      throw std::invalid_argument("recording of " + r.profile.subject_id +
                                  " is shorter than one window");
    }
  }
  std::vector<SubjectWindows> out(recordings.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < recordings.size(); ++i) {
    out[i].subject_id = recordings[i].profile.subject_id;
    out[i].windows = segment_windows(recordings[i].frames, cfg, out[i].subject_id);
  }
  return out;
}

namespace {

enum class Side { Train, Test };

// Splits the target subject's windows run by run. Each run of equal labels
// is either kept whole in the current side or cut once, switching side; a
// switch always drops `gap` windows so no kept train and test windows share
// a frame.
void split_target(const std::vector<PointCloudSample>& w, std::size_t gap,
                  double fraction, DomainSplit& out) {
  Side side = Side::Train;
  std::size_t kept = 0, train = 0;
  auto emit = [&](std::size_t from, std::size_t to, Side s) {
    for (std::size_t i = from; i < to; ++i) {
      (s == Side::Train ? out.target_train : out.target_test).push_back(w[i]);
    }
    kept += to - from;
    if (s == Side::Train) train += to - from;
  };
  auto want_train = [&](std::size_t extra) {
    const long goal = std::lround(fraction * static_cast<double>(kept + extra));
    return std::clamp<long>(goal - static_cast<long>(train), 0, static_cast<long>(extra));
  };

  std::size_t begin = 0;
  while (begin < w.size()) {
    std::size_t end = begin + 1;
    while (end < w.size() && w[end].label == w[begin].label) ++end;
    const std::size_t m = end - begin;

    const long whole = want_train(m);
    const bool stay = m <= gap || (side == Side::Train && whole == static_cast<long>(m)) ||
                      (side == Side::Test && whole == 0);
    if (stay) {
      emit(begin, end, side);
      begin = end;
      continue;
    }
    const std::size_t usable = m - gap;
    const auto t = static_cast<std::size_t>(want_train(usable));
    const Side other = side == Side::Train ? Side::Test : Side::Train;
    const std::size_t first = side == Side::Train ? t : usable - t;
    emit(begin, begin + first, side);
    out.discarded += gap;
    emit(begin + first + gap, end, other);
    side = other;
    begin = end;
  }
}

}  // namespace

DomainSplit make_loso_split(std::span<const SubjectWindows> subjects,
                            const std::string& target_subject, const WindowConfig& cfg,
                            std::uint64_t seed, double train_fraction) {
  cfg.validate();
  if (subjects.size() < 2) {
    throw std::invalid_argument("leave-one-subject-out needs at least 2 subjects");
  }
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw std::invalid_argument("train_fraction must be in (0, 1)");
  }
  DomainSplit split;
  split.target_subject = target_subject;
  const SubjectWindows* target = nullptr;
  for (const auto& s : subjects) {
    if (s.subject_id == target_subject) {
      target = &s;
    } else {
      split.source.insert(split.source.end(), s.windows.begin(), s.windows.end());
    }
  }
  if (!target) throw std::invalid_argument("unknown target subject: " + target_subject);
  std::mt19937_64 rng(mix_seed(seed, 0x5011));
  std::shuffle(split.source.begin(), split.source.end(), rng);
  split_target(target->windows, cfg.overlap_reach(), train_fraction, split);
  return split;
}

DomainSplit make_loso_split(std::span<const SubjectRecording> recordings,
                            const std::string& target_subject, const WindowConfig& cfg,
                            std::uint64_t seed, double train_fraction) {
  const auto subjects = segment_subjects(recordings, cfg);
  return make_loso_split(subjects, target_subject, cfg, seed, train_fraction);
}

Matrix<double> stack_points(std::span<const PointCloudSample> samples) {
  if (samples.empty()) return {};
  const std::size_t n = samples.front().points.rows(), c = samples.front().points.cols();
  Matrix<double> out(samples.size() * n, c);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].points.rows() != n || samples[i].points.cols() != c) {
      throw std::invalid_argument("stack_points: samples differ in shape");
    }
    std::copy(samples[i].points.storage().begin(), samples[i].points.storage().end(),
              out.storage().begin() + static_cast<std::ptrdiff_t>(i * n * c));
  }
  return out;
}

}  // namespace wip
