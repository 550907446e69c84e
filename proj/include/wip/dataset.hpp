#pragma once

// Sliding-window segmentation of tracker recordings into point-cloud
// samples, min-max normalisation, augmentation and leave-one-subject-out
// domain splits.

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wip/gestures.hpp"
#include "wip/matrix.hpp"
#include "wip/synthgen.hpp"

namespace wip {

inline constexpr double kFramePeriodMs = 30.0;

struct WindowConfig {
  std::size_t window_frames = 6;
  std::size_t step_frames = 3;
  double sample_rate = kSampleRate;

  void validate() const;
  std::size_t points() const { return window_frames * kNumDevices; }
  // Latency accounting counts a nominal 30 ms per frame (6 frames = 180 ms,
  // a 3-frame step = 90 ms) rather than 1000 / sample_rate.
  double duration_ms() const { return kFramePeriodMs * static_cast<double>(window_frames); }
  // Number of windows on either side of a window that share frames with it.
  std::size_t overlap_reach() const;

  bool operator==(const WindowConfig&) const = default;
};

// One window: row (f * 3 + d) holds the 12 features of device d at frame f.
struct PointCloudSample {
  Matrix<double> points;
  Gesture label = Gesture::Standing;
  std::string subject_id;
  std::size_t first_frame = 0;
};

std::size_t window_count(std::size_t n_frames, const WindowConfig& cfg);

// Throws std::invalid_argument when the recording is shorter than a window.
std::vector<PointCloudSample> segment_windows(const Recording& recording,
                                              const WindowConfig& cfg,
                                              const std::string& subject_id = {});

// Most frequent label; ties go to the tied label seen last. Throws on empty.
Gesture majority_label(std::span<const Gesture> labels);

// Raw window features (no normalisation) for a block of frames.
Matrix<double> window_points(std::span<const Frame> frames);

// Per-channel bounds shared by the three devices.
struct NormalizationStats {
  std::array<double, kFeaturesPerDevice> min{};
  std::array<double, kFeaturesPerDevice> max{};

  void validate() const;
  bool operator==(const NormalizationStats&) const = default;
};

extern const std::array<std::string_view, kFeaturesPerDevice> kChannelNames;

// Throws on an empty sample list.
NormalizationStats compute_norm_stats(std::span<const PointCloudSample> samples);

// (x - min) / (max - min) clamped to [0, 1]; constant channels map to 0.5.
void normalize_points(Matrix<double>& points, const NormalizationStats& stats);
PointCloudSample normalize(const PointCloudSample& sample, const NormalizationStats& stats);
PointCloudSample denormalize(const PointCloudSample& sample, const NormalizationStats& stats);

struct AugmentConfig {
  double jitter_sigma = 0.01;  // in normalised units
  double jitter_clip = 0.05;   // in normalised units
  double max_yaw_deg = 15.0;
  double max_shift = 0.1;      // m, per axis
  double min_scale = 0.8;
  double max_scale = 1.25;
};

// One concrete draw of the augmentation.
struct AugmentParams {
  double yaw_deg = 0.0;
  Vec3 shift{};
  double scale = 1.0;
  double jitter_sigma = 0.0;
  double jitter_clip = 0.0;
};

AugmentParams draw_augment(const AugmentConfig& cfg, std::mt19937_64& rng);

// Jitter, yaw about +y, shift, scale. Jitter is expressed in normalised units
// and converted through `stats` when given (unit range otherwise); the noise
// itself comes from `rng`.
PointCloudSample apply_augment(const PointCloudSample& sample, const AugmentParams& p,
                               std::mt19937_64& rng,
                               const NormalizationStats* stats = nullptr);

PointCloudSample augment(const PointCloudSample& sample, std::uint64_t seed,
                         const AugmentConfig& cfg = {},
                         const NormalizationStats* stats = nullptr);

// Time-ordered windows of one subject.
struct SubjectWindows {
  std::string subject_id;
  std::vector<PointCloudSample> windows;
};

std::vector<SubjectWindows> segment_subjects(std::span<const SubjectRecording> recordings,
                                             const WindowConfig& cfg);

struct DomainSplit {
  std::string target_subject;
  std::vector<PointCloudSample> source;
  std::vector<PointCloudSample> target_train;  // labels are not used in training
  std::vector<PointCloudSample> target_test;
  std::size_t discarded = 0;  // gap windows dropped between train and test blocks
};

// Source = every other subject (order shuffled by seed). The target subject's
// windows are cut into contiguous blocks per label run, about 80% train and
// 20% test, with overlapping windows between a train block and a test block
// discarded. Throws when fewer than two subjects are given or the target is
// unknown.
DomainSplit make_loso_split(std::span<const SubjectWindows> subjects,
                            const std::string& target_subject,
                            const WindowConfig& cfg, std::uint64_t seed,
                            double train_fraction = 0.8);

DomainSplit make_loso_split(std::span<const SubjectRecording> recordings,
                            const std::string& target_subject,
                            const WindowConfig& cfg, std::uint64_t seed,
                            double train_fraction = 0.8);

// Stacks normalised samples into (n * points) x 12 rows for the model.
Matrix<double> stack_points(std::span<const PointCloudSample> samples);

}  // namespace wip
