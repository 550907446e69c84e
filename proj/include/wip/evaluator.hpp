#pragma once

// Confusion matrices, accuracy metrics, inference latency, the per-subject
// leave-one-out suite and the window-size study.

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wip/dataset.hpp"
#include "wip/model.hpp"
#include "wip/trainer.hpp"

namespace wip {

struct ConfusionMatrix {
  // rows = true class, columns = predicted class
  std::array<std::array<std::size_t, kNumGestures>, kNumGestures> counts{};

  std::size_t total() const;
  std::size_t row_sum(std::size_t r) const;
  // Rows divided by their sums; empty rows stay zero.
  std::array<std::array<double, kNumGestures>, kNumGestures> row_normalized() const;
};

// Throws on empty input or length mismatch.
ConfusionMatrix confusion_matrix(std::span<const Gesture> predictions,
                                 std::span<const Gesture> labels);

struct LatencyReport {
  double window_duration_ms = 0;
  double inference_median_ms = 0;
  double inference_p95_ms = 0;
  double total_ms = 0;  // window duration + median inference
  std::size_t trials = 0;
};

struct MetricsReport {
  // nullopt for classes with no test samples; those are listed in
  // empty_classes and left out of the mean.
  std::array<std::optional<double>, kNumGestures> per_class_accuracy{};
  std::vector<Gesture> empty_classes;
  double mean_class_accuracy = 0;
  double overall_accuracy = 0;
  std::size_t samples = 0;
  std::optional<LatencyReport> latency;
};

// Throws on an all-zero matrix.
MetricsReport metrics(const ConfusionMatrix& confusion);

double overall_accuracy(std::span<const Gesture> predictions, std::span<const Gesture> labels);

// Single-sample eval-mode inference timing on random inputs in [0, 1].
LatencyReport latency_benchmark(const Model<float>& model, const WindowConfig& window,
                                std::size_t n_trials, std::uint64_t seed = 1);

// 1-NN on flattened normalised windows, squared Euclidean distance, ties to
// the earlier training sample.
std::vector<Gesture> nearest_neighbor_predict(std::span<const PointCloudSample> train,
                                              std::span<const PointCloudSample> test);

struct FoldResult {
  std::string subject;
  MetricsReport metrics;
  ConfusionMatrix confusion;
  std::optional<double> nn_overall_accuracy;
  std::size_t source_windows = 0;
  std::size_t target_train_windows = 0;
  std::size_t target_test_windows = 0;
  double train_seconds = 0;
};

struct LosoReport {
  std::string mode;
  WindowConfig window;
  std::vector<FoldResult> folds;
  // Column means over folds.
  double mean_class_accuracy = 0;
  double overall_accuracy = 0;
  std::optional<double> nn_overall_accuracy;
  std::array<std::optional<double>, kNumGestures> per_class_accuracy{};
  ConfusionMatrix pooled_confusion;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

struct LosoConfig {
  WindowConfig window;
  ModelConfig model;
  TrainConfig train;
  std::uint64_t split_seed = 1;
  std::vector<std::string> subjects;  // held-out subjects; empty = all
  bool nearest_neighbor = true;
  int workers = 1;
};

LosoReport loso_suite(std::span<const SubjectRecording> recordings, const LosoConfig& cfg,
                      const std::function<void(const FoldResult&)>& on_fold = {});
// Same on pre-segmented windows; cfg.window must describe them.
LosoReport loso_suite(std::span<const SubjectWindows> subjects, const LosoConfig& cfg,
                      const std::function<void(const FoldResult&)>& on_fold = {});

struct WindowStudyRow {
  std::size_t window_frames = 0;
  std::size_t step_frames = 0;
  double duration_ms = 0;
  double mean_class_accuracy = 0;
  double overall_accuracy = 0;
};

inline const std::vector<std::size_t> kDefaultWindowSizes = {3, 6, 10, 16};

// Step = max(1, size / 2). Each size runs the full leave-one-out suite.
std::vector<WindowStudyRow> window_size_study(
    std::span<const SubjectRecording> recordings, std::span<const std::size_t> sizes,
    const LosoConfig& base, const std::function<void(const WindowStudyRow&)>& on_row = {});

nlohmann::json to_json(const ConfusionMatrix& c);
nlohmann::json to_json(const MetricsReport& m);
nlohmann::json to_json(const LatencyReport& l);
nlohmann::json window_study_json(std::span<const WindowStudyRow> rows);
std::string window_study_csv(std::span<const WindowStudyRow> rows);

}  // namespace wip
