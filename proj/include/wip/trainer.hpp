#pragma once

// Minibatch training of the two-head classifier on a leave-one-subject-out
// split, either adversarially (steps A, B, C) or on source labels only.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wip/dataset.hpp"
#include "wip/model.hpp"

namespace wip {

enum class TrainMode { Mcd, SourceOnly };
enum class LrSchedule { None, Cosine };
// When the three steps alternate: after every minibatch, or each step over
// the whole epoch before the next.
enum class StepGranularity { PerBatch, PerEpoch };

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  std::size_t batch_size = 64;
  int epochs = 250;
  LrSchedule lr_schedule = LrSchedule::Cosine;
  int generator_steps_per_batch = 1;
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::Mcd;
  StepGranularity granularity = StepGranularity::PerBatch;
  bool augment = true;
  AugmentConfig augment_config;

  void validate() const;
};

std::string to_string(TrainMode m);
std::string to_string(LrSchedule s);
std::string to_string(StepGranularity g);
TrainMode parse_train_mode(const std::string& s);
LrSchedule parse_lr_schedule(const std::string& s);
StepGranularity parse_granularity(const std::string& s);

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

// One row per minibatch. disc_loss is absent in source-only mode.
struct LossRecord {
  int epoch = 0;
  std::size_t step = 0;
  double class_loss = 0;
  std::optional<double> disc_loss;
};

struct EpochReport {
  int epoch = 0;
  double learning_rate = 0;
  double class_loss = 0;
  std::optional<double> disc_loss;
};

struct LossHistory {
  std::vector<LossRecord> steps;
  std::vector<EpochReport> epochs;
  bool has_discrepancy = true;

  // Columns: epoch,step,class_loss[,disc_loss]
  std::string to_csv() const;
};

struct TrainResult {
  Model<float> model;
  NormalizationStats stats;
  LossHistory history;
};

double learning_rate_at(const TrainConfig& c, int epoch);

// Normalisation statistics come from the raw source windows; augmentation
// touches source windows only. Fully deterministic for a fixed seed.
// Throws std::invalid_argument for an empty source set.
TrainResult fit(const DomainSplit& split, const ModelConfig& model_config,
                const TrainConfig& train_config,
                const std::function<void(const EpochReport&)>& on_epoch = {});

// Eval-mode class probabilities for normalised samples, in chunks.
Matrix<float> predict_samples(const Model<float>& model,
                              std::span<const PointCloudSample> samples,
                              std::size_t chunk = 256);
std::vector<Gesture> predict_labels(const Model<float>& model,
                                    std::span<const PointCloudSample> samples);

}  // namespace wip
