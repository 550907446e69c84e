#include "wip/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "wip/mcd.hpp"
#include "wip/seed.hpp"

namespace wip {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0)) throw std::invalid_argument("learning_rate must be >= 0");
  if (!(weight_decay >= 0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (generator_steps_per_batch < 1) {
    throw std::invalid_argument("generator_steps_per_batch must be >= 1");
  }
}

std::string to_string(TrainMode m) { return m == TrainMode::Mcd ? "mcd" : "source-only"; }
std::string to_string(LrSchedule s) { return s == LrSchedule::Cosine ? "cosine" : "none"; }
std::string to_string(StepGranularity g) {
  return g == StepGranularity::PerBatch ? "per-batch" : "per-epoch";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "mcd") return TrainMode::Mcd;
  if (s == "source-only") return TrainMode::SourceOnly;
  throw std::invalid_argument("mode must be mcd or source-only, got '" + s + "'");
}

LrSchedule parse_lr_schedule(const std::string& s) {
  if (s == "cosine") return LrSchedule::Cosine;
  if (s == "none") return LrSchedule::None;
  throw std::invalid_argument("lr schedule must be cosine or none, got '" + s + "'");
}

StepGranularity parse_granularity(const std::string& s) {
  if (s == "per-batch") return StepGranularity::PerBatch;
  if (s == "per-epoch") return StepGranularity::PerEpoch;
  throw std::invalid_argument("granularity must be per-batch or per-epoch, got '" + s + "'");
}

nlohmann::json to_json(const TrainConfig& c) {
  const auto& a = c.augment_config;
  return {{"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"optimizer", "adam"},
          {"lr_schedule", to_string(c.lr_schedule)},
          {"generator_steps_per_batch", c.generator_steps_per_batch},
          {"seed", c.seed},
          {"mode", to_string(c.mode)},
          {"granularity", to_string(c.granularity)},
          {"augment", c.augment},
          {"augment_config",
           {{"jitter_sigma", a.jitter_sigma},
            {"jitter_clip", a.jitter_clip},
            {"max_yaw_deg", a.max_yaw_deg},
            {"max_shift", a.max_shift},
            {"min_scale", a.min_scale},
            {"max_scale", a.max_scale}}}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  if (j.contains("lr_schedule")) c.lr_schedule = parse_lr_schedule(j.at("lr_schedule"));
  c.generator_steps_per_batch = j.value("generator_steps_per_batch", c.generator_steps_per_batch);
  c.seed = j.value("seed", c.seed);
  if (j.contains("mode")) c.mode = parse_train_mode(j.at("mode"));
  if (j.contains("granularity")) c.granularity = parse_granularity(j.at("granularity"));
  c.augment = j.value("augment", c.augment);
  if (j.contains("augment_config")) {
    const auto& a = j.at("augment_config");
    auto& o = c.augment_config;
    o.jitter_sigma = a.value("jitter_sigma", o.jitter_sigma);
    o.jitter_clip = a.value("jitter_clip", o.jitter_clip);
    o.max_yaw_deg = a.value("max_yaw_deg", o.max_yaw_deg);
    o.max_shift = a.value("max_shift", o.max_shift);
    o.min_scale = a.value("min_scale", o.min_scale);
    o.max_scale = a.value("max_scale", o.max_scale);
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"input_dim", c.input_dim},
          {"embed_dims", c.embed_dims},
          {"knn_k", c.knn_k},
          {"neighbor_dim", c.neighbor_dim},
          {"attention_dim", c.attention_dim},
          {"n_attention", c.n_attention},
          {"fused_dim", c.fused_dim},
          {"classifier_dims", c.classifier_dims},
          {"n_classes", c.n_classes},
          {"dropout_rate", c.dropout_rate},
          {"attention_norm",
           c.attention_norm == AttentionNorm::OffsetL1 ? "offset-l1" : "scaled-softmax"},
          {"init_seed", c.init_seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c) {
  c.input_dim = j.value("input_dim", c.input_dim);
  c.embed_dims = j.value("embed_dims", c.embed_dims);
  c.knn_k = j.value("knn_k", c.knn_k);
  c.neighbor_dim = j.value("neighbor_dim", c.neighbor_dim);
  c.attention_dim = j.value("attention_dim", c.attention_dim);
  c.n_attention = j.value("n_attention", c.n_attention);
  c.fused_dim = j.value("fused_dim", c.fused_dim);
  c.classifier_dims = j.value("classifier_dims", c.classifier_dims);
  c.n_classes = j.value("n_classes", c.n_classes);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  if (j.contains("attention_norm")) {
    const std::string n = j.at("attention_norm");
    if (n == "offset-l1") c.attention_norm = AttentionNorm::OffsetL1;
    else if (n == "scaled-softmax") c.attention_norm = AttentionNorm::ScaledSoftmax;
    else throw std::invalid_argument("attention_norm must be offset-l1 or scaled-softmax");
  }
  c.init_seed = j.value("init_seed", c.init_seed);
  c.validate(0);
  return c;
}

std::string LossHistory::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,step,class_loss" << (has_discrepancy ? ",disc_loss" : "") << "\n";
  for (const auto& r : steps) {
    out << r.epoch << ',' << r.step << ',' << r.class_loss;
    if (has_discrepancy) out << ',' << r.disc_loss.value_or(0.0);
    out << "\n";
  }
  return out.str();
}

double learning_rate_at(const TrainConfig& c, int epoch) {
  if (c.lr_schedule == LrSchedule::None || c.epochs <= 0) return c.learning_rate;
  return 0.5 * c.learning_rate *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / c.epochs));
}

namespace {

// Cycles through a permutation of [0, n), reshuffling at every wrap.
class IndexStream {
 public:
  IndexStream(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
  }
  std::vector<std::size_t> take(std::size_t count) {
    std::vector<std::size_t> out(count);
    for (auto& v : out) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      v = order_[pos_++];
    }
    return out;
  }
  void reshuffle() {
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
  std::size_t pos_ = 0;
};

class BatchMaker {
 public:
  BatchMaker(const DomainSplit& split, const NormalizationStats& stats, const TrainConfig& cfg)
      : split_(split), stats_(stats), cfg_(cfg) {
    for (const auto& t : split.target_train) target_.push_back(normalize(t, stats));
  }

  Batch<float> source(const std::vector<std::size_t>& idx, int epoch, std::size_t step) const {
    std::vector<PointCloudSample> s;
    s.reserve(idx.size());
    Batch<float> b;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& raw = split_.source[idx[i]];
      if (cfg_.augment) {
        const std::uint64_t k = mix_seed(mix_seed(cfg_.seed, static_cast<std::uint64_t>(epoch)),
                                         step * cfg_.batch_size + i);
        s.push_back(normalize(augment(raw, k, cfg_.augment_config, &stats_), stats_));
      } else {
        s.push_back(normalize(raw, stats_));
      }
      b.labels.push_back(static_cast<int>(index_of(raw.label)));
    }
    b.x = matrix_cast<float>(stack_points(s));
    b.n_points = s.front().points.rows();
    return b;
  }

  Batch<float> target(const std::vector<std::size_t>& idx) const {
    std::vector<PointCloudSample> s;
    s.reserve(idx.size());
    for (auto i : idx) s.push_back(target_[i]);
    Batch<float> b;
    b.x = matrix_cast<float>(stack_points(s));
    b.n_points = s.front().points.rows();
    return b;
  }

 private:
  const DomainSplit& split_;
  const NormalizationStats& stats_;
  const TrainConfig& cfg_;
  std::vector<PointCloudSample> target_;
};

}  // namespace

TrainResult fit(const DomainSplit& split, const ModelConfig& model_config,
                const TrainConfig& cfg, const std::function<void(const EpochReport&)>& on_epoch) {
  cfg.validate();
  if (split.source.empty()) throw std::invalid_argument("fit: empty source set");
  const bool mcd = cfg.mode == TrainMode::Mcd;
  if (mcd && split.target_train.empty()) {
    throw std::invalid_argument("fit: adversarial training needs target windows");
  }
  const std::size_t n_points = split.source.front().points.rows();
  model_config.validate(n_points);

  TrainResult result;
  result.stats = compute_norm_stats(split.source);
  result.model = Model<float>(model_config);
  result.history.has_discrepancy = mcd;
  Model<float>& net = result.model;

  AdamConfig adam;
  adam.weight_decay = cfg.weight_decay;
  auto opt = make_optimizers(net, adam);
  std::mt19937_64 dropout_rng(mix_seed(cfg.seed, 0xd7));
  const nn::Mode mode = nn::Mode::train(&dropout_rng);

  BatchMaker maker(split, result.stats, cfg);
  IndexStream src_stream(split.source.size(), mix_seed(cfg.seed, 0x51));
  IndexStream tgt_stream(std::max<std::size_t>(split.target_train.size(), 1),
                         mix_seed(cfg.seed, 0x71));

  const std::size_t longest =
      mcd ? std::max(split.source.size(), split.target_train.size()) : split.source.size();
  std::vector<std::size_t> sizes;
  for (std::size_t at = 0; at < longest; at += cfg.batch_size) {
    const std::size_t n = std::min(cfg.batch_size, longest - at);
    if (n >= 2) sizes.push_back(n);
  }
  if (sizes.empty()) throw std::invalid_argument("fit: fewer than 2 training windows");

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch);
    src_stream.reshuffle();
    if (mcd) tgt_stream.reshuffle();
    std::vector<Batch<float>> src_batches, tgt_batches;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      src_batches.push_back(maker.source(src_stream.take(sizes[s]), epoch, s));
      if (mcd) tgt_batches.push_back(maker.target(tgt_stream.take(sizes[s])));
    }

    std::vector<StepLosses> losses(sizes.size());
    auto run_a = [&](std::size_t s) { losses[s].class_loss = step_a(net, src_batches[s], opt, lr, mode).class_loss; };
    auto run_b = [&](std::size_t s) { step_b(net, src_batches[s], tgt_batches[s], opt, lr, mode); };
    auto run_c = [&](std::size_t s) {
      losses[s].disc_loss =
          step_c(net, tgt_batches[s], opt, lr, mode, cfg.generator_steps_per_batch).disc_loss;
    };
    if (!mcd) {
      for (std::size_t s = 0; s < sizes.size(); ++s) run_a(s);
    } else if (cfg.granularity == StepGranularity::PerBatch) {
      for (std::size_t s = 0; s < sizes.size(); ++s) {
        run_a(s);
        run_b(s);
        run_c(s);
      }
    } else {
      for (std::size_t s = 0; s < sizes.size(); ++s) run_a(s);
      for (std::size_t s = 0; s < sizes.size(); ++s) run_b(s);
      for (std::size_t s = 0; s < sizes.size(); ++s) run_c(s);
    }

    EpochReport rep;
    rep.epoch = epoch;
    rep.learning_rate = lr;
    double dsum = 0;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
      LossRecord r;
      r.epoch = epoch;
      r.step = s;
      r.class_loss = losses[s].class_loss;
      if (mcd) r.disc_loss = losses[s].disc_loss;
      result.history.steps.push_back(r);
      rep.class_loss += r.class_loss / static_cast<double>(sizes.size());
      dsum += losses[s].disc_loss / static_cast<double>(sizes.size());
    }
    if (mcd) rep.disc_loss = dsum;
    result.history.epochs.push_back(rep);
    if (on_epoch) on_epoch(rep);
  }
  return result;
}

Matrix<float> predict_samples(const Model<float>& model,
                              std::span<const PointCloudSample> samples, std::size_t chunk) {
  if (samples.empty()) return Matrix<float>(0, kNumGestures);
  const std::size_t n = samples.front().points.rows();
  Matrix<float> out(samples.size(), kNumGestures);
  for (std::size_t at = 0; at < samples.size(); at += chunk) {
    const std::size_t m = std::min(chunk, samples.size() - at);
    const Matrix<float> p = model.predict_proba(
        matrix_cast<float>(stack_points(samples.subspan(at, m))), n);
    std::copy(p.storage().begin(), p.storage().end(),
              out.storage().begin() + static_cast<std::ptrdiff_t>(at * kNumGestures));
  }
  return out;
}

std::vector<Gesture> predict_labels(const Model<float>& model,
                                    std::span<const PointCloudSample> samples) {
  const Matrix<float> p = predict_samples(model, samples);
  std::vector<Gesture> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto row = p.row(i);
    out[i] = kAllGestures[static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())];
  }
  return out;
}

}  // namespace wip
