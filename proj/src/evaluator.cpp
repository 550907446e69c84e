#include "wip/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace wip {

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& r : counts)
    for (auto v : r) t += v;
  return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t r) const {
  std::size_t t = 0;
  for (auto v : counts[r]) t += v;
  return t;
}

std::array<std::array<double, kNumGestures>, kNumGestures> ConfusionMatrix::row_normalized() const {
  std::array<std::array<double, kNumGestures>, kNumGestures> out{};
  for (std::size_t r = 0; r < kNumGestures; ++r) {
    const std::size_t s = row_sum(r);
    if (s == 0) continue;
    for (std::size_t c = 0; c < kNumGestures; ++c) {
      out[r][c] = static_cast<double>(counts[r][c]) / static_cast<double>(s);
    }
  }
  return out;
}

ConfusionMatrix confusion_matrix(std::span<const Gesture> predictions,
                                 std::span<const Gesture> labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("confusion_matrix: " + std::to_string(predictions.size()) +
                                " predictions for " + std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw std::invalid_argument("confusion_matrix: no samples");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++m.counts[index_of(labels[i])][index_of(predictions[i])];
  }
  return m;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.samples = cm.total();
  if (r.samples == 0) throw std::invalid_argument("metrics: confusion matrix is empty");
  std::size_t correct = 0, present = 0;
  double sum = 0;
  for (std::size_t c = 0; c < kNumGestures; ++c) {
    correct += cm.counts[c][c];
    const std::size_t n = cm.row_sum(c);
    if (n == 0) {
      r.empty_classes.push_back(kAllGestures[c]);
      continue;
    }
    const double acc = static_cast<double>(cm.counts[c][c]) / static_cast<double>(n);
    r.per_class_accuracy[c] = acc;
    sum += acc;
    ++present;
  }
  r.mean_class_accuracy = sum / static_cast<double>(present);
  r.overall_accuracy = static_cast<double>(correct) / static_cast<double>(r.samples);
  return r;
}

double overall_accuracy(std::span<const Gesture> predictions, std::span<const Gesture> labels) {
  if (predictions.size() != labels.size() || labels.empty()) {
    throw std::invalid_argument("overall_accuracy: need equal, non-empty inputs");
  }
  std::size_t ok = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) ok += predictions[i] == labels[i];
  return static_cast<double>(ok) / static_cast<double>(labels.size());
}

LatencyReport latency_benchmark(const Model<float>& model, const WindowConfig& window,
                                std::size_t n_trials, std::uint64_t seed) {
  if (n_trials == 0) throw std::invalid_argument("latency_benchmark: n_trials must be > 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Matrix<float> x(window.points(), kFeaturesPerDevice);
  for (auto& v : x.storage()) v = u(rng);
  for (int i = 0; i < 3; ++i) (void)model.predict(x);

  std::vector<double> ms(n_trials);
  for (auto& t : ms) {
    for (auto& v : x.storage()) v = u(rng);
    const auto t0 = std::chrono::steady_clock::now();
    const Prediction p = model.predict(x);
    const auto t1 = std::chrono::steady_clock::now();
    if (p.probabilities[0] < 0) throw std::logic_error("negative probability");
    t = std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  std::sort(ms.begin(), ms.end());
  const std::size_t n = ms.size();
  LatencyReport r;
  r.trials = n;
  r.inference_median_ms = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  r.inference_p95_ms = ms[std::clamp<std::size_t>(rank, 1, n) - 1];
  r.window_duration_ms = window.duration_ms();
  r.total_ms = r.window_duration_ms + r.inference_median_ms;
  return r;
}

std::vector<Gesture> nearest_neighbor_predict(std::span<const PointCloudSample> train,
                                              std::span<const PointCloudSample> test) {
  if (train.empty()) throw std::invalid_argument("nearest_neighbor_predict: no training samples");
  for (const auto& s : test) {
    if (s.points.size() != train.front().points.size()) {
      throw std::invalid_argument("nearest_neighbor_predict: shape mismatch");
    }
  }
  for (const auto& s : train) {
    if (s.points.size() != train.front().points.size()) {
      throw std::invalid_argument("nearest_neighbor_predict: shape mismatch");
    }
  }
  std::vector<Gesture> out(test.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& q = test[i].points.storage();
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < train.size(); ++j) {
      const auto& t = train[j].points.storage();
      double d = 0;
      for (std::size_t k = 0; k < q.size(); ++k) {
        const double e = q[k] - t[k];
        d += e * e;
      }
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    out[i] = train[arg].label;
  }
  return out;
}

namespace {

FoldResult run_fold(std::span<const SubjectWindows> subjects, const std::string& target,
                    const LosoConfig& cfg) {
  FoldResult fr;
  fr.subject = target;
  const DomainSplit split = make_loso_split(subjects, target, cfg.window, cfg.split_seed);
  fr.source_windows = split.source.size();
  fr.target_train_windows = split.target_train.size();
  fr.target_test_windows = split.target_test.size();

  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult res = fit(split, cfg.model, cfg.train);
  fr.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::vector<PointCloudSample> test;
  std::vector<Gesture> labels;
  for (const auto& s : split.target_test) {
    test.push_back(normalize(s, res.stats));
    labels.push_back(s.label);
  }
  const auto pred = predict_labels(res.model, test);
  fr.confusion = confusion_matrix(pred, labels);
  fr.metrics = metrics(fr.confusion);

  if (cfg.nearest_neighbor) {
    std::vector<PointCloudSample> train;
    for (const auto& s : split.source) train.push_back(normalize(s, res.stats));
    fr.nn_overall_accuracy = overall_accuracy(nearest_neighbor_predict(train, test), labels);
  }
  return fr;
}

}  // namespace

LosoReport loso_suite(std::span<const SubjectRecording> recordings, const LosoConfig& cfg,
                      const std::function<void(const FoldResult&)>& on_fold) {
  if (recordings.size() < 2) {
    throw std::invalid_argument("leave-one-subject-out needs at least 2 subjects");
  }
  return loso_suite(std::span<const SubjectWindows>(segment_subjects(recordings, cfg.window)), cfg,
                    on_fold);
}

LosoReport loso_suite(std::span<const SubjectWindows> subjects, const LosoConfig& cfg,
                      const std::function<void(const FoldResult&)>& on_fold) {
  if (subjects.size() < 2) {
    throw std::invalid_argument("leave-one-subject-out needs at least 2 subjects");
  }
  std::vector<std::string> targets = cfg.subjects;
  if (targets.empty()) {
    for (const auto& s : subjects) targets.push_back(s.subject_id);
  }

  LosoReport rep;
  rep.mode = to_string(cfg.train.mode);
  rep.window = cfg.window;
  rep.folds.resize(targets.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < targets.size(); i = next++) {
      try {
        rep.folds[i] = run_fold(subjects, targets[i], cfg);
        if (on_fold) {
          std::lock_guard lock(mu);
          on_fold(rep.folds[i]);
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(cfg.workers, 1, static_cast<int>(targets.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  const double n = static_cast<double>(rep.folds.size());
  double nn = 0;
  std::array<double, kNumGestures> cls_sum{};
  std::array<int, kNumGestures> cls_n{};
  for (const auto& f : rep.folds) {
    rep.mean_class_accuracy += f.metrics.mean_class_accuracy / n;
    rep.overall_accuracy += f.metrics.overall_accuracy / n;
    if (f.nn_overall_accuracy) nn += *f.nn_overall_accuracy / n;
    for (std::size_t c = 0; c < kNumGestures; ++c) {
      if (f.metrics.per_class_accuracy[c]) {
        cls_sum[c] += *f.metrics.per_class_accuracy[c];
        ++cls_n[c];
      }
      for (std::size_t p = 0; p < kNumGestures; ++p) {
        rep.pooled_confusion.counts[c][p] += f.confusion.counts[c][p];
      }
    }
  }
  if (cfg.nearest_neighbor) rep.nn_overall_accuracy = nn;
  for (std::size_t c = 0; c < kNumGestures; ++c) {
    if (cls_n[c]) rep.per_class_accuracy[c] = cls_sum[c] / cls_n[c];
  }
  return rep;
}

std::vector<WindowStudyRow> window_size_study(std::span<const SubjectRecording> recordings,
                                              std::span<const std::size_t> sizes,
                                              const LosoConfig& base,
                                              const std::function<void(const WindowStudyRow&)>& on_row) {
  std::vector<WindowStudyRow> rows;
  for (const std::size_t size : sizes) {
    if (size < 1) throw std::invalid_argument("window sizes must be >= 1");
    LosoConfig cfg = base;
    cfg.window.window_frames = size;
    cfg.window.step_frames = std::max<std::size_t>(1, size / 2);
    cfg.nearest_neighbor = false;
    const LosoReport rep = loso_suite(recordings, cfg);
    WindowStudyRow row;
    row.window_frames = size;
    row.step_frames = cfg.window.step_frames;
    row.duration_ms = cfg.window.duration_ms();
    row.mean_class_accuracy = rep.mean_class_accuracy;
    row.overall_accuracy = rep.overall_accuracy;
    rows.push_back(row);
    if (on_row) on_row(row);
  }
  return rows;
}

nlohmann::json to_json(const ConfusionMatrix& c) {
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& r : c.counts) counts.push_back(r);
  nlohmann::json norm = nlohmann::json::array();
  for (const auto& r : c.row_normalized()) norm.push_back(r);
  nlohmann::json labels = nlohmann::json::array();
  for (auto n : kGestureNames) labels.push_back(std::string(n));
  return {{"labels", labels}, {"counts", counts}, {"row_normalized", norm}};
}

nlohmann::json to_json(const LatencyReport& l) {
  return {{"window_duration_ms", l.window_duration_ms},
          {"inference_median_ms", l.inference_median_ms},
          {"inference_p95_ms", l.inference_p95_ms},
          {"total_ms", l.total_ms},
          {"trials", l.trials}};
}

nlohmann::json to_json(const MetricsReport& m) {
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t c = 0; c < kNumGestures; ++c) {
    per[std::string(kGestureNames[c])] =
        m.per_class_accuracy[c] ? nlohmann::json(*m.per_class_accuracy[c]) : nlohmann::json();
  }
  nlohmann::json empty = nlohmann::json::array();
  for (auto g : m.empty_classes) empty.push_back(std::string(name_of(g)));
  nlohmann::json j = {{"per_class_accuracy", per},
                      {"empty_classes", empty},
                      {"mean_class_accuracy", m.mean_class_accuracy},
                      {"overall_accuracy", m.overall_accuracy},
                      {"samples", m.samples}};
  if (m.latency) j["latency_ms"] = to_json(*m.latency);
  return j;
}

nlohmann::json LosoReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& f : folds) {
    nlohmann::json r = {{"subject", f.subject},
                        {"metrics", wip::to_json(f.metrics)},
                        {"confusion", wip::to_json(f.confusion)},
                        {"source_windows", f.source_windows},
                        {"target_train_windows", f.target_train_windows},
                        {"target_test_windows", f.target_test_windows},
                        {"train_seconds", f.train_seconds}};
    if (f.nn_overall_accuracy) r["nn_overall_accuracy"] = *f.nn_overall_accuracy;
    rows.push_back(r);
  }
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t c = 0; c < kNumGestures; ++c) {
    per[std::string(kGestureNames[c])] =
        per_class_accuracy[c] ? nlohmann::json(*per_class_accuracy[c]) : nlohmann::json();
  }
  nlohmann::json avg = {{"per_class_accuracy", per},
                        {"mean_class_accuracy", mean_class_accuracy},
                        {"overall_accuracy", overall_accuracy}};
  if (nn_overall_accuracy) avg["nn_overall_accuracy"] = *nn_overall_accuracy;
  return {{"kind", "loso"},
          {"mode", mode},
          {"window", {{"window_frames", window.window_frames},
                      {"step_frames", window.step_frames},
                      {"duration_ms", window.duration_ms()}}},
          {"subjects", rows},
          {"average", avg},
          {"confusion", wip::to_json(pooled_confusion)}};
}

std::string LosoReport::to_csv() const {
  std::ostringstream out;
  out.precision(6);
  out << "subject";
  for (auto n : kGestureNames) out << ',' << n;
  out << ",mean_class_accuracy,overall_accuracy\n";
  auto cell = [&out](const std::optional<double>& v) {
    out << ',';
    if (v) out << *v;
  };
  for (const auto& f : folds) {
    out << f.subject;
    for (const auto& v : f.metrics.per_class_accuracy) cell(v);
    out << ',' << f.metrics.mean_class_accuracy << ',' << f.metrics.overall_accuracy << "\n";
  }
  out << "average";
  for (const auto& v : per_class_accuracy) cell(v);
  out << ',' << mean_class_accuracy << ',' << overall_accuracy << "\n";
  return out.str();
}

nlohmann::json window_study_json(std::span<const WindowStudyRow> rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"window_frames", r.window_frames},
                   {"step_frames", r.step_frames},
                   {"duration_ms", r.duration_ms},
                   {"mean_class_accuracy", r.mean_class_accuracy},
                   {"overall_accuracy", r.overall_accuracy}});
  }
  return {{"kind", "window_study"}, {"rows", arr}};
}

std::string window_study_csv(std::span<const WindowStudyRow> rows) {
  std::ostringstream out;
  out.precision(6);
  out << "window_frames,step_frames,duration_ms,mean_class_accuracy,overall_accuracy\n";
  for (const auto& r : rows) {
    out << r.window_frames << ',' << r.step_frames << ',' << r.duration_ms << ','
        << r.mean_class_accuracy << ',' << r.overall_accuracy << "\n";
  }
  return out.str();
}

}  // namespace wip
