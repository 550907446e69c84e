#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <limits>
#include <random>

#include "wip/evaluator.hpp"
#include "wip/synthgen.hpp"

using namespace wip;

namespace {

Gesture g(int i) { return kAllGestures[static_cast<std::size_t>(i)]; }

std::vector<Gesture> gs(std::initializer_list<int> xs) {
  std::vector<Gesture> out;
  for (int x : xs) out.push_back(g(x));
  return out;
}

PointCloudSample random_sample(std::mt19937_64& rng, int label) {
  std::uniform_real_distribution<double> u(0, 1);
  PointCloudSample s;
  s.points = Matrix<double>(18, kFeaturesPerDevice);
  for (auto& v : s.points.storage()) v = u(rng);
  s.label = g(label);
  return s;
}

GestureScript short_script(double seconds) {
  GestureScript s;
  for (Gesture x : kAllGestures) s.segments.push_back({x, seconds});
  return s;
}

}  // namespace

TEST_CASE("confusion matrix: hand-enumerated example") {
  const auto cm = confusion_matrix(gs({0, 1, 1}), gs({0, 0, 1}));
  CHECK(cm.counts[0][0] == 1);
  CHECK(cm.counts[0][1] == 1);
  CHECK(cm.counts[1][1] == 1);
  CHECK(cm.total() == 3);
  CHECK(cm.row_sum(0) == 2);
  const auto rn = cm.row_normalized();
  CHECK(rn[0][0] == 0.5);
  CHECK(rn[2][2] == 0.0);  // empty row stays zero
}

TEST_CASE("confusion matrix: all correct is diagonal") {
  std::vector<Gesture> all(kAllGestures.begin(), kAllGestures.end());
  const auto cm = confusion_matrix(all, all);
  const auto rn = cm.row_normalized();
  for (std::size_t i = 0; i < kNumGestures; ++i) {
    CHECK(rn[i][i] == 1.0);
    for (std::size_t j = 0; j < kNumGestures; ++j) {
      if (i != j) CHECK(cm.counts[i][j] == 0);
    }
  }
  const auto m = metrics(cm);
  CHECK(m.mean_class_accuracy == 1.0);
  CHECK(m.overall_accuracy == 1.0);
  CHECK(m.empty_classes.empty());
}

TEST_CASE("confusion matrix: invalid input") {
  CHECK_THROWS(confusion_matrix(std::vector<Gesture>{}, std::vector<Gesture>{}));
  CHECK_THROWS(confusion_matrix(gs({0, 1}), gs({0})));
  CHECK_THROWS(metrics(ConfusionMatrix{}));
}

TEST_CASE("metrics: mean class accuracy differs from overall under imbalance") {
  // class 0: 1 of 2 correct, class 1: 1 of 1
  const auto m = metrics(confusion_matrix(gs({0, 1, 1}), gs({0, 0, 1})));
  CHECK(m.mean_class_accuracy == doctest::Approx(0.75));
  CHECK(m.overall_accuracy == doctest::Approx(2.0 / 3.0));
  CHECK(m.samples == 3);
  CHECK(m.empty_classes.size() == 7);
  CHECK_FALSE(m.per_class_accuracy[4].has_value());
  CHECK(*m.per_class_accuracy[0] == 0.5);
  CHECK(overall_accuracy(gs({0, 1, 1}), gs({0, 0, 1})) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("1-NN matches a brute-force scan") {
  std::mt19937_64 rng(9);
  std::vector<PointCloudSample> train, test;
  for (int i = 0; i < 40; ++i) train.push_back(random_sample(rng, i % 9));
  for (int i = 0; i < 25; ++i) test.push_back(random_sample(rng, 0));
  const auto got = nearest_neighbor_predict(train, test);
  REQUIRE(got.size() == test.size());
  for (std::size_t t = 0; t < test.size(); ++t) {
    double best = std::numeric_limits<double>::infinity();
    Gesture want{};
    for (const auto& tr : train) {
      double d = 0;
      for (std::size_t k = 0; k < tr.points.size(); ++k) {
        const double diff = tr.points.storage()[k] - test[t].points.storage()[k];
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        want = tr.label;
      }
    }
    CHECK(got[t] == want);
  }
}

TEST_CASE("1-NN: exact copies and ties") {
  std::mt19937_64 rng(2);
  std::vector<PointCloudSample> train = {random_sample(rng, 3), random_sample(rng, 5)};
  CHECK(nearest_neighbor_predict(train, train) == gs({3, 5}));
  auto dup = train[0];
  dup.label = g(7);
  train.push_back(dup);
  // the duplicate ties with train[0]; the earlier sample wins
  CHECK(nearest_neighbor_predict(train, std::vector{dup}) == gs({3}));
  CHECK_THROWS(nearest_neighbor_predict(std::vector<PointCloudSample>{}, train));
}

TEST_CASE("latency: total is window duration plus median") {
  Model<float> model(ModelConfig::compact());
  const auto rep = latency_benchmark(model, WindowConfig{}, 15);
  CHECK(rep.trials == 15);
  CHECK(rep.window_duration_ms == 180.0);
  CHECK(rep.total_ms == doctest::Approx(180.0 + rep.inference_median_ms));
  CHECK(rep.inference_median_ms > 0.0);
  CHECK(rep.inference_p95_ms >= rep.inference_median_ms);
  CHECK(rep.inference_median_ms < 180.0);
}

TEST_CASE("LOSO over 3 subjects: one row per subject plus column means") {
  const auto recs = generate_dataset(3, short_script(1.0), 11);
  LosoConfig cfg;
  cfg.model = ModelConfig::compact();
  cfg.train.epochs = 1;
  cfg.train.batch_size = 16;
  std::vector<std::string> seen;
  const auto rep = loso_suite(recs, cfg, [&](const FoldResult& f) { seen.push_back(f.subject); });
  REQUIRE(rep.folds.size() == 3);
  CHECK(seen == std::vector<std::string>{"S1", "S2", "S3"});
  double mean = 0, overall = 0, nn = 0;
  for (const auto& f : rep.folds) {
    mean += f.metrics.mean_class_accuracy / 3;
    overall += f.metrics.overall_accuracy / 3;
    nn += *f.nn_overall_accuracy / 3;
    CHECK(f.target_test_windows == f.metrics.samples);
    CHECK(f.confusion.total() == f.target_test_windows);
  }
  CHECK(rep.mean_class_accuracy == doctest::Approx(mean));
  CHECK(rep.overall_accuracy == doctest::Approx(overall));
  CHECK(*rep.nn_overall_accuracy == doctest::Approx(nn));
  std::size_t pooled = 0;
  for (const auto& f : rep.folds) pooled += f.confusion.total();
  CHECK(rep.pooled_confusion.total() == pooled);

  const auto j = rep.to_json();
  CHECK(j.at("kind") == "loso");
  CHECK(j.at("subjects").size() == 3);
  const auto csv = rep.to_csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header, 3 folds, average

  cfg.subjects = {"S9"};
  CHECK_THROWS(loso_suite(recs, cfg));
}

TEST_CASE("window study: durations and step rule") {
  const auto recs = generate_dataset(2, short_script(1.0), 12);
  LosoConfig cfg;
  cfg.model = ModelConfig::compact();
  cfg.train.epochs = 1;
  cfg.train.batch_size = 16;
  cfg.nearest_neighbor = false;
  const std::vector<std::size_t> sizes = {3, 6};
  const auto rows = window_size_study(recs, sizes, cfg);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].duration_ms == 90.0);
  CHECK(rows[1].duration_ms == 180.0);
  CHECK(rows[0].step_frames == 1);
  CHECK(rows[1].step_frames == 3);
  for (const auto& r : rows) {
    CHECK(r.duration_ms == kFramePeriodMs * static_cast<double>(r.window_frames));
  }
  const auto j = window_study_json(rows);
  CHECK(j.at("kind") == "window_study");
  CHECK(j.at("rows").size() == 2);
}
