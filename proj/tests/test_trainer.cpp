#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "toy_net.hpp"
#include "wip/dataset.hpp"
#include "wip/evaluator.hpp"
#include "wip/losses.hpp"
#include "wip/mcd.hpp"
#include "wip/optim.hpp"
#include "wip/trainer.hpp"

using namespace wip;
using testing::ToyNet;

namespace {

Matrix<double> probs(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix<double> m(rows.size(), rows.begin()->size());
  std::size_t r = 0;
  for (const auto& row : rows) {
    std::size_t c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

Matrix<double> one_hot(std::size_t cls) {
  Matrix<double> m(1, 9);
  m(0, cls) = 1.0;
  return m;
}

Batch<double> toy_batch(std::mt19937_64& rng, std::size_t b, std::size_t n, bool labelled) {
  std::normal_distribution<double> g(0, 1);
  Batch<double> out;
  out.n_points = n;
  out.x = Matrix<double>(b * n, ToyNet<double>::kIn);
  for (auto& v : out.x.storage()) v = g(rng);
  if (labelled) {
    for (std::size_t i = 0; i < b; ++i) out.labels.push_back(static_cast<int>(rng() % 3));
  }
  return out;
}

std::vector<std::vector<double>> snapshot(const std::vector<nn::Param<double>*>& ps) {
  std::vector<std::vector<double>> out;
  for (const auto* p : ps) out.push_back(p->value);
  return out;
}

std::vector<std::vector<double>> running_stats(ToyNet<double>& net) {
  std::vector<nn::Buffer<double>> bufs;
  net.lbr.collect_buffers(bufs);
  std::vector<std::vector<double>> out;
  for (const auto& b : bufs) out.push_back(*b.data);
  return out;
}

DomainSplit small_split(int seconds_per_gesture, const std::string& target, std::uint64_t seed) {
  GestureScript s;
  for (Gesture g : kAllGestures) s.segments.push_back({g, static_cast<double>(seconds_per_gesture)});
  if (seconds_per_gesture == 0) s = GestureScript::default_script();
  const auto recs = generate_dataset(2, s, seed);
  return make_loso_split(recs, target, WindowConfig{}, seed);
}

}  // namespace

TEST_CASE("classification loss: analytic values") {
  Matrix<double> uniform(2, 9);
  uniform.fill(1.0 / 9.0);
  CHECK(std::abs(classification_loss(uniform, std::vector<int>{0, 8}) - std::log(9.0)) < 1e-12);
  CHECK(classification_loss(one_hot(3), std::vector<int>{3}) == doctest::Approx(0.0));
  auto half = probs({{0.5, 0.5, 0, 0, 0, 0, 0, 0, 0}});
  CHECK(classification_loss(half, std::vector<int>{0}) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS(classification_loss(uniform, std::vector<int>{0, 9}));
  CHECK_THROWS(classification_loss(uniform, std::vector<int>{0}));
}

TEST_CASE("classification loss gradient is (p - onehot) / B") {
  auto p = probs({{0.2, 0.3, 0.5}, {0.6, 0.1, 0.3}});
  Matrix<double> d;
  classification_loss(p, std::vector<int>{2, 0}, &d);
  CHECK(d(0, 2) == doctest::Approx((0.5 - 1) / 2));
  CHECK(d(0, 0) == doctest::Approx(0.2 / 2));
  CHECK(d(1, 0) == doctest::Approx((0.6 - 1) / 2));
}

TEST_CASE("discrepancy loss: identities and gradient") {
  CHECK(std::abs(discrepancy_loss(one_hot(0), one_hot(1)) - 2.0 / 9.0) < 1e-12);
  auto p = probs({{0.1, 0.2, 0.7}, {0.3, 0.3, 0.4}});
  auto q = probs({{0.3, 0.2, 0.5}, {0.1, 0.6, 0.3}});
  CHECK(discrepancy_loss(p, p) == 0.0);
  CHECK(discrepancy_loss(p, q) == discrepancy_loss(q, p));
  // mean over batch and classes of |p - q|
  const double want = (0.2 + 0 + 0.2 + 0.2 + 0.3 + 0.1) / 6.0;
  CHECK(discrepancy_loss(p, q) == doctest::Approx(want));
  Matrix<double> dp, dq;
  discrepancy_loss(p, q, &dp, &dq);
  CHECK(dp(0, 0) == doctest::Approx(-1.0 / 6));
  CHECK(dq(0, 0) == doctest::Approx(1.0 / 6));
  CHECK(dp(0, 1) == 0.0);  // equal entries give no gradient
}

TEST_CASE("adam: first step matches the closed form with decoupled decay") {
  nn::Param<double> p("w", {2});
  p.value = {1.0, -2.0};
  p.grad = {0.5, -0.25};
  AdamConfig cfg;
  Adam<double> opt({&p}, cfg);
  opt.step(0.01);
  // m_hat = g, v_hat = g^2 after bias correction
  for (int i = 0; i < 2; ++i) {
    const double v0 = i == 0 ? 1.0 : -2.0, g = i == 0 ? 0.5 : -0.25;
    const double want = v0 * (1 - 0.01 * cfg.weight_decay) - 0.01 * g / (std::abs(g) + cfg.eps);
    CHECK(p.value[i] == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK(opt.steps() == 1);
  opt.zero_grad();
  CHECK(p.grad[0] == 0.0);
}

TEST_CASE("adam: zero gradient shrinks by (1 - lr*wd) per step") {
  nn::Param<double> p("w", {3});
  p.value = {1.0, -4.0, 0.25};
  AdamConfig cfg;
  cfg.weight_decay = 0.1;
  Adam<double> opt({&p}, cfg);
  for (int k = 0; k < 5; ++k) opt.step(0.01);
  const double f = std::pow(1 - 0.01 * 0.1, 5);
  CHECK(p.value[0] == doctest::Approx(f));
  CHECK(p.value[1] == doctest::Approx(-4.0 * f));
  CHECK(p.value[2] == doctest::Approx(0.25 * f));
}

TEST_CASE("step A lowers the source loss for small lr (>= 18 of 20 seeds)") {
  int decreased = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ToyNet<double> net(seed);
    std::mt19937_64 rng(seed + 100);
    const auto src = toy_batch(rng, 8, 5, true);
    auto opt = make_optimizers(net, AdamConfig{});
    const auto mode = nn::Mode::train(nullptr);
    const double before = eval_class_loss(net, src, mode);
    step_a(net, src, opt, 1e-3, mode);
    decreased += eval_class_loss(net, src, mode) < before;
  }
  CHECK(decreased >= 18);
}

TEST_CASE("step A: lr 0 keeps parameters, generator receives gradient") {
  ToyNet<double> net(1);
  std::mt19937_64 rng(1);
  const auto src = toy_batch(rng, 8, 5, true);
  AdamConfig cfg;
  cfg.weight_decay = 0;
  auto opt = make_optimizers(net, cfg);
  const auto before = snapshot(net.all_params());
  step_a(net, src, opt, 0.0, nn::Mode::train(nullptr));
  CHECK(snapshot(net.all_params()) == before);
  double gnorm = 0;
  for (const auto* p : net.generator_params()) {
    for (double g : p->grad) gnorm += g * g;
  }
  CHECK(gnorm > 0.0);
}

TEST_CASE("step B lowers L_cls - L_dis (>= 18 of 20 seeds)") {
  int lowered = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ToyNet<double> net(seed);
    std::mt19937_64 rng(seed + 200);
    const auto src = toy_batch(rng, 8, 5, true);
    const auto tgt = toy_batch(rng, 8, 5, false);
    auto opt = make_optimizers(net, AdamConfig{});
    const auto mode = nn::Mode::train(nullptr);
    auto objective = [&] { return eval_class_loss(net, src, mode) - eval_discrepancy(net, tgt, mode); };
    const double before = objective();
    step_b(net, src, tgt, opt, 1e-3, mode);
    lowered += objective() <= before;
  }
  CHECK(lowered >= 18);
}

// With the class term present the target discrepancy can fall at random init,
// since the class gradient dominates. The ascent itself is checked alone.
TEST_CASE("step B without the class term raises the target discrepancy (>= 18 of 20 seeds)") {
  int raised = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ToyNet<double> net(seed);
    std::mt19937_64 rng(seed + 200);
    const auto src = toy_batch(rng, 8, 5, true);
    const auto tgt = toy_batch(rng, 8, 5, false);
    auto opt = make_optimizers(net, AdamConfig{});
    const auto mode = nn::Mode::train(nullptr);
    const double before = eval_discrepancy(net, tgt, mode);
    step_b(net, src, tgt, opt, 1e-3, mode, false);
    raised += eval_discrepancy(net, tgt, mode) >= before;
  }
  CHECK(raised >= 18);
}

TEST_CASE("step C lowers the target discrepancy (>= 18 of 20 seeds)") {
  int lowered = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ToyNet<double> net(seed);
    std::mt19937_64 rng(seed + 300);
    const auto tgt = toy_batch(rng, 8, 5, false);
    auto opt = make_optimizers(net, AdamConfig{});
    const auto mode = nn::Mode::train(nullptr);
    const double before = eval_discrepancy(net, tgt, mode);
    step_c(net, tgt, opt, 1e-3, mode);
    lowered += eval_discrepancy(net, tgt, mode) <= before;
  }
  CHECK(lowered >= 18);
}

TEST_CASE("freeze contracts: B keeps the generator, C keeps the classifiers") {
  ToyNet<double> net(4);
  std::mt19937_64 rng(4);
  auto opt = make_optimizers(net, AdamConfig{});
  const auto mode = nn::Mode::train(nullptr);
  for (int i = 0; i < 10; ++i) {
    const auto src = toy_batch(rng, 8, 5, true);
    const auto tgt = toy_batch(rng, 8, 5, false);
    step_a(net, src, opt, 1e-2, mode);
    const auto g = snapshot(net.generator_params());
    const auto stats = running_stats(net);
    const auto c = snapshot(net.classifier_params());
    step_b(net, src, tgt, opt, 1e-2, mode);
    REQUIRE(snapshot(net.generator_params()) == g);
    REQUIRE(running_stats(net) == stats);
    REQUIRE_FALSE(snapshot(net.classifier_params()) == c);
    const auto c2 = snapshot(net.classifier_params());
    step_c(net, tgt, opt, 1e-2, mode, 2);
    REQUIRE(snapshot(net.classifier_params()) == c2);
    REQUIRE_FALSE(snapshot(net.generator_params()) == g);
  }
}

TEST_CASE("step B without the class term sits on a saddle when F1 == F2") {
  ToyNet<double> net(5);
  net.heads[1] = net.heads[0];
  std::mt19937_64 rng(5);
  const auto src = toy_batch(rng, 8, 5, true);
  const auto tgt = toy_batch(rng, 8, 5, false);
  auto opt = make_optimizers(net, AdamConfig{});
  const auto out = step_b(net, src, tgt, opt, 1e-2, nn::Mode::train(nullptr), false);
  CHECK(out.disc_loss == 0.0);
  for (const auto* p : net.classifier_params()) {
    for (double g : p->grad) CHECK(g == 0.0);
  }
}

TEST_CASE("step C applies generator_steps updates") {
  ToyNet<double> net(6);
  std::mt19937_64 rng(6);
  const auto tgt = toy_batch(rng, 8, 5, false);
  auto opt = make_optimizers(net, AdamConfig{});
  step_c(net, tgt, opt, 1e-3, nn::Mode::train(nullptr), 2);
  CHECK(opt.generator.steps() == 2);
  CHECK(opt.classifiers.steps() == 0);
}

TEST_CASE("learning rate schedule") {
  TrainConfig c;
  c.epochs = 10;
  CHECK(learning_rate_at(c, 0) == doctest::Approx(1e-3));
  CHECK(learning_rate_at(c, 5) == doctest::Approx(0.5e-3));
  CHECK(learning_rate_at(c, 9) < learning_rate_at(c, 8));
  c.lr_schedule = LrSchedule::None;
  CHECK(learning_rate_at(c, 9) == 1e-3);
}

TEST_CASE("train config defaults and JSON round trip") {
  const TrainConfig d;
  CHECK(d.learning_rate == 1e-3);
  CHECK(d.weight_decay == 1e-4);
  CHECK(d.batch_size == 64);
  CHECK(d.epochs == 250);
  TrainConfig c;
  c.mode = TrainMode::SourceOnly;
  c.granularity = StepGranularity::PerEpoch;
  c.epochs = 7;
  const auto back = train_config_from_json(to_json(c));
  CHECK(back.mode == TrainMode::SourceOnly);
  CHECK(back.granularity == StepGranularity::PerEpoch);
  CHECK(back.epochs == 7);
  ModelConfig m = ModelConfig::compact();
  m.attention_norm = AttentionNorm::ScaledSoftmax;
  CHECK(model_config_from_json(to_json(m)) == m);
  CHECK_THROWS(parse_train_mode("adversarial"));
  c.batch_size = 1;
  CHECK_THROWS(c.validate());
}

TEST_CASE("fit: deterministic, source-only has no discrepancy column") {
  const auto split = small_split(2, "S2", 3);
  TrainConfig t;
  t.epochs = 2;
  t.batch_size = 16;
  const auto a = fit(split, ModelConfig::compact(), t);
  const auto b = fit(split, ModelConfig::compact(), t);
  CHECK(a.history.to_csv() == b.history.to_csv());
  CHECK(a.history.to_csv().rfind("epoch,step,class_loss,disc_loss\n", 0) == 0);
  CHECK(a.history.epochs.size() == 2);
  for (const auto& r : a.history.steps) CHECK(r.disc_loss.has_value());

  t.mode = TrainMode::SourceOnly;
  const auto s = fit(split, ModelConfig::compact(), t);
  CHECK(s.history.to_csv().rfind("epoch,step,class_loss\n", 0) == 0);
  for (const auto& r : s.history.steps) CHECK_FALSE(r.disc_loss.has_value());
  CHECK_FALSE(s.history.has_discrepancy);
}

TEST_CASE("fit: zero epochs returns the initialised model") {
  const auto split = small_split(1, "S1", 4);
  TrainConfig t;
  t.epochs = 0;
  const auto r = fit(split, ModelConfig::compact(), t);
  CHECK(r.history.steps.empty());
  Model<float> fresh(ModelConfig::compact());
  auto trained = r.model;
  CHECK(trained.all_params().front()->value == fresh.all_params().front()->value);
  CHECK_THROWS(fit(DomainSplit{}, ModelConfig::compact(), t));
}

TEST_CASE("fit: two subjects, 20 epochs -> source accuracy >= 95%") {
  const auto split = small_split(0, "S2", 5);
  TrainConfig t;
  t.epochs = 20;
  const auto r = fit(split, ModelConfig{}, t);
  std::vector<PointCloudSample> xs;
  std::vector<Gesture> labels;
  for (const auto& s : split.source) {
    xs.push_back(normalize(s, r.stats));
    labels.push_back(s.label);
  }
  const double acc = overall_accuracy(predict_labels(r.model, xs), labels);
  INFO("source accuracy " << acc);
  CHECK(acc >= 0.95);
}
