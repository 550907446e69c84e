#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "wip/checkpoint.hpp"
#include "wip/dataset.hpp"
#include "wip/losses.hpp"
#include "wip/model.hpp"

using namespace wip;

namespace {

template <typename T>
Matrix<T> random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  Matrix<T> m(r, c);
  for (auto& v : m.storage()) v = static_cast<T>(u(rng));
  return m;
}

// rows of `x` reordered inside every cloud of n rows by `perm`
template <typename T>
Matrix<T> permute_rows(const Matrix<T>& x, std::size_t n, const std::vector<std::size_t>& perm) {
  Matrix<T> out(x.rows(), x.cols());
  for (std::size_t b = 0; b < x.rows() / n; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < x.cols(); ++c) out(b * n + i, c) = x(b * n + perm[i], c);
    }
  }
  return out;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.embed_dims = {6, 6};
  c.knn_k = 2;
  c.neighbor_dim = 8;
  c.attention_dim = 8;
  c.fused_dim = 10;
  c.classifier_dims = {7, 6};
  c.dropout_rate = 0.0;
  c.init_seed = 3;
  return c;
}


// summed cross-entropy of both heads plus their discrepancy, train mode
double combined_loss(const Model<double>& m, const Matrix<double>& x, std::size_t n,
                     const std::vector<int>& labels) {
  std::mt19937_64 rng(1);
  const auto mode = nn::Mode::train(&rng);
  const auto feat = m.encode(x, n, mode, nullptr);
  const auto p1 = nn::softmax_rows(m.classify(0, feat, mode, nullptr));
  const auto p2 = nn::softmax_rows(m.classify(1, feat, mode, nullptr));
  return classification_loss(p1, std::span<const int>(labels)) +
         classification_loss(p2, std::span<const int>(labels)) + discrepancy_loss(p1, p2);
}

}  // namespace

TEST_CASE("knn_group: shape and coincident points") {
  std::mt19937_64 rng(1);
  const auto x = random_matrix<double>(18, 5, rng);
  const auto g = knn_group(x, 18, 4);
  CHECK(g.rows() == 18 * 4);
  CHECK(g.cols() == 10);

  Matrix<double> dup(6, 2);
  for (std::size_t i = 0; i < 6; ++i) {
    dup(i, 0) = static_cast<double>(i / 2) * 10.0;  // pairs of identical points
    dup(i, 1) = 1.0;
  }
  std::vector<std::int32_t> nb;
  const auto gd = knn_group(dup, 6, 1, &nb);
  for (std::size_t p = 0; p < 6; ++p) {
    CHECK(nb[p] == static_cast<std::int32_t>(p ^ 1));
    CHECK(gd(p, 0) == 0.0);
    CHECK(gd(p, 1) == 0.0);
    CHECK(gd(p, 2) == dup(p, 0));
  }
}

TEST_CASE("knn_group: neighbour sets follow a row permutation") {
  std::mt19937_64 rng(2);
  const auto x = random_matrix<double>(18, 12, rng);
  std::vector<std::size_t> perm(18);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::int32_t> a, b;
  const auto ga = knn_group(x, 18, 4, &a);
  const auto gb = knn_group(permute_rows(x, 18, perm), 18, 4, &b);
  for (std::size_t i = 0; i < 18; ++i) {
    // point i of the permuted cloud is point perm[i] of the original
    std::vector<std::size_t> want, got;
    for (std::size_t q = 0; q < 4; ++q) {
      want.push_back(static_cast<std::size_t>(a[perm[i] * 4 + q]));
      got.push_back(perm[static_cast<std::size_t>(b[i * 4 + q])]);
    }
    std::sort(want.begin(), want.end());
    std::sort(got.begin(), got.end());
    CHECK(want == got);
  }
}

TEST_CASE("offset attention: shape, equivariance, normalised weights") {
  for (auto norm : {AttentionNorm::OffsetL1, AttentionNorm::ScaledSoftmax}) {
    std::mt19937_64 rng(4);
    OffsetAttention<double> oa("oa", 16, norm, rng);
    const auto x = random_matrix<double>(2 * 18, 16, rng);
    const auto y = oa.forward(x, 18, nn::Mode::eval(), nullptr);
    CHECK(y.rows() == x.rows());
    CHECK(y.cols() == x.cols());

    std::vector<std::size_t> perm(18);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto yp = oa.forward(permute_rows(x, 18, perm), 18, nn::Mode::eval(), nullptr);
    const auto py = permute_rows(y, 18, perm);
    for (std::size_t i = 0; i < y.size(); ++i) {
      CHECK(yp.storage()[i] == doctest::Approx(py.storage()[i]).epsilon(1e-5));
    }

    for (std::size_t cloud = 0; cloud < 2; ++cloud) {
      const auto w = oa.attention_weights(x, 18, cloud);
      REQUIRE(w.rows() == 18);
      for (std::size_t r = 0; r < 18; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 18; ++c) {
          CHECK(w(r, c) >= 0.0);
          s += w(r, c);
        }
        CHECK(std::abs(s - 1.0) < 1e-6);
      }
    }
  }
}

TEST_CASE("model: global feature is invariant to point order") {
  Model<float> m(ModelConfig::compact());
  std::mt19937_64 rng(5);
  const auto x = random_matrix<float>(3 * 18, 12, rng);
  const auto f = m.encode(x, 18, nn::Mode::eval(), nullptr);
  CHECK(f.rows() == 3);
  CHECK(f.cols() == ModelConfig::compact().fused_dim);
  for (int t = 0; t < 5; ++t) {
    std::vector<std::size_t> perm(18);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto fp = m.encode(permute_rows(x, 18, perm), 18, nn::Mode::eval(), nullptr);
    for (std::size_t i = 0; i < f.size(); ++i) {
      REQUIRE(std::abs(fp.storage()[i] - f.storage()[i]) <=
              1e-5f * std::max(1.0f, std::abs(f.storage()[i])));
    }
  }
}

TEST_CASE("model: degenerate and distinct inputs") {
  Model<float> m(ModelConfig::compact());
  Matrix<float> zero(18, 12);
  const auto f0 = m.encode(zero, 18, nn::Mode::eval(), nullptr);
  for (float v : f0.storage()) CHECK(std::isfinite(v));

  const auto rec = generate_recording(sample_subject(1), GestureScript::default_script(), 1);
  const auto w = segment_windows(rec, WindowConfig{});
  std::vector<PointCloudSample> all(w.begin(), w.end());
  const auto st = compute_norm_stats(all);
  const auto a = matrix_cast<float>(normalize(w[0], st).points);
  auto it = std::find_if(w.begin(), w.end(), [](const auto& s) { return s.label == Gesture::Jogging; });
  REQUIRE(it != w.end());
  const auto b = matrix_cast<float>(normalize(*it, st).points);
  const auto fa = m.encode(a, 18, nn::Mode::eval(), nullptr);
  const auto fb = m.encode(b, 18, nn::Mode::eval(), nullptr);
  double d = 0;
  for (std::size_t i = 0; i < fa.size(); ++i) d += std::pow(fa.storage()[i] - fb.storage()[i], 2);
  CHECK(d > 0.0);
}

TEST_CASE("model: logits, probabilities, eval determinism") {
  Model<float> m(ModelConfig::compact());
  std::mt19937_64 rng(6);
  const auto x = random_matrix<float>(18, 12, rng);
  const auto l1 = m.logits(0, x, 18);
  CHECK(l1.cols() == 9);
  CHECK(l1 == m.logits(0, x, 18));
  const auto p = m.predict(x);
  const double s = std::accumulate(p.probabilities.begin(), p.probabilities.end(), 0.0);
  CHECK(std::abs(s - 1.0) < 1e-6);
  const auto best = std::max_element(p.probabilities.begin(), p.probabilities.end());
  CHECK(index_of(p.label) == static_cast<std::size_t>(best - p.probabilities.begin()));

  const auto proba = m.predict_proba(x, 18);
  const auto p1 = nn::softmax_rows(m.logits(0, x, 18));
  const auto p2 = nn::softmax_rows(m.logits(1, x, 18));
  for (std::size_t c = 0; c < 9; ++c) {
    CHECK(proba(0, c) == doctest::Approx((p1(0, c) + p2(0, c)) / 2).epsilon(1e-6));
  }
  // the heads start from different initialisations
  CHECK_FALSE(p1 == p2);
}

TEST_CASE("model: agreeing heads decide the label") {
  Model<float> m(ModelConfig::compact());
  auto h1 = m.classifier_params(0);
  auto h2 = m.classifier_params(1);
  REQUIRE(h1.size() == h2.size());
  for (std::size_t i = 0; i < h1.size(); ++i) h2[i]->value = h1[i]->value;
  std::mt19937_64 rng(7);
  const auto x = random_matrix<float>(18, 12, rng);
  const auto l = m.logits(0, x, 18);
  std::size_t arg = 0;
  for (std::size_t c = 1; c < 9; ++c) {
    if (l(0, c) > l(0, arg)) arg = c;
  }
  CHECK(index_of(m.predict(x).label) == arg);
}

TEST_CASE("model: config validation") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate(18));
  c.knn_k = 18;
  CHECK_THROWS(c.validate(18));
  c = ModelConfig{};
  c.attention_dim = 10;
  CHECK_THROWS(c.validate(18));
  c = ModelConfig{};
  c.dropout_rate = 1.0;
  CHECK_THROWS(c.validate(18));
  c = ModelConfig{};
  c.n_classes = 8;
  CHECK_THROWS(c.validate(18));
}

TEST_CASE("model: analytic gradients match central finite differences") {
  for (auto norm : {AttentionNorm::OffsetL1, AttentionNorm::ScaledSoftmax}) {
    ModelConfig cfg = tiny_config();
    cfg.attention_norm = norm;
    Model<double> m(cfg);
    std::mt19937_64 rng(8);
    const std::size_t n = 6, batch = 3;
    const auto x = random_matrix<double>(batch * n, 12, rng);
    const std::vector<int> labels{0, 4, 7};

    for (auto* p : m.all_params()) p->zero_grad();
    std::mt19937_64 drop(1);
    const auto mode = nn::Mode::train(&drop);
    Model<double>::GeneratorCache gc;
    const auto feat = m.encode(x, n, mode, &gc);
    Model<double>::ClassifierCache cc[2];
    Matrix<double> p[2], dl[2];
    for (int h = 0; h < 2; ++h) {
      p[h] = nn::softmax_rows(m.classify(h, feat, mode, &cc[h]));
      classification_loss(p[h], std::span<const int>(labels), &dl[h]);
    }
    Matrix<double> dp1, dp2;
    discrepancy_loss(p[0], p[1], &dp1, &dp2);
    const auto d1 = nn::softmax_rows_backward(p[0], dp1);
    const auto d2 = nn::softmax_rows_backward(p[1], dp2);
    for (std::size_t i = 0; i < dl[0].size(); ++i) {
      dl[0].storage()[i] += d1.storage()[i];
      dl[1].storage()[i] += d2.storage()[i];
    }
    auto dfeat = m.backward_classifier(0, cc[0], dl[0], true, true);
    const auto dfeat2 = m.backward_classifier(1, cc[1], dl[1], true, true);
    for (std::size_t i = 0; i < dfeat.size(); ++i) dfeat.storage()[i] += dfeat2.storage()[i];
    m.backward_generator(gc, dfeat);

    double worst = 0;
    std::size_t checked = 0;
    const double eps = 1e-6;
    for (auto* prm : m.all_params()) {
      const std::size_t stride = std::max<std::size_t>(1, prm->size() / 12);
      for (std::size_t i = 0; i < prm->size(); i += stride) {
        const double keep = prm->value[i];
        prm->value[i] = keep + eps;
        const double up = combined_loss(m, x, n, labels);
        prm->value[i] = keep - eps;
        const double down = combined_loss(m, x, n, labels);
        prm->value[i] = keep;
        const double num = (up - down) / (2 * eps);
        const double ana = prm->grad[i];
        const double rel = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-4});
        if (rel > worst) worst = rel;
        ++checked;
      }
    }
    INFO("checked " << checked << " coordinates");
    CHECK(checked > 100);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("checkpoint round trip preserves predictions and id") {
  ModelConfig cfg = ModelConfig::compact();
  Model<float> m(cfg);
  NormalizationStats st;
  for (std::size_t c = 0; c < kFeaturesPerDevice; ++c) {
    st.min[c] = -1.0 - static_cast<double>(c);
    st.max[c] = 1.0 + static_cast<double>(c);
  }
  // non-trivial running statistics
  std::mt19937_64 rng(9);
  auto x = random_matrix<float>(4 * 18, 12, rng);
  std::mt19937_64 drop(2);
  Model<float>::GeneratorCache gc;
  m.encode(x, 18, nn::Mode::train(&drop), &gc);
  m.update_generator_stats(gc);

  const WindowConfig w;
  const nlohmann::json meta = {{"target", "S3"}};
  std::string id;
  const std::string bytes = serialize_checkpoint(m, st, w, meta, &id);
  CHECK(id.size() == 16);
  const Checkpoint ck = deserialize_checkpoint(bytes);
  CHECK(ck.model_id == id);
  CHECK(ck.stats == st);
  CHECK(ck.window == w);
  CHECK(ck.metadata.at("target") == "S3");
  CHECK(ck.model.config() == cfg);
  const auto a = m.predict_proba(x, 18);
  const auto b = ck.model.predict_proba(x, 18);
  CHECK(a == b);

  std::string id2;
  Model<float> again = ck.model;
  CHECK(serialize_checkpoint(again, st, w, meta, &id2) == bytes);
  CHECK(id2 == id);

  CHECK_THROWS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)));
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS(deserialize_checkpoint(bad));
  CHECK_THROWS(deserialize_checkpoint(""));

  const auto path = std::filesystem::temp_directory_path() / "wip_test_model.ckpt";
  CHECK(save_checkpoint(path, m, st, w, meta) == id);
  CHECK(load_checkpoint(path).model_id == id);
  CHECK_THROWS(load_checkpoint(path.string() + ".missing"));
}
