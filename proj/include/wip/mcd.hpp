#pragma once

// The three adversarial update steps, written against any network exposing
// a generator and two classifier heads:
//   A: minimise source cross-entropy of both heads; update G, F1, F2.
//   B: G frozen; minimise source cross-entropy minus target discrepancy;
//      update F1, F2.
//   C: F1, F2 frozen; minimise target discrepancy; update G (n times).
// Frozen modules are neither stepped nor have their batch-norm running
// statistics refreshed, so they stay bit-identical.

#include <concepts>
#include <vector>

#include "wip/losses.hpp"
#include "wip/matrix.hpp"
#include "wip/nn.hpp"
#include "wip/optim.hpp"

namespace wip {

template <typename N>
concept TwoHeadNet = requires(N net, const N cnet, const Matrix<typename N::Scalar>& x,
                              const nn::Mode& mode, typename N::GeneratorCache* gc,
                              typename N::ClassifierCache* cc) {
  { cnet.encode(x, std::size_t{}, mode, gc) } -> std::same_as<Matrix<typename N::Scalar>>;
  { cnet.classify(0, x, mode, cc) } -> std::same_as<Matrix<typename N::Scalar>>;
  net.backward_classifier(0, *cc, x, true, true);
  net.backward_generator(*gc, x);
  net.update_generator_stats(*gc);
  net.update_classifier_stats(0, *cc);
  { net.generator_params() } -> std::same_as<std::vector<nn::Param<typename N::Scalar>*>>;
  { net.classifier_params() } -> std::same_as<std::vector<nn::Param<typename N::Scalar>*>>;
};

template <typename T>
struct Batch {
  Matrix<T> x;  // batch * n_points rows
  std::size_t n_points = 0;
  std::vector<int> labels;  // empty for target batches
  std::size_t size() const { return n_points ? x.rows() / n_points : 0; }
};

struct StepLosses {
  double class_loss = 0;  // summed over both heads
  double disc_loss = 0;
};

template <typename T>
struct McdOptimizers {
  Adam<T> generator;
  Adam<T> classifiers;
};

template <TwoHeadNet N>
McdOptimizers<typename N::Scalar> make_optimizers(N& net, const AdamConfig& cfg) {
  return {Adam<typename N::Scalar>(net.generator_params(), cfg),
          Adam<typename N::Scalar>(net.classifier_params(), cfg)};
}

namespace detail {

template <typename T>
void add_into(Matrix<T>& acc, const Matrix<T>& d) {
  if (acc.empty()) {
    acc = d;
    return;
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc.storage()[i] += d.storage()[i];
}

template <typename T>
void scale(Matrix<T>& m, T s) {
  for (auto& v : m.storage()) v *= s;
}

}  // namespace detail

template <TwoHeadNet N>
StepLosses step_a(N& net, const Batch<typename N::Scalar>& src,
                  McdOptimizers<typename N::Scalar>& opt, double lr, const nn::Mode& mode) {
  using T = typename N::Scalar;
  opt.generator.zero_grad();
  opt.classifiers.zero_grad();
  typename N::GeneratorCache gc;
  const Matrix<T> feat = net.encode(src.x, src.n_points, mode, &gc);
  typename N::ClassifierCache cc[2];
  Matrix<T> dfeat;
  StepLosses out;
  for (int h = 0; h < 2; ++h) {
    const Matrix<T> p = nn::softmax_rows(net.classify(h, feat, mode, &cc[h]));
    Matrix<T> dlogits;
    out.class_loss += classification_loss(p, src.labels, &dlogits);
    detail::add_into(dfeat, net.backward_classifier(h, cc[h], dlogits, true, true));
  }
  net.backward_generator(gc, dfeat);
  opt.generator.step(lr);
  opt.classifiers.step(lr);
  net.update_generator_stats(gc);
  net.update_classifier_stats(0, cc[0]);
  net.update_classifier_stats(1, cc[1]);
  return out;
}

// `with_class_loss` = false drops the source term (used to probe the saddle
// at F1 = F2).
template <TwoHeadNet N>
StepLosses step_b(N& net, const Batch<typename N::Scalar>& src,
                  const Batch<typename N::Scalar>& tgt,
                  McdOptimizers<typename N::Scalar>& opt, double lr, const nn::Mode& mode,
                  bool with_class_loss = true) {
  using T = typename N::Scalar;
  opt.classifiers.zero_grad();
  StepLosses out;
  typename N::ClassifierCache cs[2], ct[2];
  if (with_class_loss) {
    const Matrix<T> feat_s = net.encode(src.x, src.n_points, mode, nullptr);
    for (int h = 0; h < 2; ++h) {
      const Matrix<T> p = nn::softmax_rows(net.classify(h, feat_s, mode, &cs[h]));
      Matrix<T> dlogits;
      out.class_loss += classification_loss(p, src.labels, &dlogits);
      net.backward_classifier(h, cs[h], dlogits, false, true);
    }
  }
  const Matrix<T> feat_t = net.encode(tgt.x, tgt.n_points, mode, nullptr);
  const Matrix<T> p1 = nn::softmax_rows(net.classify(0, feat_t, mode, &ct[0]));
  const Matrix<T> p2 = nn::softmax_rows(net.classify(1, feat_t, mode, &ct[1]));
  Matrix<T> dp1, dp2;
  out.disc_loss = discrepancy_loss(p1, p2, &dp1, &dp2);
  // maximise the discrepancy: descend on its negative
  detail::scale(dp1, T{-1});
  detail::scale(dp2, T{-1});
  net.backward_classifier(0, ct[0], nn::softmax_rows_backward(p1, dp1), false, true);
  net.backward_classifier(1, ct[1], nn::softmax_rows_backward(p2, dp2), false, true);
  opt.classifiers.step(lr);
  for (int h = 0; h < 2; ++h) {
    if (with_class_loss) net.update_classifier_stats(h, cs[h]);
    net.update_classifier_stats(h, ct[h]);
  }
  return out;
}

// Returns the discrepancy measured before the first generator update.
template <TwoHeadNet N>
StepLosses step_c(N& net, const Batch<typename N::Scalar>& tgt,
                  McdOptimizers<typename N::Scalar>& opt, double lr, const nn::Mode& mode,
                  int generator_steps = 1) {
  using T = typename N::Scalar;
  StepLosses out;
  for (int s = 0; s < generator_steps; ++s) {
    opt.generator.zero_grad();
    typename N::GeneratorCache gc;
    const Matrix<T> feat = net.encode(tgt.x, tgt.n_points, mode, &gc);
    typename N::ClassifierCache cc[2];
    const Matrix<T> p1 = nn::softmax_rows(net.classify(0, feat, mode, &cc[0]));
    const Matrix<T> p2 = nn::softmax_rows(net.classify(1, feat, mode, &cc[1]));
    Matrix<T> dp1, dp2;
    const T dis = discrepancy_loss(p1, p2, &dp1, &dp2);
    if (s == 0) out.disc_loss = dis;
    Matrix<T> dfeat = net.backward_classifier(0, cc[0], nn::softmax_rows_backward(p1, dp1),
                                              true, false);
    detail::add_into(dfeat, net.backward_classifier(1, cc[1],
                                                    nn::softmax_rows_backward(p2, dp2),
                                                    true, false));
    net.backward_generator(gc, dfeat);
    opt.generator.step(lr);
    net.update_generator_stats(gc);
  }
  return out;
}

// Loss values of the current parameters on fixed batches, without updating
// anything. Pass a copy of the dropout generator to replay the same masks.
template <TwoHeadNet N>
double eval_class_loss(const N& net, const Batch<typename N::Scalar>& src, const nn::Mode& mode) {
  using T = typename N::Scalar;
  const Matrix<T> feat = net.encode(src.x, src.n_points, mode, nullptr);
  double total = 0;
  for (int h = 0; h < 2; ++h) {
    total += classification_loss(nn::softmax_rows(net.classify(h, feat, mode, nullptr)),
                                 std::span<const int>(src.labels));
  }
  return total;
}

template <TwoHeadNet N>
double eval_discrepancy(const N& net, const Batch<typename N::Scalar>& tgt, const nn::Mode& mode) {
  using T = typename N::Scalar;
  const Matrix<T> feat = net.encode(tgt.x, tgt.n_points, mode, nullptr);
  const Matrix<T> p1 = nn::softmax_rows(net.classify(0, feat, mode, nullptr));
  const Matrix<T> p2 = nn::softmax_rows(net.classify(1, feat, mode, nullptr));
  return discrepancy_loss(p1, p2);
}

}  // namespace wip
