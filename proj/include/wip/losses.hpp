#pragma once

// Classification and classifier-discrepancy losses with their gradients.

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

#include "wip/matrix.hpp"

namespace wip {

// Mean over the batch of -log p(label). `probs` holds one probability row per
// sample. When `dlogits` is given it receives dL/dz for z the logits that
// produced `probs` through a row softmax, i.e. (p - onehot) / B.
template <typename T>
T classification_loss(const Matrix<T>& probs, std::span<const int> labels,
                      Matrix<T>* dlogits = nullptr) {
  const std::size_t b = probs.rows(), k = probs.cols();
  if (labels.size() != b) {
    throw std::invalid_argument("classification_loss: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(b) + " rows");
  }
  if (b == 0) throw std::invalid_argument("classification_loss: empty batch");
  long double total = 0;
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw std::invalid_argument("classification_loss: label " + std::to_string(labels[i]) +
                                  " outside [0, " + std::to_string(k) + ")");
    }
    const T p = probs(i, static_cast<std::size_t>(labels[i]));
    total -= std::log(std::max<long double>(p, std::numeric_limits<T>::min()));
  }
  if (dlogits) {
    *dlogits = probs;
    const T inv = T{1} / static_cast<T>(b);
    for (std::size_t i = 0; i < b; ++i) {
      auto row = dlogits->row(i);
      row[static_cast<std::size_t>(labels[i])] -= T{1};
      for (auto& v : row) v *= inv;
    }
  }
  return static_cast<T>(total / static_cast<long double>(b));
}

// Mean over batch and classes of |p1 - p2|. Optional outputs receive the
// (sub)gradient with respect to p1 and p2, using sign(0) = 0.
template <typename T>
T discrepancy_loss(const Matrix<T>& p1, const Matrix<T>& p2, Matrix<T>* dp1 = nullptr,
                   Matrix<T>* dp2 = nullptr) {
  if (!p1.same_shape(p2)) throw std::invalid_argument("discrepancy_loss: shape mismatch");
  if (p1.empty()) throw std::invalid_argument("discrepancy_loss: empty batch");
  const T inv = T{1} / static_cast<T>(p1.size());
  if (dp1) *dp1 = Matrix<T>(p1.rows(), p1.cols());
  if (dp2) *dp2 = Matrix<T>(p1.rows(), p1.cols());
  long double total = 0;
  for (std::size_t i = 0; i < p1.size(); ++i) {
    const T d = p1.storage()[i] - p2.storage()[i];
    total += std::abs(d);
    const T s = d > 0 ? inv : (d < 0 ? -inv : T{0});
    if (dp1) dp1->storage()[i] = s;
    if (dp2) dp2->storage()[i] = -s;
  }
  return static_cast<T>(total / static_cast<long double>(p1.size()));
}

}  // namespace wip
