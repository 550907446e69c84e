#pragma once

// Minimal layer library with explicit forward caches and hand-written
// backward passes. Forward passes are const: parameters are never touched,
// so concurrent inference on one model is safe. Backward passes accumulate
// into Param::grad. Batch-norm running statistics change only through
// update_running_stats(), called by the trainer for modules being trained.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wip/matrix.hpp"

namespace wip::nn {

template <typename T>
struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> value;
  std::vector<T> grad;

  Param() = default;
  Param(std::string n, std::vector<std::size_t> s, T fill = T{0});

  std::size_t size() const { return value.size(); }
  void zero_grad();
};

// Named non-trainable state (batch-norm running statistics).
template <typename T>
struct Buffer {
  std::string name;
  std::vector<T>* data = nullptr;
};

struct Mode {
  bool training = false;
  // Dropout mask source; required when training with dropout > 0.
  std::mt19937_64* rng = nullptr;

  static Mode eval() { return {}; }
  static Mode train(std::mt19937_64* r) { return {true, r}; }
};

// y = x W + b with W stored in x in-features by out-features layout.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, bool bias,
         std::mt19937_64& rng);

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

  Matrix<T> forward(const Matrix<T>& x) const;
  // Accumulates parameter gradients from the cached input x; returns dL/dx
  // unless need_dx is false (then an empty matrix).
  Matrix<T> backward(const Matrix<T>& x, const Matrix<T>& dy, bool need_dx = true,
                     bool param_grads = true);

  void collect(std::vector<Param<T>*>& out);

  Param<T> weight;
  Param<T> bias;

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  bool has_bias_ = false;
};

template <typename T>
class BatchNorm {
 public:
  struct Cache {
    bool training = false;
    Matrix<T> xhat;
    std::vector<T> mean;
    std::vector<T> var;
    std::vector<T> inv_std;
    std::size_t rows = 0;
  };

  BatchNorm() = default;
  BatchNorm(const std::string& name, std::size_t channels);

  Matrix<T> forward(const Matrix<T>& x, bool training, Cache* cache) const;
  Matrix<T> backward(const Cache& cache, const Matrix<T>& dy,
                     bool param_grads = true);
  void update_running_stats(const Cache& cache);

  void collect(std::vector<Param<T>*>& out);
  void collect_buffers(std::vector<Buffer<T>>& out);

  Param<T> gamma;
  Param<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  std::string name;

  static constexpr T kEps = T(1e-5);
  static constexpr T kMomentum = T(0.1);
};

// Linear -> BatchNorm -> ReLU, optionally followed by inverted dropout
// (the LBRD variant).
template <typename T>
class LBR {
 public:
  struct Cache {
    Matrix<T> input;
    typename BatchNorm<T>::Cache bn;
    Matrix<T> output;  // after ReLU and dropout
    std::vector<std::uint8_t> dropped;
  };

  LBR() = default;
  LBR(const std::string& name, std::size_t in, std::size_t out,
      std::mt19937_64& rng, double dropout = 0.0);

  std::size_t out_features() const { return linear.out_features(); }
  std::size_t in_features() const { return linear.in_features(); }

  Matrix<T> forward(const Matrix<T>& x, const Mode& mode, Cache* cache) const;
  Matrix<T> backward(const Cache& cache, const Matrix<T>& dy, bool need_dx = true,
                     bool param_grads = true);
  void update_running_stats(const Cache& cache) { bn.update_running_stats(cache.bn); }

  void collect(std::vector<Param<T>*>& out);
  void collect_buffers(std::vector<Buffer<T>>& out) { bn.collect_buffers(out); }

  Linear<T> linear;
  BatchNorm<T> bn;
  double dropout = 0.0;
};

// Row-wise softmax of a logits matrix.
template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& logits);

// Backward of softmax_rows: given p = softmax(z) and dL/dp, returns dL/dz.
template <typename T>
Matrix<T> softmax_rows_backward(const Matrix<T>& p, const Matrix<T>& dp);

}  // namespace wip::nn
