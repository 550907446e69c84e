#include "wip/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "wip/kernels.hpp"

namespace wip::nn {

using kernels::Trans;

template <typename T>
Param<T>::Param(std::string n, std::vector<std::size_t> s, T fill)
    : name(std::move(n)), shape(std::move(s)) {
  std::size_t count = 1;
  for (auto d : shape) count *= d;
  value.assign(count, fill);
  grad.assign(count, T{0});
}

template <typename T>
void Param<T>::zero_grad() {
  std::fill(grad.begin(), grad.end(), T{0});
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(const std::string& name, std::size_t in, std::size_t out,
                  bool bias, std::mt19937_64& rng)
    : weight(name + ".weight", {in, out}),
      bias(name + ".bias", {bias ? out : 0}),
      in_(in),
      out_(out),
      has_bias_(bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& w : weight.value) w = static_cast<T>(u(rng));
  for (auto& b : this->bias.value) b = static_cast<T>(u(rng));
}

template <typename T>
Matrix<T> Linear<T>::forward(const Matrix<T>& x) const {
  if (x.cols() != in_) {
    throw std::invalid_argument("Linear " + weight.name + ": expected " +
                                std::to_string(in_) + " input features, got " +
                                std::to_string(x.cols()));
  }
  Matrix<T> y(x.rows(), out_);
  if (has_bias_) {
    for (std::size_t r = 0; r < y.rows(); ++r)
      std::copy(bias.value.begin(), bias.value.end(), y.row(r).begin());
  }
  kernels::gemm<T>(Trans::No, Trans::No, x.rows(), out_, in_, T{1}, x.data(),
                   in_, weight.value.data(), out_, has_bias_ ? T{1} : T{0},
                   y.data(), out_);
  return y;
}

template <typename T>
Matrix<T> Linear<T>::backward(const Matrix<T>& x, const Matrix<T>& dy,
                              bool need_dx, bool param_grads) {
  if (param_grads) {
    kernels::gemm<T>(Trans::Yes, Trans::No, in_, out_, x.rows(), T{1}, x.data(),
                     in_, dy.data(), out_, T{1}, weight.grad.data(), out_);
    if (has_bias_) {
      for (std::size_t r = 0; r < dy.rows(); ++r) {
        const auto row = dy.row(r);
        for (std::size_t c = 0; c < out_; ++c) bias.grad[c] += row[c];
      }
    }
  }
  if (!need_dx) return {};
  Matrix<T> dx(dy.rows(), in_);
  kernels::gemm<T>(Trans::No, Trans::Yes, dy.rows(), in_, out_, T{1}, dy.data(),
                   out_, weight.value.data(), out_, T{0}, dx.data(), in_);
  return dx;
}

template <typename T>
void Linear<T>::collect(std::vector<Param<T>*>& out) {
  out.push_back(&weight);
  if (has_bias_) out.push_back(&bias);
}

// ------------------------------------------------------------- BatchNorm

template <typename T>
BatchNorm<T>::BatchNorm(const std::string& n, std::size_t channels)
    : gamma(n + ".gamma", {channels}, T{1}),
      beta(n + ".beta", {channels}, T{0}),
      running_mean(channels, T{0}),
      running_var(channels, T{1}),
      name(n) {}

template <typename T>
Matrix<T> BatchNorm<T>::forward(const Matrix<T>& x, bool training,
                                Cache* cache) const {
  const std::size_t n = x.rows(), c = x.cols();
  if (c != gamma.size()) {
    throw std::invalid_argument("BatchNorm " + name + ": channel mismatch");
  }
  std::vector<T> mean(c), var(c), inv_std(c);
  if (training) {
    if (n == 0) throw std::invalid_argument("BatchNorm: empty batch");
    std::vector<double> sum(c, 0.0), sq(c, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = x.row(r);
      for (std::size_t j = 0; j < c; ++j) sum[j] += row[j];
    }
    for (std::size_t j = 0; j < c; ++j) sum[j] /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = x.row(r);
      for (std::size_t j = 0; j < c; ++j) {
        const double d = row[j] - sum[j];
        sq[j] += d * d;
      }
    }
    for (std::size_t j = 0; j < c; ++j) {
      mean[j] = static_cast<T>(sum[j]);
      var[j] = static_cast<T>(sq[j] / static_cast<double>(n));
    }
  } else {
    mean = running_mean;
    var = running_var;
  }
  for (std::size_t j = 0; j < c; ++j)
    inv_std[j] = T{1} / std::sqrt(var[j] + kEps);

  Matrix<T> y(n, c);
  Matrix<T> xhat(cache ? n : 0, cache ? c : 0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto in = x.row(r);
    auto out = y.row(r);
    for (std::size_t j = 0; j < c; ++j) {
      const T h = (in[j] - mean[j]) * inv_std[j];
      if (cache) xhat(r, j) = h;
      out[j] = gamma.value[j] * h + beta.value[j];
    }
  }
  if (cache) {
    cache->training = training;
    cache->xhat = std::move(xhat);
    cache->mean = std::move(mean);
    cache->var = std::move(var);
    cache->inv_std = std::move(inv_std);
    cache->rows = n;
  }
  return y;
}

template <typename T>
Matrix<T> BatchNorm<T>::backward(const Cache& cache, const Matrix<T>& dy,
                                 bool param_grads) {
  const std::size_t n = dy.rows(), c = dy.cols();
  std::vector<T> sum_dy(c, T{0}), sum_dy_xhat(c, T{0});
  for (std::size_t r = 0; r < n; ++r) {
    const auto g = dy.row(r);
    const auto h = cache.xhat.row(r);
    for (std::size_t j = 0; j < c; ++j) {
      sum_dy[j] += g[j];
      sum_dy_xhat[j] += g[j] * h[j];
    }
  }
  if (param_grads) {
    for (std::size_t j = 0; j < c; ++j) {
      gamma.grad[j] += sum_dy_xhat[j];
      beta.grad[j] += sum_dy[j];
    }
  }
  Matrix<T> dx(n, c);
  if (cache.training) {
    const T inv_n = T{1} / static_cast<T>(n);
    for (std::size_t r = 0; r < n; ++r) {
      const auto g = dy.row(r);
      const auto h = cache.xhat.row(r);
      auto out = dx.row(r);
      for (std::size_t j = 0; j < c; ++j) {
        const T k = gamma.value[j] * cache.inv_std[j];
        out[j] = k * (g[j] - inv_n * sum_dy[j] - h[j] * inv_n * sum_dy_xhat[j]);
      }
    }
  } else {
    for (std::size_t r = 0; r < n; ++r) {
      const auto g = dy.row(r);
      auto out = dx.row(r);
      for (std::size_t j = 0; j < c; ++j)
        out[j] = g[j] * gamma.value[j] * cache.inv_std[j];
    }
  }
  return dx;
}

template <typename T>
void BatchNorm<T>::update_running_stats(const Cache& cache) {
  if (!cache.training) return;
  const double n = static_cast<double>(cache.rows);
  const double unbias = n > 1 ? n / (n - 1) : 1.0;
  for (std::size_t j = 0; j < running_mean.size(); ++j) {
    running_mean[j] = (T{1} - kMomentum) * running_mean[j] + kMomentum * cache.mean[j];
    running_var[j] = (T{1} - kMomentum) * running_var[j] +
                     kMomentum * static_cast<T>(cache.var[j] * unbias);
  }
}

template <typename T>
void BatchNorm<T>::collect(std::vector<Param<T>*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

template <typename T>
void BatchNorm<T>::collect_buffers(std::vector<Buffer<T>>& out) {
  out.push_back({name + ".running_mean", &running_mean});
  out.push_back({name + ".running_var", &running_var});
}

// ------------------------------------------------------------------- LBR

template <typename T>
LBR<T>::LBR(const std::string& name, std::size_t in, std::size_t out,
            std::mt19937_64& rng, double drop)
    : linear(name + ".linear", in, out, /*bias=*/false, rng),
      bn(name + ".bn", out),
      dropout(drop) {}

template <typename T>
Matrix<T> LBR<T>::forward(const Matrix<T>& x, const Mode& mode,
                          Cache* cache) const {
  Matrix<T> z = linear.forward(x);
  Matrix<T> y = bn.forward(z, mode.training, cache ? &cache->bn : nullptr);
  for (auto& v : y.storage()) v = v > T{0} ? v : T{0};
  std::vector<std::uint8_t> dropped;
  if (mode.training && dropout > 0.0) {
    if (!mode.rng) throw std::logic_error("LBR: dropout requires an rng");
    std::bernoulli_distribution drop(dropout);
    const T scale = static_cast<T>(1.0 / (1.0 - dropout));
    dropped.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      dropped[i] = drop(*mode.rng) ? 1 : 0;
      y.storage()[i] = dropped[i] ? T{0} : y.storage()[i] * scale;
    }
  }
  if (cache) {
    cache->input = x;
    cache->output = y;
    cache->dropped = std::move(dropped);
  }
  return y;
}

template <typename T>
Matrix<T> LBR<T>::backward(const Cache& cache, const Matrix<T>& dy, bool need_dx,
                           bool param_grads) {
  Matrix<T> g(dy.rows(), dy.cols());
  const bool with_dropout = !cache.dropped.empty();
  const T scale = with_dropout ? static_cast<T>(1.0 / (1.0 - dropout)) : T{1};
  const auto& out = cache.output.storage();
  for (std::size_t i = 0; i < g.size(); ++i) {
    // A positive output implies the unit was active and kept.
    g.storage()[i] = out[i] > T{0} ? dy.storage()[i] * scale : T{0};
  }
  Matrix<T> dz = bn.backward(cache.bn, g, param_grads);
  return linear.backward(cache.input, dz, need_dx, param_grads);
}

template <typename T>
void LBR<T>::collect(std::vector<Param<T>*>& out) {
  linear.collect(out);
  bn.collect(out);
}

// --------------------------------------------------------------- softmax

template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& logits) {
  Matrix<T> p(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto z = logits.row(r);
    auto out = p.row(r);
    T mx = z[0];
    for (auto v : z) mx = std::max(mx, v);
    T sum = 0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      out[j] = std::exp(z[j] - mx);
      sum += out[j];
    }
    for (auto& v : out) v /= sum;
  }
  return p;
}

template <typename T>
Matrix<T> softmax_rows_backward(const Matrix<T>& p, const Matrix<T>& dp) {
  Matrix<T> dz(p.rows(), p.cols());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const auto pr = p.row(r);
    const auto gr = dp.row(r);
    T dot = 0;
    for (std::size_t j = 0; j < pr.size(); ++j) dot += pr[j] * gr[j];
    auto out = dz.row(r);
    for (std::size_t j = 0; j < pr.size(); ++j) out[j] = pr[j] * (gr[j] - dot);
  }
  return dz;
}

template struct Param<float>;
template struct Param<double>;
template class Linear<float>;
template class Linear<double>;
template class BatchNorm<float>;
template class BatchNorm<double>;
template class LBR<float>;
template class LBR<double>;
template Matrix<float> softmax_rows(const Matrix<float>&);
template Matrix<double> softmax_rows(const Matrix<double>&);
template Matrix<float> softmax_rows_backward(const Matrix<float>&,
                                             const Matrix<float>&);
template Matrix<double> softmax_rows_backward(const Matrix<double>&,
                                              const Matrix<double>&);

}  // namespace wip::nn
