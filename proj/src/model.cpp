#include "wip/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "wip/kernels.hpp"
#include "wip/seed.hpp"

namespace wip {

void ModelConfig::validate(std::size_t n_points) const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("ModelConfig: " + m); };
  if (input_dim == 0) fail("input_dim must be positive");
  if (embed_dims[0] == 0 || embed_dims[1] == 0) fail("embed_dims must be positive");
  if (neighbor_dim == 0 || attention_dim == 0 || fused_dim == 0) fail("widths must be positive");
  if (attention_dim % 4 != 0) fail("attention_dim must be divisible by 4");
  if (classifier_dims[0] == 0 || classifier_dims[1] == 0) fail("classifier_dims must be positive");
  if (n_attention != 4) fail("n_attention is fixed at 4");
  if (n_classes != kNumGestures) fail("n_classes must be 9");
  if (knn_k == 0) fail("knn_k must be positive");
  if (n_points != 0 && knn_k >= n_points) fail("knn_k must be smaller than the number of points");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must be in [0, 1)");
}

ModelConfig ModelConfig::compact() {
  ModelConfig c;
  c.embed_dims = {32, 32};
  c.neighbor_dim = 64;
  c.attention_dim = 64;
  c.fused_dim = 256;
  c.classifier_dims = {128, 64};
  return c;
}

// ------------------------------------------------------------- knn_group

template <typename T>
Matrix<T> knn_group(const Matrix<T>& features, std::size_t group_size,
                    std::size_t k, std::vector<std::int32_t>* neighbours) {
  const std::size_t rows = features.rows(), c = features.cols();
  if (group_size == 0 || rows % group_size != 0) {
    throw std::invalid_argument("knn_group: rows must be a multiple of the cloud size");
  }
  if (k >= group_size) {
    throw std::invalid_argument("knn_group: k must be smaller than the number of points");
  }
  const std::size_t groups = rows / group_size;
  std::vector<std::int32_t> idx(rows * k);
  kernels::knn_groups<T>(features.data(), groups, group_size, c, k, idx);
  Matrix<T> out(rows * k, 2 * c);
  for (std::size_t p = 0; p < rows; ++p) {
    const std::size_t base = (p / group_size) * group_size;
    const auto center = features.row(p);
    for (std::size_t q = 0; q < k; ++q) {
      const auto nbr = features.row(base + static_cast<std::size_t>(idx[p * k + q]));
      auto dst = out.row(p * k + q);
      for (std::size_t j = 0; j < c; ++j) {
        dst[j] = nbr[j] - center[j];
        dst[c + j] = center[j];
      }
    }
  }
  if (neighbours) *neighbours = std::move(idx);
  return out;
}

// ---------------------------------------------------- NeighborEmbedding

template <typename T>
NeighborEmbedding<T>::NeighborEmbedding(const std::string& name, std::size_t in_dim,
                                        std::size_t out_dim, std::size_t knn_k,
                                        std::mt19937_64& rng)
    : lbr(name + ".lbr", 2 * in_dim, out_dim, rng), k(knn_k) {}

template <typename T>
Matrix<T> NeighborEmbedding<T>::forward(const Matrix<T>& x, std::size_t group_size,
                                        const nn::Mode& mode, Cache* cache) const {
  std::vector<std::int32_t> nbrs;
  Matrix<T> grouped = knn_group(x, group_size, k, &nbrs);
  Matrix<T> h = lbr.forward(grouped, mode, cache ? &cache->lbr : nullptr);
  const std::size_t rows = x.rows(), out_dim = h.cols();
  Matrix<T> y(rows, out_dim);
  std::vector<std::int32_t> argmax(cache ? rows * out_dim : 0);
  for (std::size_t p = 0; p < rows; ++p) {
    auto dst = y.row(p);
    for (std::size_t j = 0; j < out_dim; ++j) {
      T best = h(p * k, j);
      std::int32_t slot = 0;
      for (std::size_t q = 1; q < k; ++q) {
        const T v = h(p * k + q, j);
        if (v > best) {
          best = v;
          slot = static_cast<std::int32_t>(q);
        }
      }
      dst[j] = best;
      if (cache) argmax[p * out_dim + j] = slot;
    }
  }
  if (cache) {
    cache->neighbours = std::move(nbrs);
    cache->argmax = std::move(argmax);
    cache->in_dim = x.cols();
    cache->group_size = group_size;
  }
  return y;
}

template <typename T>
Matrix<T> NeighborEmbedding<T>::backward(const Cache& cache, const Matrix<T>& dy,
                                         bool param_grads) {
  const std::size_t rows = dy.rows(), out_dim = dy.cols(), c = cache.in_dim;
  Matrix<T> dh(rows * k, out_dim);
  for (std::size_t p = 0; p < rows; ++p)
    for (std::size_t j = 0; j < out_dim; ++j)
      dh(p * k + static_cast<std::size_t>(cache.argmax[p * out_dim + j]), j) = dy(p, j);
  Matrix<T> dgrouped = lbr.backward(cache.lbr, dh, true, param_grads);
  Matrix<T> dx(rows, c);
  for (std::size_t p = 0; p < rows; ++p) {
    const std::size_t base = (p / cache.group_size) * cache.group_size;
    for (std::size_t q = 0; q < k; ++q) {
      const auto g = dgrouped.row(p * k + q);
      auto dnbr = dx.row(base + static_cast<std::size_t>(cache.neighbours[p * k + q]));
      for (std::size_t j = 0; j < c; ++j) dnbr[j] += g[j];
      auto dcenter = dx.row(p);
      for (std::size_t j = 0; j < c; ++j) dcenter[j] += g[c + j] - g[j];
    }
  }
  return dx;
}

// ------------------------------------------------------ OffsetAttention

template <typename T>
OffsetAttention<T>::OffsetAttention(const std::string& name, std::size_t dim,
                                    AttentionNorm n, std::mt19937_64& rng)
    : wq(name + ".q", dim, dim / 4, false, rng),
      wk(name + ".k", dim, dim / 4, false, rng),
      wv(name + ".v", dim, dim, true, rng),
      trans(name + ".trans", dim, dim, rng),
      norm(n) {}

template <typename T>
void OffsetAttention<T>::attend(const Matrix<T>& q, const Matrix<T>& k,
                                const Matrix<T>& v, std::size_t n,
                                Matrix<T>& f_att, Matrix<T>* softmax,
                                Matrix<T>* weights,
                                std::vector<T>* row_sums) const {
  const std::size_t rows = q.rows(), dk = q.cols(), dv = v.cols();
  const std::size_t clouds = rows / n;
  f_att = Matrix<T>(rows, dv);
  if (softmax) *softmax = Matrix<T>(rows, n);
  if (weights) *weights = Matrix<T>(rows, n);
  if (row_sums) row_sums->assign(rows, T{0});
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk)));

#pragma omp parallel for schedule(static)
  for (std::size_t b = 0; b < clouds; ++b) {
    const std::size_t base = b * n;
    std::vector<T> s(n * n), a(n * n), w(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto qi = q.row(base + i);
      for (std::size_t j = 0; j < n; ++j) {
        const auto kj = k.row(base + j);
        T dot = 0;
        for (std::size_t c = 0; c < dk; ++c) dot += qi[c] * kj[c];
        s[i * n + j] = dot;
      }
    }
    if (norm == AttentionNorm::OffsetL1) {
      for (std::size_t j = 0; j < n; ++j) {
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, s[i * n + j]);
        T sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
          a[i * n + j] = std::exp(s[i * n + j] - mx);
          sum += a[i * n + j];
        }
        for (std::size_t i = 0; i < n; ++i) a[i * n + j] /= sum;
      }
      for (std::size_t i = 0; i < n; ++i) {
        T r = 0;
        for (std::size_t j = 0; j < n; ++j) r += a[i * n + j];
        if (row_sums) (*row_sums)[base + i] = r;
        const T denom = T(1e-9) + r;
        for (std::size_t j = 0; j < n; ++j) w[i * n + j] = a[i * n + j] / denom;
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, s[i * n + j] * scale);
        T sum = 0;
        for (std::size_t j = 0; j < n; ++j) {
          a[i * n + j] = std::exp(s[i * n + j] * scale - mx);
          sum += a[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) {
          a[i * n + j] /= sum;
          w[i * n + j] = a[i * n + j];
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto fi = f_att.row(base + i);
      for (std::size_t j = 0; j < n; ++j) {
        const T wij = w[i * n + j];
        const auto vj = v.row(base + j);
        for (std::size_t c = 0; c < dv; ++c) fi[c] += wij * vj[c];
      }
      if (softmax)
        std::copy_n(a.begin() + static_cast<std::ptrdiff_t>(i * n), n, softmax->row(base + i).begin());
      if (weights)
        std::copy_n(w.begin() + static_cast<std::ptrdiff_t>(i * n), n, weights->row(base + i).begin());
    }
  }
}

template <typename T>
Matrix<T> OffsetAttention<T>::forward(const Matrix<T>& x, std::size_t n,
                                      const nn::Mode& mode, Cache* cache) const {
  if (n == 0 || x.rows() % n != 0) {
    throw std::invalid_argument("OffsetAttention: rows must be a multiple of the cloud size");
  }
  Matrix<T> q = wq.forward(x), k = wk.forward(x), v = wv.forward(x);
  Matrix<T> f_att;
  attend(q, k, v, n, f_att, cache ? &cache->softmax : nullptr,
         cache ? &cache->weights : nullptr, cache ? &cache->row_sums : nullptr);
  Matrix<T> offset(x.rows(), x.cols());
  for (std::size_t i = 0; i < offset.size(); ++i)
    offset.storage()[i] = x.storage()[i] - f_att.storage()[i];
  Matrix<T> out = trans.forward(offset, mode, cache ? &cache->lbr : nullptr);
  for (std::size_t i = 0; i < out.size(); ++i) out.storage()[i] += x.storage()[i];
  if (cache) {
    cache->input = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->group_size = n;
  }
  return out;
}

template <typename T>
Matrix<T> OffsetAttention<T>::backward(const Cache& c, const Matrix<T>& dy,
                                       bool param_grads) {
  const std::size_t rows = dy.rows(), n = c.group_size;
  const std::size_t dk = c.q.cols(), dv = c.v.cols();
  const std::size_t clouds = rows / n;
  Matrix<T> dx = dy;
  Matrix<T> doffset = trans.backward(c.lbr, dy, true, param_grads);
  for (std::size_t i = 0; i < dx.size(); ++i) dx.storage()[i] += doffset.storage()[i];
  // f_att enters with a minus sign.
  Matrix<T> dq(rows, dk), dkm(rows, dk), dvm(rows, dv);
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk)));

#pragma omp parallel for schedule(static)
  for (std::size_t b = 0; b < clouds; ++b) {
    const std::size_t base = b * n;
    std::vector<T> dw(n * n), ds(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto dfi = doffset.row(base + i);
      for (std::size_t j = 0; j < n; ++j) {
        const auto vj = c.v.row(base + j);
        T dot = 0;
        for (std::size_t ch = 0; ch < dv; ++ch) dot -= dfi[ch] * vj[ch];
        dw[i * n + j] = dot;
        const T wij = c.weights(base + i, j);
        auto dvj = dvm.row(base + j);
        for (std::size_t ch = 0; ch < dv; ++ch) dvj[ch] -= wij * dfi[ch];
      }
    }
    if (norm == AttentionNorm::OffsetL1) {
      std::vector<T> da(n * n);
      for (std::size_t i = 0; i < n; ++i) {
        const T denom = T(1e-9) + c.row_sums[base + i];
        T s = 0;
        for (std::size_t j = 0; j < n; ++j) s += dw[i * n + j] * c.softmax(base + i, j);
        for (std::size_t j = 0; j < n; ++j)
          da[i * n + j] = dw[i * n + j] / denom - s / (denom * denom);
      }
      for (std::size_t j = 0; j < n; ++j) {
        T dot = 0;
        for (std::size_t i = 0; i < n; ++i) dot += c.softmax(base + i, j) * da[i * n + j];
        for (std::size_t i = 0; i < n; ++i)
          ds[i * n + j] = c.softmax(base + i, j) * (da[i * n + j] - dot);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        T dot = 0;
        for (std::size_t j = 0; j < n; ++j) dot += c.weights(base + i, j) * dw[i * n + j];
        for (std::size_t j = 0; j < n; ++j)
          ds[i * n + j] = c.weights(base + i, j) * (dw[i * n + j] - dot) * scale;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto dqi = dq.row(base + i);
      const auto qi = c.q.row(base + i);
      for (std::size_t j = 0; j < n; ++j) {
        const T g = ds[i * n + j];
        const auto kj = c.k.row(base + j);
        auto dkj = dkm.row(base + j);
        for (std::size_t ch = 0; ch < dk; ++ch) {
          dqi[ch] += g * kj[ch];
          dkj[ch] += g * qi[ch];
        }
      }
    }
  }
  auto accumulate = [&dx](const Matrix<T>& d) {
    for (std::size_t i = 0; i < dx.size(); ++i) dx.storage()[i] += d.storage()[i];
  };
  accumulate(wq.backward(c.input, dq, true, param_grads));
  accumulate(wk.backward(c.input, dkm, true, param_grads));
  accumulate(wv.backward(c.input, dvm, true, param_grads));
  return dx;
}

template <typename T>
Matrix<T> OffsetAttention<T>::attention_weights(const Matrix<T>& x, std::size_t n,
                                                std::size_t cloud) const {
  Matrix<T> q = wq.forward(x), k = wk.forward(x), v = wv.forward(x);
  Matrix<T> f_att, weights;
  attend(q, k, v, n, f_att, nullptr, &weights, nullptr);
  Matrix<T> out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(weights.row(cloud * n + i).begin(), n, out.row(i).begin());
  return out;
}

template <typename T>
void OffsetAttention<T>::collect(std::vector<nn::Param<T>*>& out) {
  wq.collect(out);
  wk.collect(out);
  wv.collect(out);
  trans.collect(out);
}

// ------------------------------------------------------------ Generator

template <typename T>
Generator<T>::Generator(const ModelConfig& cfg, std::mt19937_64& rng)
    : embed1("g.embed1", cfg.input_dim, cfg.embed_dims[0], rng),
      embed2("g.embed2", cfg.embed_dims[0], cfg.embed_dims[1], rng),
      neighbor("g.neighbor", cfg.embed_dims[1], cfg.neighbor_dim, cfg.knn_k, rng),
      has_projection(cfg.neighbor_dim != cfg.attention_dim) {
  if (has_projection)
    project = nn::LBR<T>("g.project", cfg.neighbor_dim, cfg.attention_dim, rng);
  for (std::size_t i = 0; i < cfg.n_attention; ++i) {
    attention.emplace_back("g.oa" + std::to_string(i + 1), cfg.attention_dim,
                           cfg.attention_norm, rng);
  }
  fuse = nn::LBR<T>("g.fuse", cfg.n_attention * cfg.attention_dim, cfg.fused_dim, rng);
}

template <typename T>
Matrix<T> Generator<T>::forward(const Matrix<T>& x, std::size_t n,
                                const nn::Mode& mode, Cache* cache) const {
  if (n == 0 || x.rows() % n != 0 || x.rows() == 0) {
    throw std::invalid_argument("Generator: input rows must be a positive multiple of the cloud size");
  }
  if (x.cols() != embed1.in_features()) {
    throw std::invalid_argument("Generator: expected " +
                                std::to_string(embed1.in_features()) +
                                " features per point, got " + std::to_string(x.cols()));
  }
  Matrix<T> h = embed1.forward(x, mode, cache ? &cache->embed1 : nullptr);
  h = embed2.forward(h, mode, cache ? &cache->embed2 : nullptr);
  h = neighbor.forward(h, n, mode, cache ? &cache->neighbor : nullptr);
  if (has_projection) h = project.forward(h, mode, cache ? &cache->project : nullptr);

  const std::size_t d = h.cols(), blocks = attention.size();
  Matrix<T> concat(x.rows(), d * blocks);
  if (cache) cache->attention.resize(blocks);
  for (std::size_t a = 0; a < blocks; ++a) {
    h = attention[a].forward(h, n, mode, cache ? &cache->attention[a] : nullptr);
    for (std::size_t r = 0; r < h.rows(); ++r)
      std::copy(h.row(r).begin(), h.row(r).end(), concat.row(r).begin() + static_cast<std::ptrdiff_t>(a * d));
  }
  Matrix<T> fused = fuse.forward(concat, mode, cache ? &cache->fuse : nullptr);

  const std::size_t clouds = x.rows() / n, fd = fused.cols();
  Matrix<T> pooled(clouds, fd);
  std::vector<std::int32_t> argmax(cache ? clouds * fd : 0);
  for (std::size_t b = 0; b < clouds; ++b) {
    auto dst = pooled.row(b);
    for (std::size_t j = 0; j < fd; ++j) {
      T best = fused(b * n, j);
      std::int32_t at = 0;
      for (std::size_t i = 1; i < n; ++i) {
        const T v = fused(b * n + i, j);
        if (v > best) {
          best = v;
          at = static_cast<std::int32_t>(i);
        }
      }
      dst[j] = best;
      if (cache) argmax[b * fd + j] = at;
    }
  }
  if (cache) {
    cache->pool_argmax = std::move(argmax);
    cache->group_size = n;
    cache->fused_rows = x.rows();
  }
  return pooled;
}

template <typename T>
void Generator<T>::backward(const Cache& c, const Matrix<T>& dfeat) {
  const std::size_t n = c.group_size, fd = dfeat.cols(), clouds = dfeat.rows();
  Matrix<T> dfused(c.fused_rows, fd);
  for (std::size_t b = 0; b < clouds; ++b)
    for (std::size_t j = 0; j < fd; ++j)
      dfused(b * n + static_cast<std::size_t>(c.pool_argmax[b * fd + j]), j) = dfeat(b, j);
  Matrix<T> dconcat = fuse.backward(c.fuse, dfused);

  const std::size_t blocks = attention.size();
  const std::size_t d = dconcat.cols() / blocks;
  Matrix<T> dh(dconcat.rows(), d);
  for (std::size_t a = blocks; a-- > 0;) {
    for (std::size_t r = 0; r < dh.rows(); ++r) {
      const auto src = dconcat.row(r).subspan(a * d, d);
      auto dst = dh.row(r);
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
    dh = attention[a].backward(c.attention[a], dh);
  }
  if (has_projection) dh = project.backward(c.project, dh);
  dh = neighbor.backward(c.neighbor, dh);
  dh = embed2.backward(c.embed2, dh);
  embed1.backward(c.embed1, dh, /*need_dx=*/false);
}

template <typename T>
void Generator<T>::update_running_stats(const Cache& c) {
  embed1.update_running_stats(c.embed1);
  embed2.update_running_stats(c.embed2);
  neighbor.update_running_stats(c.neighbor);
  if (has_projection) project.update_running_stats(c.project);
  for (std::size_t a = 0; a < attention.size(); ++a)
    attention[a].update_running_stats(c.attention[a]);
  fuse.update_running_stats(c.fuse);
}

template <typename T>
void Generator<T>::collect(std::vector<nn::Param<T>*>& out) {
  embed1.collect(out);
  embed2.collect(out);
  neighbor.collect(out);
  if (has_projection) project.collect(out);
  for (auto& a : attention) a.collect(out);
  fuse.collect(out);
}

template <typename T>
void Generator<T>::collect_buffers(std::vector<nn::Buffer<T>>& out) {
  embed1.collect_buffers(out);
  embed2.collect_buffers(out);
  neighbor.collect_buffers(out);
  if (has_projection) project.collect_buffers(out);
  for (auto& a : attention) a.collect_buffers(out);
  fuse.collect_buffers(out);
}

// ----------------------------------------------------------- Classifier

template <typename T>
Classifier<T>::Classifier(const std::string& name, const ModelConfig& cfg,
                          std::mt19937_64& rng)
    : h1(name + ".lbrd1", cfg.fused_dim, cfg.classifier_dims[0], rng, cfg.dropout_rate),
      h2(name + ".lbrd2", cfg.classifier_dims[0], cfg.classifier_dims[1], rng,
         cfg.dropout_rate),
      out(name + ".out", cfg.classifier_dims[1], cfg.n_classes, true, rng) {}

template <typename T>
Matrix<T> Classifier<T>::forward(const Matrix<T>& feat, const nn::Mode& mode,
                                 Cache* cache) const {
  Matrix<T> a = h1.forward(feat, mode, cache ? &cache->h1 : nullptr);
  Matrix<T> b = h2.forward(a, mode, cache ? &cache->h2 : nullptr);
  Matrix<T> logits = out.forward(b);
  if (cache) cache->out_input = std::move(b);
  return logits;
}

template <typename T>
Matrix<T> Classifier<T>::backward(const Cache& c, const Matrix<T>& dlogits,
                                  bool need_dx, bool param_grads) {
  Matrix<T> db = out.backward(c.out_input, dlogits, true, param_grads);
  Matrix<T> da = h2.backward(c.h2, db, true, param_grads);
  return h1.backward(c.h1, da, need_dx, param_grads);
}

template <typename T>
void Classifier<T>::update_running_stats(const Cache& c) {
  h1.update_running_stats(c.h1);
  h2.update_running_stats(c.h2);
}

template <typename T>
void Classifier<T>::collect(std::vector<nn::Param<T>*>& o) {
  h1.collect(o);
  h2.collect(o);
  out.collect(o);
}

template <typename T>
void Classifier<T>::collect_buffers(std::vector<nn::Buffer<T>>& o) {
  h1.collect_buffers(o);
  h2.collect_buffers(o);
}

// ---------------------------------------------------------------- Model

template <typename T>
Model<T>::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg.validate(0);
  std::mt19937_64 g_rng(mix_seed(cfg.init_seed, 11));
  std::mt19937_64 c1_rng(mix_seed(cfg.init_seed, 12));
  std::mt19937_64 c2_rng(mix_seed(cfg.init_seed, 13));
  generator = Generator<T>(cfg, g_rng);
  classifier1 = Classifier<T>("f1", cfg, c1_rng);
  classifier2 = Classifier<T>("f2", cfg, c2_rng);
}

template <typename T>
Matrix<T> Model<T>::predict_proba(const Matrix<T>& x, std::size_t n_points) const {
  const nn::Mode mode = nn::Mode::eval();
  Matrix<T> feat = encode(x, n_points, mode, nullptr);
  Matrix<T> p1 = nn::softmax_rows(classify(0, feat, mode, nullptr));
  Matrix<T> p2 = nn::softmax_rows(classify(1, feat, mode, nullptr));
  for (std::size_t i = 0; i < p1.size(); ++i)
    p1.storage()[i] = (p1.storage()[i] + p2.storage()[i]) / T{2};
  return p1;
}

template <typename T>
Matrix<T> Model<T>::logits(int head, const Matrix<T>& x, std::size_t n_points) const {
  const nn::Mode mode = nn::Mode::eval();
  return classify(head, encode(x, n_points, mode, nullptr), mode, nullptr);
}

template <typename T>
Prediction Model<T>::predict(const Matrix<T>& points) const {
  Matrix<T> p = predict_proba(points, points.rows());
  Prediction out;
  std::size_t best = 0;
  for (std::size_t j = 0; j < kNumGestures; ++j) {
    out.probabilities[j] = static_cast<double>(p(0, j));
    if (p(0, j) > p(0, best)) best = j;
  }
  out.label = kAllGestures[best];
  return out;
}

template <typename T>
std::vector<nn::Param<T>*> Model<T>::generator_params() {
  std::vector<nn::Param<T>*> out;
  generator.collect(out);
  return out;
}

template <typename T>
std::vector<nn::Param<T>*> Model<T>::classifier_params(int head) {
  std::vector<nn::Param<T>*> out;
  (head == 0 ? classifier1 : classifier2).collect(out);
  return out;
}

template <typename T>
std::vector<nn::Param<T>*> Model<T>::classifier_params() {
  auto out = classifier_params(0);
  auto second = classifier_params(1);
  out.insert(out.end(), second.begin(), second.end());
  return out;
}

template <typename T>
std::vector<nn::Param<T>*> Model<T>::all_params() {
  auto out = generator_params();
  auto cls = classifier_params();
  out.insert(out.end(), cls.begin(), cls.end());
  return out;
}

template <typename T>
std::vector<nn::Buffer<T>> Model<T>::buffers() {
  std::vector<nn::Buffer<T>> out;
  generator.collect_buffers(out);
  classifier1.collect_buffers(out);
  classifier2.collect_buffers(out);
  return out;
}

template Matrix<float> knn_group(const Matrix<float>&, std::size_t, std::size_t,
                                 std::vector<std::int32_t>*);
template Matrix<double> knn_group(const Matrix<double>&, std::size_t, std::size_t,
                                  std::vector<std::int32_t>*);
template class NeighborEmbedding<float>;
template class NeighborEmbedding<double>;
template class OffsetAttention<float>;
template class OffsetAttention<double>;
template class Generator<float>;
template class Generator<double>;
template class Classifier<float>;
template class Classifier<double>;
template class Model<float>;
template class Model<double>;

}  // namespace wip
