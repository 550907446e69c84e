#pragma once

// Point-cloud transformer classifier: a feature generator (per-point
// embedding, k-NN neighbour embedding, four offset-attention blocks, fused
// projection and max pooling) and two independently initialised classifier
// heads whose disagreement drives the adversarial adaptation.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wip/gestures.hpp"
#include "wip/matrix.hpp"
#include "wip/nn.hpp"

namespace wip {

enum class AttentionNorm {
  // softmax over the query axis, then L1 renormalisation over keys
  OffsetL1,
  // softmax over keys of scores scaled by 1/sqrt(d_k)
  ScaledSoftmax,
};

struct ModelConfig {
  std::size_t input_dim = 12;
  std::array<std::size_t, 2> embed_dims = {64, 64};
  std::size_t knn_k = 4;
  std::size_t neighbor_dim = 128;
  std::size_t attention_dim = 128;
  std::size_t n_attention = 4;
  std::size_t fused_dim = 1024;
  std::array<std::size_t, 2> classifier_dims = {512, 256};
  std::size_t n_classes = kNumGestures;
  double dropout_rate = 0.5;
  AttentionNorm attention_norm = AttentionNorm::OffsetL1;
  std::uint64_t init_seed = 1;

  // Throws std::invalid_argument when an invariant is violated; n_points is
  // the cloud size the model will see (k must be smaller).
  void validate(std::size_t n_points) const;

  // Narrower widths with the same topology, for CPU-bound experiments.
  static ModelConfig compact();

  bool operator==(const ModelConfig&) const = default;
};

// For each point, pairs every one of its k nearest neighbours (Euclidean
// distance in the given feature space, self excluded, ties to lower index)
// with the point itself: row (p * k + q) = [f_nbr - f_p, f_p].
// `features` holds n_groups clouds of group_size rows each. Optionally
// returns the neighbour indices (local to each cloud).
template <typename T>
Matrix<T> knn_group(const Matrix<T>& features, std::size_t group_size,
                    std::size_t k, std::vector<std::int32_t>* neighbours = nullptr);

// knn_group -> shared LBR -> max over the k neighbours.
template <typename T>
class NeighborEmbedding {
 public:
  struct Cache {
    std::vector<std::int32_t> neighbours;
    typename nn::LBR<T>::Cache lbr;
    std::vector<std::int32_t> argmax;  // winning neighbour slot per output
    std::size_t in_dim = 0;
    std::size_t group_size = 0;
  };

  NeighborEmbedding() = default;
  NeighborEmbedding(const std::string& name, std::size_t in_dim,
                    std::size_t out_dim, std::size_t k, std::mt19937_64& rng);

  Matrix<T> forward(const Matrix<T>& x, std::size_t group_size,
                    const nn::Mode& mode, Cache* cache) const;
  Matrix<T> backward(const Cache& cache, const Matrix<T>& dy,
                     bool param_grads = true);

  void collect(std::vector<nn::Param<T>*>& out) { lbr.collect(out); }
  void collect_buffers(std::vector<nn::Buffer<T>>& out) { lbr.collect_buffers(out); }
  void update_running_stats(const Cache& c) { lbr.update_running_stats(c.lbr); }

  nn::LBR<T> lbr;
  std::size_t k = 4;
};

// Offset-attention block: out = LBR(x - Attn(x)) + x, attention computed
// independently inside each cloud of group_size points.
template <typename T>
class OffsetAttention {
 public:
  struct Cache {
    Matrix<T> input, q, k, v;
    Matrix<T> softmax;  // per-cloud N x N blocks, stacked
    Matrix<T> weights;  // final attention weights, same layout
    std::vector<T> row_sums;
    typename nn::LBR<T>::Cache lbr;
    std::size_t group_size = 0;
  };

  OffsetAttention() = default;
  OffsetAttention(const std::string& name, std::size_t dim, AttentionNorm norm,
                  std::mt19937_64& rng);

  Matrix<T> forward(const Matrix<T>& x, std::size_t group_size,
                    const nn::Mode& mode, Cache* cache) const;
  Matrix<T> backward(const Cache& cache, const Matrix<T>& dy,
                     bool param_grads = true);

  // Attention weights of the given cloud (N x N, rows = attending point).
  Matrix<T> attention_weights(const Matrix<T>& x, std::size_t group_size,
                              std::size_t cloud) const;

  void collect(std::vector<nn::Param<T>*>& out);
  void collect_buffers(std::vector<nn::Buffer<T>>& out) { trans.collect_buffers(out); }
  void update_running_stats(const Cache& c) { trans.update_running_stats(c.lbr); }

  nn::Linear<T> wq, wk, wv;
  nn::LBR<T> trans;
  AttentionNorm norm = AttentionNorm::OffsetL1;

 private:
  void attend(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
              std::size_t group_size, Matrix<T>& f_att, Matrix<T>* softmax,
              Matrix<T>* weights, std::vector<T>* row_sums) const;
};

template <typename T>
class Generator {
 public:
  struct Cache {
    typename nn::LBR<T>::Cache embed1, embed2, project, fuse;
    typename NeighborEmbedding<T>::Cache neighbor;
    std::vector<typename OffsetAttention<T>::Cache> attention;
    std::vector<std::int32_t> pool_argmax;
    std::size_t group_size = 0;
    std::size_t fused_rows = 0;
  };

  Generator() = default;
  Generator(const ModelConfig& cfg, std::mt19937_64& rng);

  // x: (batch * n_points) x input_dim -> batch x fused_dim.
  Matrix<T> forward(const Matrix<T>& x, std::size_t n_points,
                    const nn::Mode& mode, Cache* cache) const;
  void backward(const Cache& cache, const Matrix<T>& dfeat);
  void update_running_stats(const Cache& cache);

  void collect(std::vector<nn::Param<T>*>& out);
  void collect_buffers(std::vector<nn::Buffer<T>>& out);

  nn::LBR<T> embed1, embed2;
  NeighborEmbedding<T> neighbor;
  bool has_projection = false;
  nn::LBR<T> project;
  std::vector<OffsetAttention<T>> attention;
  nn::LBR<T> fuse;
};

// LBRD -> LBRD -> Linear producing class scores.
template <typename T>
class Classifier {
 public:
  struct Cache {
    typename nn::LBR<T>::Cache h1, h2;
    Matrix<T> out_input;
  };

  Classifier() = default;
  Classifier(const std::string& name, const ModelConfig& cfg, std::mt19937_64& rng);

  Matrix<T> forward(const Matrix<T>& feat, const nn::Mode& mode, Cache* cache) const;
  // Returns dL/dfeat unless need_dx is false.
  Matrix<T> backward(const Cache& cache, const Matrix<T>& dlogits,
                     bool need_dx = true, bool param_grads = true);
  void update_running_stats(const Cache& cache);

  void collect(std::vector<nn::Param<T>*>& out);
  void collect_buffers(std::vector<nn::Buffer<T>>& out);

  nn::LBR<T> h1, h2;
  nn::Linear<T> out;
};

struct Prediction {
  Gesture label = Gesture::Standing;
  std::array<double, kNumGestures> probabilities{};
};

template <typename T>
class Model {
 public:
  using Scalar = T;
  using GeneratorCache = typename Generator<T>::Cache;
  using ClassifierCache = typename Classifier<T>::Cache;

  Model() = default;
  explicit Model(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  Matrix<T> encode(const Matrix<T>& x, std::size_t n_points, const nn::Mode& mode,
                   GeneratorCache* cache) const {
    return generator.forward(x, n_points, mode, cache);
  }
  Matrix<T> classify(int head, const Matrix<T>& feat, const nn::Mode& mode,
                     ClassifierCache* cache) const {
    return (head == 0 ? classifier1 : classifier2).forward(feat, mode, cache);
  }
  Matrix<T> backward_classifier(int head, const ClassifierCache& c,
                                const Matrix<T>& dlogits, bool need_dx,
                                bool param_grads) {
    return (head == 0 ? classifier1 : classifier2)
        .backward(c, dlogits, need_dx, param_grads);
  }
  void backward_generator(const GeneratorCache& c, const Matrix<T>& dfeat) {
    generator.backward(c, dfeat);
  }
  void update_generator_stats(const GeneratorCache& c) {
    generator.update_running_stats(c);
  }
  void update_classifier_stats(int head, const ClassifierCache& c) {
    (head == 0 ? classifier1 : classifier2).update_running_stats(c);
  }

  // Evaluation-mode class probabilities averaged over both heads, one row
  // per cloud. x holds batch * n_points rows.
  Matrix<T> predict_proba(const Matrix<T>& x, std::size_t n_points) const;
  // Evaluation-mode logits of one head.
  Matrix<T> logits(int head, const Matrix<T>& x, std::size_t n_points) const;
  Prediction predict(const Matrix<T>& points) const;

  std::vector<nn::Param<T>*> generator_params();
  std::vector<nn::Param<T>*> classifier_params();  // both heads
  std::vector<nn::Param<T>*> classifier_params(int head);
  std::vector<nn::Param<T>*> all_params();
  std::vector<nn::Buffer<T>> buffers();

  Generator<T> generator;
  Classifier<T> classifier1, classifier2;

 private:
  ModelConfig cfg_;
};

}  // namespace wip
