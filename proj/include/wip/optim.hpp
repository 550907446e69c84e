#pragma once

// Adam with decoupled weight decay.

#include <cmath>
#include <cstdint>
#include <vector>

#include "wip/nn.hpp"

namespace wip {

struct AdamConfig {
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<nn::Param<T>*> params, AdamConfig cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  // One update with learning rate lr. Each parameter first shrinks by
  // (1 - lr * weight_decay), then takes the bias-corrected Adam step.
  void step(double lr) {
    ++steps_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    const double decay = 1.0 - lr * cfg_.weight_decay;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& val = params_[i]->value;
      const auto& g = params_[i]->grad;
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < val.size(); ++j) {
        const double gj = g[j];
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
        const double upd = lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
        val[j] = static_cast<T>(static_cast<double>(val[j]) * decay - upd);
      }
    }
  }

  std::int64_t steps() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<nn::Param<T>*> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamConfig cfg_;
  std::int64_t steps_ = 0;
};

}  // namespace wip
