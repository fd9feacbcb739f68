#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ssa2d/tensor.hpp"

namespace ssa2d {

// Bias-corrected Adam over a fixed parameter list.
template <class S>
class AdamOptimizer {
 public:
  struct Hyper {
    S lr = S(1e-4);
    S beta1 = S(0.9);
    S beta2 = S(0.999);
    S eps = S(1e-8);
    S grad_clip_norm = S(10);  // <= 0 disables clipping
  };

  AdamOptimizer(std::vector<std::pair<std::string, Tensor<S>*>> params, Hyper hyper)
      : params_(std::move(params)), hyper_(hyper) {
    for (auto& [name, p] : params_) {
      p->ensure_grad();
      m_.push_back(make_buffer<S>(p->numel()));
      v_.push_back(make_buffer<S>(p->numel()));
    }
  }

  void set_lr(S lr) { hyper_.lr = lr; }
  S lr() const { return hyper_.lr; }
  std::int64_t step_count() const { return step_; }

  // Global gradient norm across all parameters; clips in place when above
  // the configured threshold. Returns the pre-clip norm.
  S clip_gradients() {
    double sq = 0.0;
    for (auto& [name, p] : params_)
      for (std::int64_t i = 0; i < p->numel(); ++i) {
        const double g = static_cast<double>(p->gptr()[i]);
        sq += g * g;
      }
    const double norm = std::sqrt(sq);
    const double limit = static_cast<double>(hyper_.grad_clip_norm);
    if (limit > 0.0 && norm > limit) {
      const S s = static_cast<S>(limit / norm);
      for (auto& [name, p] : params_)
        for (std::int64_t i = 0; i < p->numel(); ++i) p->gptr()[i] *= s;
    }
    return static_cast<S>(norm);
  }

  void step() {
    ++step_;
    const S b1 = hyper_.beta1, b2 = hyper_.beta2;
    const S c1 = S(1) - static_cast<S>(std::pow(static_cast<double>(b1), static_cast<double>(step_)));
    const S c2 = S(1) - static_cast<S>(std::pow(static_cast<double>(b2), static_cast<double>(step_)));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor<S>* p = params_[k].second;
      S* m = m_[k]->data();
      S* v = v_[k]->data();
      const S* g = p->gptr();
      S* w = p->ptr();
      const std::int64_t n = p->numel();
      for (std::int64_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (S(1) - b1) * g[i];
        v[i] = b2 * v[i] + (S(1) - b2) * g[i] * g[i];
        const S mhat = m[i] / c1;
        const S vhat = v[i] / c2;
        w[i] -= hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps);
      }
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p->zero_grad();
  }

 private:
  std::vector<std::pair<std::string, Tensor<S>*>> params_;
  std::vector<Buffer<S>> m_, v_;
  Hyper hyper_;
  std::int64_t step_ = 0;
};

}  // namespace ssa2d
