#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gic/tensor.hpp"

namespace gic {

template <class S>
struct AdamWConfig {
  S lr = S(3e-4);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
  S weight_decay = S(0.01);
};

template <class S>
struct AdamWState {
  std::vector<S> m; // first moment
  std::vector<S> v; // second moment
};

// One decoupled-weight-decay Adam update. The decay multiplies the parameter
// directly (param *= 1 - lr*wd) before the bias-corrected moment update; it
// never flows through the gradient.
template <class S>
void adamw_step(Tensor<S>& param, std::span<const S> grad, AdamWState<S>& state, const AdamWConfig<S>& cfg,
                std::int64_t step_index) {
  if (step_index < 1) throw Error("adamw_step: step_index must be >= 1");
  std::size_t n = param.size();
  if (grad.size() != n) throw ShapeError("adamw_step: grad size != param size");
  if (state.m.empty()) {
    state.m.assign(n, S(0));
    state.v.assign(n, S(0));
  }
  S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(cfg.beta1), static_cast<double>(step_index)));
  S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(cfg.beta2), static_cast<double>(step_index)));
  S decay = S(1) - cfg.lr * cfg.weight_decay;
  auto p = param.values();
  for (std::size_t i = 0; i < n; ++i) {
    p[i] *= decay;
    S g = grad[i];
    state.m[i] = cfg.beta1 * state.m[i] + (S(1) - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (S(1) - cfg.beta2) * g * g;
    S mhat = state.m[i] / bc1;
    S vhat = state.v[i] / bc2;
    p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

// Optimizer over a fixed parameter list; step ordering follows the list.
template <class S>
class AdamW {
public:
  AdamW(std::vector<Tensor<S>> params, AdamWConfig<S> cfg)
      : params_(std::move(params)), states_(params_.size()), cfg_(cfg) {}

  void set_lr(S lr) { cfg_.lr = lr; }
  S lr() const { return cfg_.lr; }
  std::int64_t step_index() const { return step_; }

  void step() {
    ++step_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (!params_[i].has_grad()) continue; // untouched this step
      adamw_step(params_[i], std::span<const S>(params_[i].grad()), states_[i], cfg_, step_);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

private:
  std::vector<Tensor<S>> params_;
  std::vector<AdamWState<S>> states_;
  AdamWConfig<S> cfg_;
  std::int64_t step_ = 0;
};

} // namespace gic
