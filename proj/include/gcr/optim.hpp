#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "gcr/autodiff.hpp"
#include "gcr/tensor.hpp"

namespace gcr {

/// i.i.d. Gaussian entries; deterministic for a given engine state.
template <Scalar T, class Rng>
Tensor<T> init_normal(std::vector<std::size_t> shape, Rng& rng, double mean = 0.0, double stddev = 0.01) {
  if (!(stddev > 0)) throw std::invalid_argument("init_normal: stddev must be positive");
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(mean, stddev);
  for (auto& v : t.storage()) v = static_cast<T>(dist(rng));
  return t;
}

template <Scalar T>
struct AdamState {
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
  long step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of `params` from `grads`. Moment buffers are
/// created lazily on the first call and must keep matching shapes afterwards.
template <Scalar T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads, AdamState<T>& st) {
  if (params.size() != grads.size()) throw DimensionError("adam_step: params/grads count mismatch");
  if (st.first_moment.empty()) {
    for (const Tensor<T>* p : params) {
      st.first_moment.emplace_back(p->shape());
      st.second_moment.emplace_back(p->shape());
    }
  }
  if (st.first_moment.size() != params.size()) throw DimensionError("adam_step: state/param count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() || params[i]->shape() != st.first_moment[i].shape()) {
      throw DimensionError("adam_step: shape mismatch for tensor " + std::to_string(i));
    }
  }

  ++st.step;
  const double b1 = st.beta1;
  const double b2 = st.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
  const double step_size = st.learning_rate / c1;
  const double inv_sqrt_c2 = 1.0 / std::sqrt(c2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i]->data();
    auto m = st.first_moment[i].data();
    auto v = st.second_moment[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      const double mk = b1 * m[k] + (1.0 - b1) * gk;
      const double vk = b2 * v[k] + (1.0 - b2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      p[k] = static_cast<T>(p[k] - step_size * mk / (std::sqrt(vk) * inv_sqrt_c2 + st.epsilon));
    }
  }
}

/// Adam over the trainable subset of a parameter list.
template <Scalar T>
class Adam {
 public:
  explicit Adam(std::span<Parameter<T>> params, double learning_rate = 1e-3) {
    state_.learning_rate = learning_rate;
    bind(params);
  }

  /// Re-points the optimizer at a parameter list with identical layout, keeping moments.
  void bind(std::span<Parameter<T>> params) {
    values_.clear();
    grads_.clear();
    for (auto& p : params) {
      if (!p.trainable) continue;
      values_.push_back(&p.value);
      grads_.push_back(&p.grad);
    }
  }

  void step() { adam_step<T>(values_, grads_, state_); }

  double learning_rate() const noexcept { return state_.learning_rate; }
  void set_learning_rate(double lr) noexcept { state_.learning_rate = lr; }
  const AdamState<T>& state() const noexcept { return state_; }

 private:
  std::vector<Tensor<T>*> values_;
  std::vector<const Tensor<T>*> grads_;
  AdamState<T> state_;
};

/// Halves the learning rate each time the validation metric has failed to
/// improve for `wait` consecutive evaluations.
class PlateauDecay {
 public:
  explicit PlateauDecay(double factor = 0.5, int wait = 2) : factor_(factor), wait_(wait) {}

  /// Returns the multiplier to apply to the learning rate after this evaluation.
  double observe(bool improved) {
    if (improved) {
      stale_ = 0;
      return 1.0;
    }
    if (++stale_ % wait_ == 0) return factor_;
    return 1.0;
  }

 private:
  double factor_;
  int wait_;
  int stale_ = 0;
};

}  // namespace gcr
