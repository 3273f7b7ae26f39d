#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "imba_ids/errors.hpp"
#include "imba_ids/model.hpp"

namespace imba_ids {

struct AdamHyperparams {
  double rho1 = 0.9;
  double rho2 = 0.999;
  double step_size = 1e-4;  // zeta
  double delta = 1e-8;

  void validate() const {
    if (!(rho1 > 0.0 && rho1 < 1.0)) throw std::invalid_argument("adam: rho1 must be in (0, 1)");
    if (!(rho2 > 0.0 && rho2 < 1.0)) throw std::invalid_argument("adam: rho2 must be in (0, 1)");
    if (!(step_size > 0.0)) throw std::invalid_argument("adam: step size must be > 0");
    if (!(delta > 0.0)) throw std::invalid_argument("adam: delta must be > 0");
  }
};

/// One adaptive-moment update over flat buffers. `step` is the already
/// incremented step counter t >= 1. The accumulators hold the raw
/// exponential averages; bias correction is applied only when forming the
/// update:
///   s <- rho1 s + (1 - rho1) g
///   r <- rho2 r + (1 - rho2) g^2
///   theta <- theta - zeta * (s / (1 - rho1^t)) / (sqrt(r / (1 - rho2^t)) + delta)
inline void adam_update(std::span<double> params, std::span<const double> grads,
                        std::span<double> s, std::span<double> r, std::uint64_t step,
                        const AdamHyperparams& hp) {
  if (grads.size() != params.size() || s.size() != params.size() || r.size() != params.size()) {
    throw ShapeError("adam_update: buffer sizes differ");
  }
  const double t = static_cast<double>(step);
  const double correction1 = 1.0 - std::pow(hp.rho1, t);
  const double correction2 = 1.0 - std::pow(hp.rho2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    s[k] = hp.rho1 * s[k] + (1.0 - hp.rho1) * g;
    r[k] = hp.rho2 * r[k] + (1.0 - hp.rho2) * g * g;
    const double s_hat = s[k] / correction1;
    const double r_hat = r[k] / correction2;
    params[k] -= hp.step_size * s_hat / (std::sqrt(r_hat) + hp.delta);
  }
}

class AdamState {
 public:
  AdamState() = default;

  AdamState(const ParamSet& shapes, AdamHyperparams hp)
      : hp_(hp), s_(zeros_like(shapes)), r_(zeros_like(shapes)), initialized_(true) {
    hp_.validate();
  }

  static AdamState for_model(const MlpModel& model, AdamHyperparams hp) {
    return AdamState(model.layers, hp);
  }

  bool initialized() const noexcept { return initialized_; }
  std::uint64_t step_count() const noexcept { return t_; }
  const AdamHyperparams& hyperparams() const noexcept { return hp_; }
  const ParamSet& first_moment() const noexcept { return s_; }
  const ParamSet& second_moment() const noexcept { return r_; }

  void reset() {
    s_ = zeros_like(s_);
    r_ = zeros_like(r_);
    t_ = 0;
  }

  void step(ParamSet& params, const ParamSet& grads) {
    if (!initialized_) throw std::logic_error("adam_step: optimizer state is not initialized");
    require_same_shapes(params, s_, "adam_step");
    require_same_shapes(params, grads, "adam_step");
    ++t_;
    for (std::size_t l = 0; l < params.size(); ++l) {
      adam_update(params[l].weights.values(), grads[l].weights.values(), s_[l].weights.values(),
                  r_[l].weights.values(), t_, hp_);
      adam_update(params[l].bias, grads[l].bias, s_[l].bias, r_[l].bias, t_, hp_);
    }
  }

  void step(MlpModel& model, const ParamSet& grads) {
    step(model.layers, grads);
    ++model.revision;
  }

 private:
  AdamHyperparams hp_;
  ParamSet s_;
  ParamSet r_;
  std::uint64_t t_ = 0;
  bool initialized_ = false;
};

inline void sgd_step(ParamSet& params, const ParamSet& grads, double learning_rate) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("sgd_step: learning rate must be > 0");
  require_same_shapes(params, grads, "sgd_step");
  for (std::size_t l = 0; l < params.size(); ++l) {
    auto w = params[l].weights.values();
    auto gw = grads[l].weights.values();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= learning_rate * gw[k];
    for (std::size_t k = 0; k < params[l].bias.size(); ++k)
      params[l].bias[k] -= learning_rate * grads[l].bias[k];
  }
}

inline void sgd_step(MlpModel& model, const ParamSet& grads, double learning_rate) {
  sgd_step(model.layers, grads, learning_rate);
  ++model.revision;
}

}  // namespace imba_ids
