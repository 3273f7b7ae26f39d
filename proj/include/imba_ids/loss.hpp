#pragma once

// Cross-entropy, attack-sharing and weighted cross-entropy losses over
// log-probabilities, with analytic gradients in logit space.

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "imba_ids/core_math.hpp"
#include "imba_ids/errors.hpp"
#include "imba_ids/model.hpp"

namespace imba_ids {

struct CrossEntropy {};

// Cross-entropy plus lambda times a benign-vs-attack binary log-loss.
struct AttackSharing {
  double lambda = 10.0;
};

struct WeightedCrossEntropy {
  std::vector<double> weights;  // one positive weight per class
};

// Smallest attack mass fed to log(1 - p_benign); equivalently p_benign <= 1 - 1e-12.
inline constexpr double kAttackMassFloor = 1e-12;

struct LossSpec {
  std::variant<CrossEntropy, AttackSharing, WeightedCrossEntropy> kind;
  Label benign_index = 0;

  void validate(std::size_t num_classes) const {
    if (benign_index >= num_classes) {
      throw std::invalid_argument("LossSpec: benign index " + std::to_string(benign_index) +
                                  " out of range for " + std::to_string(num_classes) + " classes");
    }
    if (const auto* as = std::get_if<AttackSharing>(&kind)) {
      if (num_classes < 2) throw std::invalid_argument("attack-sharing loss needs >= 2 classes");
      if (!(as->lambda >= 0.0) || !std::isfinite(as->lambda)) {
        throw std::invalid_argument("attack-sharing lambda must be finite and >= 0");
      }
    }
    if (const auto* w = std::get_if<WeightedCrossEntropy>(&kind)) {
      if (w->weights.size() != num_classes) {
        throw std::invalid_argument("weighted cross-entropy: " + std::to_string(w->weights.size()) +
                                    " weights for " + std::to_string(num_classes) + " classes");
      }
      for (double v : w->weights)
        if (!(v > 0.0) || !std::isfinite(v))
          throw std::invalid_argument("weighted cross-entropy: weights must be positive and finite");
    }
  }
};

namespace detail {

inline void check_loss_inputs(const Matrix& log_probs, std::span<const Label> labels) {
  if (labels.size() != log_probs.rows()) {
    throw ShapeError("loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(log_probs.rows()) + " rows");
  }
  if (labels.empty()) throw std::invalid_argument("loss: empty batch");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= log_probs.cols()) {
      throw std::out_of_range("loss: label " + std::to_string(labels[i]) + " at row " +
                              std::to_string(i) + " is outside [0, " +
                              std::to_string(log_probs.cols()) + ")");
    }
  }
}

// log(1 - p_benign) computed as log-sum-exp over the attack log-probabilities,
// floored at log(kAttackMassFloor). Sets `clamped` when the floor is active.
inline double log_attack_mass(std::span<const double> log_probs, Label benign, bool& clamped) {
  double max_lp = -INFINITY;
  for (std::size_t j = 0; j < log_probs.size(); ++j)
    if (j != benign) max_lp = std::max(max_lp, log_probs[j]);
  double value = -INFINITY;
  if (std::isfinite(max_lp)) {
    double sum = 0.0;
    for (std::size_t j = 0; j < log_probs.size(); ++j)
      if (j != benign) sum += std::exp(log_probs[j] - max_lp);
    value = max_lp + std::log(sum);
  }
  static const double floor_log = std::log(kAttackMassFloor);
  clamped = !(value >= floor_log);
  return clamped ? floor_log : value;
}

}  // namespace detail

// Mean negative log-likelihood of the true class.
inline double ce_loss(const Matrix& log_probs, std::span<const Label> labels) {
  detail::check_loss_inputs(log_probs, labels);
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) sum -= log_probs(i, labels[i]);
  return sum / static_cast<double>(labels.size());
}

// The penalty part of the attack-sharing loss, before multiplying by lambda:
// -(1/N) sum_i [benign_i ? log p_benign : log(1 - p_benign)].
inline double attack_sharing_penalty(const Matrix& log_probs, std::span<const Label> labels,
                                     Label benign = 0) {
  detail::check_loss_inputs(log_probs, labels);
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == benign) {
      sum -= log_probs(i, benign);
    } else {
      bool clamped = false;
      sum -= detail::log_attack_mass(log_probs.row(i), benign, clamped);
    }
  }
  return sum / static_cast<double>(labels.size());
}

inline double as_loss(const Matrix& log_probs, std::span<const Label> labels, double lambda,
                      Label benign = 0) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("as_loss: lambda must be >= 0");
  if (benign >= log_probs.cols()) throw std::out_of_range("as_loss: benign index out of range");
  const double ce = ce_loss(log_probs, labels);
  if (lambda == 0.0) return ce;
  return ce + lambda * attack_sharing_penalty(log_probs, labels, benign);
}

inline double weighted_ce_loss(const Matrix& log_probs, std::span<const Label> labels,
                               std::span<const double> weights) {
  detail::check_loss_inputs(log_probs, labels);
  if (weights.size() != log_probs.cols()) {
    throw ShapeError("weighted_ce_loss: " + std::to_string(weights.size()) + " weights for " +
                     std::to_string(log_probs.cols()) + " classes");
  }
  for (double w : weights)
    if (!(w > 0.0)) throw std::invalid_argument("weighted_ce_loss: weights must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) sum -= weights[labels[i]] * log_probs(i, labels[i]);
  return sum / static_cast<double>(labels.size());
}

inline double loss_value(const LossSpec& spec, const Matrix& log_probs,
                         std::span<const Label> labels) {
  spec.validate(log_probs.cols());
  return std::visit(
      [&](const auto& kind) -> double {
        using K = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<K, CrossEntropy>) {
          return ce_loss(log_probs, labels);
        } else if constexpr (std::is_same_v<K, AttackSharing>) {
          return as_loss(log_probs, labels, kind.lambda, spec.benign_index);
        } else {
          return weighted_ce_loss(log_probs, labels, kind.weights);
        }
      },
      spec.kind);
}

/// Gradient of the selected loss with respect to the softmax logits,
/// averaged over the batch.
///
/// Per sample with target y and q = softmax restricted to attack classes:
///   cross-entropy        p - e_y
///   weighted             w_y (p - e_y)
///   attack-sharing adds  lambda (p - e_benign)            for benign samples
///                        lambda (p - [0, q])              for attack samples
/// where [0, q] has a zero at the benign index. The attack term vanishes
/// while the attack-mass floor is active.
inline Matrix loss_grad_logits(const LossSpec& spec, const Matrix& probs, const Matrix& log_probs,
                               std::span<const Label> labels) {
  spec.validate(log_probs.cols());
  detail::check_loss_inputs(log_probs, labels);
  if (probs.rows() != log_probs.rows() || probs.cols() != log_probs.cols()) {
    throw ShapeError("loss_grad_logits: probs " + probs.shape() + " vs log_probs " +
                     log_probs.shape());
  }
  const std::size_t n = labels.size();
  const std::size_t c = probs.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Label benign = spec.benign_index;

  Matrix grad(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::holds_alternative<WeightedCrossEntropy>(spec.kind)
                         ? std::get<WeightedCrossEntropy>(spec.kind).weights[labels[i]]
                         : 1.0;
    auto g = grad.row(i);
    auto p = probs.row(i);
    for (std::size_t j = 0; j < c; ++j) g[j] = w * p[j];
    g[labels[i]] -= w;
  }

  if (const auto* as = std::get_if<AttackSharing>(&spec.kind); as && as->lambda != 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      auto g = grad.row(i);
      auto p = probs.row(i);
      if (labels[i] == benign) {
        for (std::size_t j = 0; j < c; ++j) g[j] += as->lambda * p[j];
        g[benign] -= as->lambda;
        continue;
      }
      bool clamped = false;
      const double log_mass = detail::log_attack_mass(log_probs.row(i), benign, clamped);
      if (clamped) continue;
      for (std::size_t j = 0; j < c; ++j) {
        const double q = j == benign ? 0.0 : std::exp(log_probs(i, j) - log_mass);
        g[j] += as->lambda * (p[j] - q);
      }
    }
  }

  for (double& v : grad.values()) v *= inv_n;
  return grad;
}

// Inverse class frequency normalized to mean 1. Empty classes are treated as
// holding one sample so every weight stays finite.
inline std::vector<double> inverse_frequency_weights(std::span<const std::size_t> counts) {
  if (counts.empty()) throw std::invalid_argument("inverse_frequency_weights: no classes");
  std::vector<double> w(counts.size());
  double total = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    w[k] = 1.0 / static_cast<double>(std::max<std::size_t>(1, counts[k]));
    total += w[k];
  }
  const double mean = total / static_cast<double>(w.size());
  for (double& v : w) v /= mean;
  return w;
}

}  // namespace imba_ids
