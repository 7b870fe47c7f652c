// SPDX-License-Identifier: Apache-2.0
#pragma once

// Ensemble-layer linear regressor (LR). One squared-loss SGD regressor per
// target class: the inputs for class k are the N models' probabilities of k,
// the target is the one-hot indicator of k. Update rule and learning-rate
// schedules follow the usual SGDRegressor conventions (eta0 = 0.01,
// invscaling with power_t = 0.25, t counted from 1 across epochs).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "daft/core.hpp"
#include "daft/ensemble.hpp"

namespace daft {

enum class lr_schedule { constant, inverse_scaling };

struct lr_config {
  int max_iter = 3;
  double learning_rate = 0.01;
  lr_schedule schedule = lr_schedule::inverse_scaling;
  double power = 0.25;
  std::uint64_t seed = 0;
  bool shuffle = true;
  /// Optional L2 penalty on W; zero reproduces the unregularized objective.
  double l2 = 0.0;

  void validate() const {
    if (max_iter < 1) fail(errc::bad_config, "max_iter must be >= 1");
    // A zero rate is accepted so callers can check the initialization path.
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail(errc::bad_config, "learning_rate must be >= 0");
    if (!(l2 >= 0.0)) fail(errc::bad_config, "l2 must be >= 0");
  }
};

namespace detail {

inline void check_shots(std::span<const prediction_matrix> preds, const few_shot_set& shots) {
  if (shots.size() == 0) fail(errc::empty_shots, "no few-shot samples");
  check_aligned(preds);
  if (preds.front().rows() != shots.size())
    fail(errc::shape_mismatch, std::to_string(preds.front().rows()) + " prediction rows vs " +
                                   std::to_string(shots.size()) + " shots");
  check_labels(shots.labels, preds.front().arity());
}

}  // namespace detail

inline ensemble_weights fit_lr(std::span<const prediction_matrix> preds, const few_shot_set& shots,
                               const lr_config& cfg = {}) {
  cfg.validate();
  detail::check_shots(preds, shots);
  const std::size_t n_models = preds.size(), k_count = preds.front().arity(), n = shots.size();

  std::vector<double> w(k_count * n_models, 1.0 / static_cast<double>(n_models));
  std::vector<double> b(k_count, 0.0);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::uint64_t t = 1;
  for (int epoch = 0; epoch < cfg.max_iter; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      const double eta = cfg.schedule == lr_schedule::constant
                             ? cfg.learning_rate
                             : cfg.learning_rate / std::pow(static_cast<double>(t), cfg.power);
      for (std::size_t k = 0; k < k_count; ++k) {
        double* wk = w.data() + k * n_models;
        double pred = b[k];
        for (std::size_t m = 0; m < n_models; ++m) pred += wk[m] * preds[m](i, k);
        const double residual = pred - (shots.labels[i] == k ? 1.0 : 0.0);
        for (std::size_t m = 0; m < n_models; ++m) {
          const double grad = residual * preds[m](i, k) + cfg.l2 * wk[m];
          wk[m] -= eta * grad;
        }
        b[k] -= eta * residual;
      }
      ++t;
    }
  }
  for (double v : w)
    if (!std::isfinite(v)) fail(errc::non_finite_weights, "SGD diverged");
  for (double v : b)
    if (!std::isfinite(v)) fail(errc::non_finite_weights, "SGD diverged");
  return ensemble_weights(k_count, n_models, std::move(w), std::move(b));
}

}  // namespace daft
