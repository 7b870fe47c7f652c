// SPDX-License-Identifier: Apache-2.0
#pragma once

// Exhaustive search over a regular grid on the weight simplex. Used as the
// reference "best achievable weighting" when checking learned weights.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "daft/core.hpp"
#include "daft/ensemble.hpp"
#include "daft/learners/lr.hpp"
#include "daft/metrics.hpp"

namespace daft {

inline constexpr std::size_t kOracleMaxModels = 5;

struct oracle_result {
  std::vector<double> weights;  ///< shared across classes, sums to 1
  double loss = 0.0;            ///< cross-entropy at `weights` on the shots
  /// Largest loss change between `weights` and any grid point one step away.
  double grid_step_slack = 0.0;
  std::size_t points_visited = 0;
};

namespace detail {

inline double shared_weight_loss(std::span<const prediction_matrix> preds, std::span<const std::size_t> labels,
                                 std::span<const double> w) {
  const auto mixed = weighted_ensemble(preds, ensemble_weights::shared(preds.front().arity(), w));
  return cross_entropy(mixed, labels);
}

inline std::size_t grid_steps(double resolution) {
  if (!(resolution > 0.0 && resolution <= 0.5)) fail(errc::bad_config, "grid resolution must lie in (0, 0.5]");
  const double inv = 1.0 / resolution;
  const double steps = std::round(inv);
  if (std::abs(steps * resolution - 1.0) > 1e-9)
    fail(errc::bad_config, "grid resolution must divide 1 evenly");
  return static_cast<std::size_t>(steps);
}

}  // namespace detail

/// Visits grid points in ascending lexicographic order of the weight vector;
/// a later point replaces the incumbent only if it lowers the loss by more
/// than 1e-12, so near-ties resolve to the lexicographically smaller vector.
inline oracle_result grid_oracle_search(std::span<const prediction_matrix> preds, const few_shot_set& shots,
                                        double resolution) {
  detail::check_shots(preds, shots);
  const std::size_t n_models = preds.size();
  if (n_models > kOracleMaxModels)
    fail(errc::too_many_models, std::to_string(n_models) + " models exceeds the oracle limit of " +
                                    std::to_string(kOracleMaxModels));
  const std::size_t steps = detail::grid_steps(resolution);
  const double unit = 1.0 / static_cast<double>(steps);

  auto to_weights = [&](const std::vector<std::size_t>& counts) {
    std::vector<double> w(n_models);
    for (std::size_t m = 0; m < n_models; ++m) w[m] = static_cast<double>(counts[m]) * unit;
    return w;
  };

  oracle_result best;
  best.loss = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_counts;
  std::vector<std::size_t> counts(n_models, 0);

  // Depth-first with ascending coordinates yields lexicographic order.
  auto visit = [&](auto&& self, std::size_t m, std::size_t remaining) -> void {
    if (m + 1 == n_models) {
      counts[m] = remaining;
      const auto w = to_weights(counts);
      const double loss = detail::shared_weight_loss(preds, shots.labels, w);
      ++best.points_visited;
      if (loss < best.loss - 1e-12) {
        best.loss = loss;
        best.weights = w;
        best_counts = counts;
      }
      return;
    }
    for (std::size_t c = 0; c <= remaining; ++c) {
      counts[m] = c;
      self(self, m + 1, remaining - c);
    }
  };
  visit(visit, 0, steps);

  for (std::size_t from = 0; from < n_models; ++from) {
    if (best_counts[from] == 0) continue;
    for (std::size_t to = 0; to < n_models; ++to) {
      if (to == from) continue;
      auto neighbour = best_counts;
      --neighbour[from];
      ++neighbour[to];
      const double loss = detail::shared_weight_loss(preds, shots.labels, to_weights(neighbour));
      best.grid_step_slack = std::max(best.grid_step_slack, std::abs(loss - best.loss));
    }
  }
  return best;
}

inline ensemble_weights grid_oracle_weights(std::span<const prediction_matrix> preds, const few_shot_set& shots,
                                            double resolution) {
  const auto result = grid_oracle_search(preds, shots, resolution);
  return ensemble_weights::shared(preds.front().arity(), result.weights);
}

}  // namespace daft
