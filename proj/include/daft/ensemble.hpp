// SPDX-License-Identifier: Apache-2.0
#pragma once

// Output-space ensembling: zero-shot probability averaging, the weighted
// ensemble layer, max-voting and the argmax decision rule.

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "daft/core.hpp"

namespace daft {

namespace detail {

inline void check_aligned(std::span<const prediction_matrix> preds) {
  if (preds.empty()) fail(errc::empty_ensemble, "no models to ensemble");
  const auto& first = preds.front();
  for (const auto& p : preds) {
    if (!(p.space() == first.space()))
      fail(errc::shape_mismatch, "model '" + p.model_id() + "' uses a different label space");
    if (p.rows() != first.rows())
      fail(errc::shape_mismatch, "model '" + p.model_id() + "' has " + std::to_string(p.rows()) + " rows, expected " +
                                     std::to_string(first.rows()));
  }
}

inline std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k)
    if (row[k] > row[best]) best = k;
  return best;
}

}  // namespace detail

/// Argmax per row; ties go to the lowest class index.
inline std::vector<std::size_t> decide(const prediction_matrix& pred) {
  std::vector<std::size_t> labels(pred.rows());
  for (std::size_t i = 0; i < pred.rows(); ++i) labels[i] = detail::argmax(pred.row(i));
  return labels;
}

inline prediction_matrix average_ensemble(std::span<const prediction_matrix> preds,
                                          std::string id = "average-ensemble") {
  detail::check_aligned(preds);
  const auto& first = preds.front();
  std::vector<double> out(first.data().size(), 0.0);
  for (const auto& p : preds) {
    const auto& d = p.data();
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += d[j];
  }
  const double n = static_cast<double>(preds.size());
  for (double& v : out) v /= n;
  return prediction_matrix::trusted(std::move(id), first.space(), std::move(out), first.ids());
}

/// score(i,k) = b_k + sum_m W[k,m] * p_m(i,k), clamped at zero and
/// renormalized; a row that clamps to nothing becomes uniform.
inline prediction_matrix weighted_ensemble(std::span<const prediction_matrix> preds, const ensemble_weights& weights,
                                           std::string id = "weighted-ensemble") {
  detail::check_aligned(preds);
  const auto& first = preds.front();
  const std::size_t k_count = first.arity(), n_rows = first.rows();
  if (weights.classes() != k_count || weights.models() != preds.size())
    fail(errc::shape_mismatch, "weights are " + std::to_string(weights.classes()) + "x" +
                                   std::to_string(weights.models()) + ", ensemble is " + std::to_string(k_count) +
                                   "x" + std::to_string(preds.size()));
  std::vector<double> out(n_rows * k_count);
  for (std::size_t i = 0; i < n_rows; ++i) {
    std::span<double> o(out.data() + i * k_count, k_count);
    double mass = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      double s = weights.intercept(k);
      for (std::size_t m = 0; m < preds.size(); ++m) s += weights.weight(k, m) * preds[m](i, k);
      o[k] = std::max(s, 0.0);
      mass += o[k];
    }
    if (mass > 0.0) {
      detail::normalize_in_place(o, mass);
    } else {
      std::fill(o.begin(), o.end(), 1.0 / static_cast<double>(k_count));
    }
  }
  return prediction_matrix::trusted(std::move(id), first.space(), std::move(out), first.ids());
}

/// Mode of the per-model argmax labels; ties go to the lowest class index.
inline std::vector<std::size_t> majority_vote(std::span<const prediction_matrix> preds) {
  detail::check_aligned(preds);
  const std::size_t k_count = preds.front().arity(), n_rows = preds.front().rows();
  std::vector<std::size_t> labels(n_rows);
  std::vector<std::size_t> votes(k_count);
  for (std::size_t i = 0; i < n_rows; ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& p : preds) ++votes[detail::argmax(p.row(i))];
    labels[i] = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return labels;
}

}  // namespace daft
