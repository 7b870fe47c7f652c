// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "daft/core.hpp"
#include "daft/ensemble.hpp"

namespace daft {

inline constexpr double kProbabilityFloor = 1e-12;

namespace detail {
inline void check_lengths(const prediction_matrix& pred, std::span<const std::size_t> gold) {
  if (pred.rows() != gold.size())
    fail(errc::length_mismatch,
         std::to_string(pred.rows()) + " prediction rows vs " + std::to_string(gold.size()) + " labels");
  check_labels(gold, pred.arity());
}
}  // namespace detail

inline double accuracy(const prediction_matrix& pred, std::span<const std::size_t> gold) {
  detail::check_lengths(pred, gold);
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += detail::argmax(pred.row(i)) == gold[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

inline double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold) {
  if (predicted.size() != gold.size()) fail(errc::length_mismatch, "label vectors differ in length");
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predicted[i] == gold[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

/// Per-row -log p(gold) with p clipped to [1e-12, 1].
inline double cross_entropy_row(std::span<const double> row, std::size_t gold) {
  return -std::log(std::clamp(row[gold], kProbabilityFloor, 1.0));
}

inline double brier_row(std::span<const double> row, std::size_t gold) {
  double s = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    const double d = row[k] - (k == gold ? 1.0 : 0.0);
    s += d * d;
  }
  return s;
}

inline double cross_entropy(const prediction_matrix& pred, std::span<const std::size_t> gold) {
  detail::check_lengths(pred, gold);
  if (gold.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) s += cross_entropy_row(pred.row(i), gold[i]);
  return s / static_cast<double>(gold.size());
}

inline double brier(const prediction_matrix& pred, std::span<const std::size_t> gold) {
  detail::check_lengths(pred, gold);
  if (gold.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) s += brier_row(pred.row(i), gold[i]);
  return s / static_cast<double>(gold.size());
}

/// Percentage improvement of `a` over baseline `b`: 100 (a - b) / b.
inline double relative_improvement(double a, double b) {
  if (!(b > 0.0)) fail(errc::non_positive_baseline, "baseline must be positive, got " + std::to_string(b));
  return 100.0 * (a - b) / b;
}

// ---------------------------------------------------------------------------
// LEEP (log expected empirical prediction)

struct leep_inputs {
  /// n x K_z rows over the source model's own classes.
  prediction_matrix source_predictions;
  std::vector<std::size_t> target_labels;
  /// K_y; zero means max(label) + 1.
  std::size_t target_arity = 0;
};

inline double leep(const prediction_matrix& source, std::span<const std::size_t> labels, std::size_t target_arity = 0) {
  const std::size_t n = source.rows(), kz = source.arity();
  if (n == 0 || labels.empty()) fail(errc::empty_input, "LEEP needs at least one sample");
  if (labels.size() != n) fail(errc::length_mismatch, "LEEP labels and predictions differ in length");
  std::size_t ky = target_arity;
  if (ky == 0) ky = *std::max_element(labels.begin(), labels.end()) + 1;
  check_labels(labels, ky);

  // Empirical joint over (y, z); the 1/n factor cancels in the conditional.
  std::vector<double> joint(ky * kz, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto theta = source.row(i);
    for (std::size_t z = 0; z < kz; ++z) joint[labels[i] * kz + z] += theta[z];
  }
  std::vector<double> marginal(kz, 0.0);
  for (std::size_t y = 0; y < ky; ++y)
    for (std::size_t z = 0; z < kz; ++z) marginal[z] += joint[y * kz + z];

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto theta = source.row(i);
    double expected = 0.0;
    for (std::size_t z = 0; z < kz; ++z) {
      if (marginal[z] <= 0.0) continue;
      expected += joint[labels[i] * kz + z] / marginal[z] * theta[z];
    }
    total += std::log(std::max(expected, kProbabilityFloor));
  }
  return total / static_cast<double>(n);
}

inline double leep(const leep_inputs& in) { return leep(in.source_predictions, in.target_labels, in.target_arity); }

// ---------------------------------------------------------------------------
// Computational cost model

enum class method { ft, daft_z, daft_e_z, da_ft2, daft_e };

inline constexpr std::string_view to_string(method m) noexcept {
  switch (m) {
    case method::ft: return "ft";
    case method::daft_z: return "daft-z";
    case method::daft_e_z: return "daft-e-z";
    case method::da_ft2: return "da-ft2";
    case method::daft_e: return "daft-e";
  }
  return "";
}

inline std::optional<method> parse_method(std::string_view s) {
  for (method m : {method::ft, method::daft_z, method::daft_e_z, method::da_ft2, method::daft_e})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

template <class T>
struct method_cost {
  T training{};
  T inference{};
  friend bool operator==(const method_cost&, const method_cost&) = default;
};

template <class T>
method_cost<T> cost_of(method m, const cost_model<T>& cm) {
  cm.validate();
  switch (m) {
    case method::ft:
    case method::da_ft2: return {cm.shots * (cm.forward + cm.backward) * cm.epochs, cm.forward};
    case method::daft_z: return {T{}, cm.forward};
    case method::daft_e_z: return {T{}, cm.models * cm.forward};
    case method::daft_e: return {cm.shots * (cm.forward + cm.epochs), cm.nonzero * cm.forward};
  }
  return {};
}

}  // namespace daft
