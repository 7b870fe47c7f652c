// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared domain types for ensembling domain-adjacent fine-tuned classifiers.
// Everything downstream exchanges class probabilities through
// prediction_matrix; models themselves are opaque.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "daft/error.hpp"

namespace daft {

/// Rows whose mass is this close to 1 are stored verbatim.
inline constexpr double kUnitMassSlack = 1e-12;
/// Rows within this band of unit mass are renormalized; beyond it they are rejected.
inline constexpr double kRowMassTolerance = 1e-6;

class label_space {
 public:
  label_space() = default;

  explicit label_space(std::vector<std::string> classes) : classes_(std::move(classes)) {
    if (classes_.size() < 2) fail(errc::invalid_label_space, "a label space needs at least 2 classes");
    std::unordered_set<std::string> seen;
    for (const auto& c : classes_) {
      if (!seen.insert(c).second) fail(errc::invalid_label_space, "duplicate class name '" + c + "'");
    }
  }

  std::size_t arity() const noexcept { return classes_.size(); }
  const std::vector<std::string>& classes() const noexcept { return classes_; }
  const std::string& name(std::size_t k) const { return classes_.at(k); }

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t k = 0; k < classes_.size(); ++k)
      if (classes_[k] == name) return k;
    return std::nullopt;
  }

  friend bool operator==(const label_space&, const label_space&) = default;

 private:
  std::vector<std::string> classes_;
};

/// Linear map from a model's native class probabilities onto the target
/// classes. Columns may sum to less than one; dropped mass is renormalized
/// away per row by map_outputs.
class output_mapping {
 public:
  output_mapping() = default;

  /// `matrix` is K_target x K_source, row-major.
  output_mapping(label_space source, label_space target, std::vector<double> matrix)
      : source_(std::move(source)), target_(std::move(target)), matrix_(std::move(matrix)) {
    const std::size_t kt = target_.arity(), ks = source_.arity();
    if (matrix_.size() != kt * ks)
      fail(errc::mapping_arity_mismatch, "mapping has " + std::to_string(matrix_.size()) + " entries, expected " +
                                             std::to_string(kt) + "x" + std::to_string(ks));
    bool any_positive = false;
    for (double v : matrix_) {
      if (!std::isfinite(v) || v < 0.0) fail(errc::invalid_mapping, "mapping entries must be finite and >= 0");
      any_positive |= v > 0.0;
    }
    if (!any_positive) fail(errc::invalid_mapping, "mapping has no positive entry");
    for (std::size_t s = 0; s < ks; ++s) {
      double col = 0.0;
      for (std::size_t t = 0; t < kt; ++t) col += at(t, s);
      if (col > 1.0 + 1e-9) fail(errc::invalid_mapping, "mapping column " + std::to_string(s) + " sums above 1");
    }
  }

  static output_mapping identity(const label_space& space) {
    const std::size_t k = space.arity();
    std::vector<double> m(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i) m[i * k + i] = 1.0;
    return output_mapping(space, space, std::move(m));
  }

  const label_space& source() const noexcept { return source_; }
  const label_space& target() const noexcept { return target_; }
  const std::vector<double>& matrix() const noexcept { return matrix_; }
  double at(std::size_t target_class, std::size_t source_class) const {
    return matrix_[target_class * source_.arity() + source_class];
  }

 private:
  label_space source_;
  label_space target_;
  std::vector<double> matrix_;
};

/// n x K class-probability rows produced by one model (or by an ensemble).
/// Immutable once built; every row lies on the probability simplex.
class prediction_matrix {
 public:
  prediction_matrix() = default;

  /// Builds without validation. Callers guarantee the simplex invariant.
  static prediction_matrix trusted(std::string model_id, label_space space, std::vector<double> flat,
                                   std::vector<std::string> ids = {}) {
    prediction_matrix m;
    m.model_id_ = std::move(model_id);
    m.space_ = std::move(space);
    m.data_ = std::move(flat);
    m.ids_ = std::move(ids);
    return m;
  }

  const std::string& model_id() const noexcept { return model_id_; }
  const label_space& space() const noexcept { return space_; }
  std::size_t rows() const noexcept { return space_.arity() == 0 ? 0 : data_.size() / space_.arity(); }
  std::size_t arity() const noexcept { return space_.arity(); }
  /// Sample ids aligned with rows; empty when the producer did not supply any.
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<double>& data() const noexcept { return data_; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * arity(), arity()}; }
  double operator()(std::size_t i, std::size_t k) const { return data_[i * arity() + k]; }

  prediction_matrix with_model_id(std::string id) const {
    prediction_matrix m = *this;
    m.model_id_ = std::move(id);
    return m;
  }

  friend bool operator==(const prediction_matrix&, const prediction_matrix&) = default;

 private:
  std::string model_id_;
  label_space space_;
  std::vector<double> data_;
  std::vector<std::string> ids_;
};

namespace detail {

// Divides a nonnegative row by its mass unless it is already unit mass.
inline void normalize_in_place(std::span<double> row, double mass) {
  if (std::abs(mass - 1.0) <= kUnitMassSlack) return;
  for (double& v : row) v /= mass;
}

inline double row_mass(std::span<const double> row) {
  double s = 0.0;
  for (double v : row) s += v;
  return s;
}

}  // namespace detail

inline prediction_matrix validate_prediction_matrix(std::string model_id, const std::vector<std::vector<double>>& rows,
                                                    const label_space& space, std::vector<std::string> ids = {}) {
  const std::size_t k = space.arity();
  if (rows.empty()) fail(errc::empty_matrix, "model '" + model_id + "' has no prediction rows");
  if (!ids.empty() && ids.size() != rows.size()) fail(errc::length_mismatch, "ids and rows differ in length");
  std::vector<double> flat;
  flat.reserve(rows.size() * k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string where = "model '" + model_id + "' row " + std::to_string(i);
    if (r.size() != k)
      fail(errc::arity_mismatch, where + " has " + std::to_string(r.size()) + " entries, expected " + std::to_string(k));
    double mass = 0.0;
    for (double v : r) {
      if (!std::isfinite(v)) fail(errc::non_finite_entry, where);
      if (v < 0.0) fail(errc::negative_entry, where);
      mass += v;
    }
    if (mass == 0.0) fail(errc::row_mass_zero, where);
    if (std::abs(mass - 1.0) > kRowMassTolerance)
      fail(errc::row_mass_out_of_tolerance, where + " sums to " + std::to_string(mass));
    const std::size_t off = flat.size();
    flat.insert(flat.end(), r.begin(), r.end());
    detail::normalize_in_place(std::span<double>(flat.data() + off, k), mass);
  }
  return prediction_matrix::trusted(std::move(model_id), space, std::move(flat), std::move(ids));
}

inline prediction_matrix map_outputs(const prediction_matrix& pred, const output_mapping& mapping) {
  if (!(pred.space() == mapping.source()))
    fail(errc::shape_mismatch, "predictions of '" + pred.model_id() + "' are not in the mapping's source space");
  const std::size_t kt = mapping.target().arity(), ks = mapping.source().arity();
  std::vector<double> out(pred.rows() * kt, 0.0);
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    const auto r = pred.row(i);
    std::span<double> o(out.data() + i * kt, kt);
    for (std::size_t t = 0; t < kt; ++t) {
      double acc = 0.0;
      for (std::size_t s = 0; s < ks; ++s) acc += mapping.at(t, s) * r[s];
      o[t] = acc;
    }
    const double mass = detail::row_mass(o);
    if (mass <= 0.0)
      fail(errc::zero_mass_after_mapping, "model '" + pred.model_id() + "' row " + std::to_string(i));
    detail::normalize_in_place(o, mass);
  }
  return prediction_matrix::trusted(pred.model_id(), mapping.target(), std::move(out), pred.ids());
}

struct backend {
  enum class kind { prediction_file, http_endpoint, synthetic };
  kind type = kind::prediction_file;
  /// File path, endpoint URL, or synthetic handle name.
  std::string location;
};

struct model_descriptor {
  std::string id;
  std::string base_model_tag;
  std::string source_dataset_tag;
  daft::backend backend;
  label_space native_space;
  output_mapping mapping;
};

class registry {
 public:
  registry(label_space target, std::vector<model_descriptor> models)
      : target_(std::move(target)), models_(std::move(models)) {
    if (models_.empty()) fail(errc::empty_ensemble, "registry lists no models");
    std::unordered_set<std::string> ids;
    for (const auto& m : models_) {
      if (!ids.insert(m.id).second) fail(errc::duplicate_model_id, "model id '" + m.id + "' appears twice");
      if (!(m.mapping.source() == m.native_space))
        fail(errc::mapping_arity_mismatch, "model '" + m.id + "' mapping source differs from its classes");
      if (!(m.mapping.target() == target_))
        fail(errc::mapping_arity_mismatch, "model '" + m.id + "' mapping does not target the registry classes");
    }
  }

  const label_space& target() const noexcept { return target_; }
  const std::vector<model_descriptor>& models() const noexcept { return models_; }
  std::size_t size() const noexcept { return models_.size(); }

 private:
  label_space target_;
  std::vector<model_descriptor> models_;
};

struct few_shot_set {
  std::vector<std::string> ids;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

inline void check_labels(std::span<const std::size_t> labels, std::size_t arity) {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= arity) fail(errc::arity_mismatch, "label " + std::to_string(labels[i]) + " outside label space");
}

/// Ensemble-layer weights: row k holds the per-model weights used to score class k.
class ensemble_weights {
 public:
  ensemble_weights() = default;
  ensemble_weights(std::size_t classes, std::size_t models, std::vector<double> w, std::vector<double> intercepts)
      : classes_(classes), models_(models), w_(std::move(w)), b_(std::move(intercepts)) {
    if (w_.size() != classes_ * models_ || b_.size() != classes_)
      fail(errc::shape_mismatch, "weight matrix does not match K x N");
    for (double v : w_)
      if (!std::isfinite(v)) fail(errc::non_finite_weights, "weight matrix has a non-finite entry");
    for (double v : b_)
      if (!std::isfinite(v)) fail(errc::non_finite_weights, "intercepts have a non-finite entry");
  }

  static ensemble_weights uniform(std::size_t classes, std::size_t models) {
    return {classes, models, std::vector<double>(classes * models, 1.0 / static_cast<double>(models)),
            std::vector<double>(classes, 0.0)};
  }

  /// One weight per model shared by every class.
  static ensemble_weights shared(std::size_t classes, std::span<const double> per_model) {
    std::vector<double> w;
    w.reserve(classes * per_model.size());
    for (std::size_t k = 0; k < classes; ++k) w.insert(w.end(), per_model.begin(), per_model.end());
    return {classes, per_model.size(), std::move(w), std::vector<double>(classes, 0.0)};
  }

  std::size_t classes() const noexcept { return classes_; }
  std::size_t models() const noexcept { return models_; }
  double weight(std::size_t k, std::size_t m) const { return w_[k * models_ + m]; }
  double intercept(std::size_t k) const { return b_[k]; }
  const std::vector<double>& matrix() const noexcept { return w_; }
  const std::vector<double>& intercepts() const noexcept { return b_; }

  /// Number of models with a nonzero weight in any class row.
  std::size_t nonzero_models() const {
    std::size_t count = 0;
    for (std::size_t m = 0; m < models_; ++m) {
      for (std::size_t k = 0; k < classes_; ++k) {
        if (weight(k, m) != 0.0) {
          ++count;
          break;
        }
      }
    }
    return count;
  }

  friend bool operator==(const ensemble_weights&, const ensemble_weights&) = default;

 private:
  std::size_t classes_ = 0;
  std::size_t models_ = 0;
  std::vector<double> w_;
  std::vector<double> b_;
};

/// Symbolic cost parameters. T is an integer type when exact arithmetic is wanted.
template <class T>
struct cost_model {
  T forward{};   ///< C_F
  T backward{};  ///< C_B
  T epochs{};    ///< E
  T shots{};     ///< n
  T models{};    ///< N
  T nonzero{};   ///< N-bar, at most N

  void validate() const {
    if (forward < T{} || backward < T{} || epochs < T{} || shots < T{} || models < T{} || nonzero < T{})
      fail(errc::bad_config, "cost parameters must be nonnegative");
    if (nonzero > models) fail(errc::bad_config, "nonzero-weight count exceeds ensemble size");
  }
};

}  // namespace daft
