// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace daft {

enum class errc {
  negative_entry,
  non_finite_entry,
  row_mass_zero,
  row_mass_out_of_tolerance,
  arity_mismatch,
  empty_matrix,
  invalid_label_space,
  invalid_mapping,
  zero_mass_after_mapping,
  shape_mismatch,
  empty_ensemble,
  empty_shots,
  non_finite_weights,
  too_many_models,
  bad_config,
  length_mismatch,
  non_positive_baseline,
  empty_input,
  parse_error,
  mapping_arity_mismatch,
  duplicate_model_id,
  header_mismatch,
  missing_sample,
  io_error,
  unreachable,
  malformed_response,
  timeout,
  degenerate_sample,
};

constexpr std::string_view to_string(errc code) noexcept {
  switch (code) {
    case errc::negative_entry: return "NegativeEntry";
    case errc::non_finite_entry: return "NonFiniteEntry";
    case errc::row_mass_zero: return "RowMassZero";
    case errc::row_mass_out_of_tolerance: return "RowMassOutOfTolerance";
    case errc::arity_mismatch: return "ArityMismatch";
    case errc::empty_matrix: return "EmptyMatrix";
    case errc::invalid_label_space: return "InvalidLabelSpace";
    case errc::invalid_mapping: return "InvalidMapping";
    case errc::zero_mass_after_mapping: return "ZeroMassAfterMapping";
    case errc::shape_mismatch: return "ShapeMismatch";
    case errc::empty_ensemble: return "EmptyEnsemble";
    case errc::empty_shots: return "EmptyShots";
    case errc::non_finite_weights: return "NonFiniteWeights";
    case errc::too_many_models: return "TooManyModels";
    case errc::bad_config: return "BadConfig";
    case errc::length_mismatch: return "LengthMismatch";
    case errc::non_positive_baseline: return "NonPositiveBaseline";
    case errc::empty_input: return "EmptyInput";
    case errc::parse_error: return "ParseError";
    case errc::mapping_arity_mismatch: return "MappingArityMismatch";
    case errc::duplicate_model_id: return "DuplicateModelId";
    case errc::header_mismatch: return "HeaderMismatch";
    case errc::missing_sample: return "MissingSample";
    case errc::io_error: return "IoError";
    case errc::unreachable: return "Unreachable";
    case errc::malformed_response: return "MalformedResponse";
    case errc::timeout: return "Timeout";
    case errc::degenerate_sample: return "DegenerateSample";
  }
  return "Unknown";
}

/// All library failures are reported as daft::error; code() identifies the
/// failure class, what() carries the human-readable context.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) { throw error(code, message); }

}  // namespace daft
