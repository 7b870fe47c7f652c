// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <bit>
#include <cstring>

#include "daft/core.hpp"
#include "daft/io.hpp"
#include "testing.hpp"

using namespace daft;
using daft::testing::binary;
using daft::testing::error_code;

TEST(LabelSpace, RejectsDegenerate) {
  EXPECT_EQ(error_code([] { label_space({"only"}); }), errc::invalid_label_space);
  EXPECT_EQ(error_code([] { label_space({"a", "b", "a"}); }), errc::invalid_label_space);
  const label_space s({"neg", "neu", "pos"});
  EXPECT_EQ(s.arity(), 3u);
  EXPECT_EQ(s.index_of("pos"), 2u);
  EXPECT_FALSE(s.index_of("other"));
}

TEST(Validate, AcceptsSimplexRowsUnchanged) {
  const auto m = validate_prediction_matrix("m", {{0.6, 0.4}, {0.2, 0.8}}, binary());
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.data(), (std::vector<double>{0.6, 0.4, 0.2, 0.8}));
}

TEST(Validate, RenormalizesInsideBand) {
  const auto m = validate_prediction_matrix("m", {{0.6000003, 0.4}}, binary());
  EXPECT_NEAR(m(0, 0) + m(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(m(0, 0), 0.6000003 / 1.0000003, 1e-15);
}

TEST(Validate, Errors) {
  EXPECT_EQ(error_code([] { validate_prediction_matrix("m", {{0.9, 0.3}}, binary()); }),
            errc::row_mass_out_of_tolerance);
  EXPECT_EQ(error_code([] { validate_prediction_matrix("m", {{1.2, -0.2}}, binary()); }), errc::negative_entry);
  EXPECT_EQ(error_code([] { validate_prediction_matrix("m", {{0.0, 0.0}}, binary()); }), errc::row_mass_zero);
  EXPECT_EQ(error_code([] { validate_prediction_matrix("m", {{0.2, 0.3, 0.5}}, binary()); }), errc::arity_mismatch);
  EXPECT_EQ(error_code([] { validate_prediction_matrix("m", {}, binary()); }), errc::empty_matrix);
  EXPECT_EQ(error_code([] { validate_prediction_matrix("m", {{std::nan(""), 1.0}}, binary()); }),
            errc::non_finite_entry);
}

TEST(Validate, RoundTripThroughSerializationIsExact) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto raw = daft::testing::random_matrix(rng, 7, 3, "r");
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < raw.rows(); ++i) rows.emplace_back(raw.row(i).begin(), raw.row(i).end());
    const auto first = validate_prediction_matrix("r", rows, raw.space(), raw.ids());
    const auto text = format_predictions(first);
    const auto second = parse_prediction_file(text, &first.space(), "mem").matrix;
    ASSERT_EQ(first, second);
    EXPECT_EQ(format_predictions(second), text);
  }
}

TEST(Mapping, Invariants) {
  const label_space three({"a", "b", "c"});
  EXPECT_EQ(error_code([&] { output_mapping(three, binary(), {1, 0, 0, 0, 1}); }), errc::mapping_arity_mismatch);
  EXPECT_EQ(error_code([&] { output_mapping(three, binary(), {1, 0, 0, -0.1, 1, 0}); }), errc::invalid_mapping);
  EXPECT_EQ(error_code([&] { output_mapping(three, binary(), {0, 0, 0, 0, 0, 0}); }), errc::invalid_mapping);
  EXPECT_EQ(error_code([&] { output_mapping(three, binary(), {0.7, 0, 0, 0.7, 1, 0}); }), errc::invalid_mapping);
  EXPECT_NO_THROW(output_mapping(three, binary(), {0.5, 0, 0, 0.5, 1, 0}));
}

TEST(MapOutputs, DropsClassAndRenormalizes) {
  const label_space three({"negative", "positive", "neutral"});
  const output_mapping drop(three, binary(), {1, 0, 0, 0, 1, 0});
  const auto pred = validate_prediction_matrix("tweet", {{0.5, 0.3, 0.2}}, three);
  const auto out = map_outputs(pred, drop);
  EXPECT_EQ(out.space(), binary());
  EXPECT_NEAR(out(0, 0), 0.625, 1e-15);
  EXPECT_NEAR(out(0, 1), 0.375, 1e-15);

  const auto lost = validate_prediction_matrix("tweet", {{0.0, 0.0, 1.0}}, three);
  EXPECT_EQ(error_code([&] { map_outputs(lost, drop); }), errc::zero_mass_after_mapping);
}

TEST(MapOutputs, IdentityIsBitwise) {
  std::mt19937_64 rng(3);
  for (std::size_t k : {2u, 3u, 5u}) {
    const auto p = daft::testing::random_matrix(rng, 40, k);
    const auto out = map_outputs(p, output_mapping::identity(p.space()));
    ASSERT_EQ(out.data().size(), p.data().size());
    EXPECT_EQ(std::memcmp(out.data().data(), p.data().data(), p.data().size() * sizeof(double)), 0);
    EXPECT_EQ(out.ids(), p.ids());
  }
}

TEST(MapOutputs, SourceSpaceMustMatch) {
  const auto p = validate_prediction_matrix("m", {{0.5, 0.5}}, label_space({"x", "y"}));
  EXPECT_EQ(error_code([&] { map_outputs(p, output_mapping::identity(binary())); }), errc::shape_mismatch);
}

TEST(MapOutputs, KeepsSimplex) {
  std::mt19937_64 rng(5);
  const auto src = daft::testing::classes(4);
  const output_mapping m(src, binary(), {0.5, 0.2, 0.0, 0.3, 0.1, 0.8, 1.0, 0.0});
  const auto out = map_outputs(daft::testing::random_matrix(rng, 200, 4), m);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    EXPECT_NEAR(out(i, 0) + out(i, 1), 1.0, 1e-12);
    EXPECT_GE(out(i, 0), 0.0);
    EXPECT_GE(out(i, 1), 0.0);
  }
}

TEST(Registry, Invariants) {
  model_descriptor a{"a", "b0", "d0", {}, binary(), output_mapping::identity(binary())};
  EXPECT_EQ(error_code([&] { registry(binary(), {}); }), errc::empty_ensemble);
  EXPECT_EQ(error_code([&] { registry(binary(), {a, a}); }), errc::duplicate_model_id);
  auto off = a;
  off.id = "c";
  off.native_space = label_space({"x", "y"});
  EXPECT_EQ(error_code([&] { registry(binary(), {a, off}); }), errc::mapping_arity_mismatch);
  EXPECT_EQ(registry(binary(), {a}).size(), 1u);
}

TEST(EnsembleWeights, Shapes) {
  const auto u = ensemble_weights::uniform(3, 4);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(u.intercept(k), 0.0);
    for (std::size_t m = 0; m < 4; ++m) EXPECT_EQ(u.weight(k, m), 0.25);
  }
  EXPECT_EQ(u.nonzero_models(), 4u);
  const std::vector<double> w{0.0, 0.5, 0.5};
  EXPECT_EQ(ensemble_weights::shared(2, w).nonzero_models(), 2u);
  EXPECT_EQ(error_code([] { ensemble_weights(2, 2, {1, 2, 3}, {0, 0}); }), errc::shape_mismatch);
  EXPECT_EQ(error_code([] { ensemble_weights(1, 1, {INFINITY}, {0}); }), errc::non_finite_weights);
}

TEST(CostModel, Validation) {
  cost_model<long long> cm{1, 1, 1, 1, 2, 3};
  EXPECT_EQ(error_code([&] { cm.validate(); }), errc::bad_config);
  cm.nonzero = 2;
  cm.forward = -1;
  EXPECT_EQ(error_code([&] { cm.validate(); }), errc::bad_config);
}
