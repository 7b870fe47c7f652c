// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>

#include "daft/ensemble.hpp"
#include "daft/metrics.hpp"
#include "testing.hpp"

using namespace daft;
using daft::testing::error_code;
using daft::testing::matrix;

TEST(Decide, ArgmaxLowestIndexTies) {
  EXPECT_EQ(decide(matrix({{0.6, 0.4}})), (std::vector<std::size_t>{0}));
  EXPECT_EQ(decide(matrix({{0.5, 0.5}})), (std::vector<std::size_t>{0}));
  EXPECT_EQ(decide(matrix({{0.1, 0.2, 0.7}})), (std::vector<std::size_t>{2}));
  EXPECT_EQ(decide(matrix({{0.4, 0.3, 0.3}, {0.2, 0.4, 0.4}})), (std::vector<std::size_t>{0, 1}));
}

TEST(Average, TwoRows) {
  const std::vector<prediction_matrix> p{matrix({{0.8, 0.2}}, "a"), matrix({{0.4, 0.6}}, "b")};
  const auto avg = average_ensemble(p);
  EXPECT_NEAR(avg(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(avg(0, 1), 0.4, 1e-15);
  EXPECT_EQ(decide(avg), (std::vector<std::size_t>{0}));
}

TEST(Average, SingleModelIsIdentity) {
  std::mt19937_64 rng(1);
  const std::vector<prediction_matrix> p{daft::testing::random_matrix(rng, 30, 3)};
  EXPECT_EQ(average_ensemble(p).data(), p[0].data());
}

TEST(Average, Errors) {
  EXPECT_EQ(error_code([] { average_ensemble(std::vector<prediction_matrix>{}); }), errc::empty_ensemble);
  const std::vector<prediction_matrix> rows{matrix({{0.5, 0.5}}), matrix({{0.5, 0.5}, {0.1, 0.9}})};
  EXPECT_EQ(error_code([&] { average_ensemble(rows); }), errc::shape_mismatch);
  const std::vector<prediction_matrix> arity{matrix({{0.5, 0.5}}), matrix({{0.2, 0.3, 0.5}})};
  EXPECT_EQ(error_code([&] { average_ensemble(arity); }), errc::shape_mismatch);
}

TEST(Average, PermutationInvariant) {
  std::mt19937_64 rng(2);
  std::vector<prediction_matrix> p;
  for (int m = 0; m < 5; ++m) p.push_back(daft::testing::random_matrix(rng, 25, 4, "m" + std::to_string(m)));
  const auto ref = average_ensemble(p);
  std::vector<std::size_t> order{0, 1, 2, 3, 4};
  while (std::next_permutation(order.begin(), order.end())) {
    std::vector<prediction_matrix> q;
    for (std::size_t i : order) q.push_back(p[i]);
    const auto got = average_ensemble(q);
    for (std::size_t i = 0; i < ref.data().size(); ++i) ASSERT_NEAR(got.data()[i], ref.data()[i], 1e-15);
    ASSERT_EQ(decide(got), decide(ref));
  }
}

TEST(Average, CopiesKeepDecisions) {
  std::mt19937_64 rng(4);
  const auto one = daft::testing::random_matrix(rng, 100, 3);
  const std::vector<prediction_matrix> copies(7, one);
  EXPECT_EQ(decide(average_ensemble(copies)), decide(one));
}

TEST(Average, JensenOnRandomInstances) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<prediction_matrix> p;
    for (int m = 0; m < 4; ++m) p.push_back(daft::testing::random_matrix(rng, 30, 3));
    const auto y = daft::testing::random_labels(rng, 30, 3);
    double ce = 0, br = 0;
    for (const auto& m : p) {
      ce += cross_entropy(m, y) / 4;
      br += brier(m, y) / 4;
    }
    const auto avg = average_ensemble(p);
    EXPECT_LT(cross_entropy(avg, y), ce);
    EXPECT_LT(brier(avg, y), br);
  }
}

TEST(Weighted, UniformEqualsAverage) {
  std::mt19937_64 rng(9);
  std::vector<prediction_matrix> p;
  for (int m = 0; m < 3; ++m) p.push_back(daft::testing::random_matrix(rng, 50, 4));
  const auto w = weighted_ensemble(p, ensemble_weights::uniform(4, 3));
  const auto a = average_ensemble(p);
  for (std::size_t i = 0; i < a.data().size(); ++i) EXPECT_NEAR(w.data()[i], a.data()[i], 1e-12);
}

TEST(Weighted, SingleModelUnitWeight) {
  std::mt19937_64 rng(10);
  const std::vector<prediction_matrix> p{daft::testing::random_matrix(rng, 20, 3)};
  const auto out = weighted_ensemble(p, ensemble_weights(3, 1, {1, 1, 1}, {0, 0, 0}));
  for (std::size_t i = 0; i < out.data().size(); ++i) EXPECT_NEAR(out.data()[i], p[0].data()[i], 1e-15);
}

TEST(Weighted, ZeroWeightsFallBackToUniform) {
  std::mt19937_64 rng(12);
  const std::vector<prediction_matrix> p{daft::testing::random_matrix(rng, 10, 4),
                                         daft::testing::random_matrix(rng, 10, 4)};
  const auto out = weighted_ensemble(p, ensemble_weights(4, 2, std::vector<double>(8, 0.0), {0, 0, 0, 0}));
  for (double v : out.data()) EXPECT_EQ(v, 0.25);
}

TEST(Weighted, NegativeScoresClampThenRenormalize) {
  const std::vector<prediction_matrix> p{matrix({{0.3, 0.7}})};
  // scores: 0.3 * 1 - 0.5 = -0.2 -> 0, 0.7 * 1 = 0.7
  const auto out = weighted_ensemble(p, ensemble_weights(2, 1, {1, 1}, {-0.5, 0}));
  EXPECT_EQ(out(0, 0), 0.0);
  EXPECT_EQ(out(0, 1), 1.0);
}

TEST(Weighted, ShapeMismatch) {
  const std::vector<prediction_matrix> p{matrix({{0.3, 0.7}}), matrix({{0.5, 0.5}})};
  EXPECT_EQ(error_code([&] { weighted_ensemble(p, ensemble_weights::uniform(2, 3)); }), errc::shape_mismatch);
  EXPECT_EQ(error_code([&] { weighted_ensemble(p, ensemble_weights::uniform(3, 2)); }), errc::shape_mismatch);
}

TEST(Vote, Examples) {
  const std::vector<prediction_matrix> three{matrix({{0.9, 0.1}}), matrix({{0.6, 0.4}}), matrix({{0.2, 0.8}})};
  EXPECT_EQ(majority_vote(three), (std::vector<std::size_t>{0}));
  const std::vector<prediction_matrix> tie{matrix({{0.9, 0.1}}), matrix({{0.2, 0.8}})};
  EXPECT_EQ(majority_vote(tie), (std::vector<std::size_t>{0}));
  const std::vector<prediction_matrix> flipped{matrix({{0.2, 0.8}}), matrix({{0.9, 0.1}})};
  EXPECT_EQ(majority_vote(flipped), (std::vector<std::size_t>{0}));
  std::mt19937_64 rng(13);
  const std::vector<prediction_matrix> one{daft::testing::random_matrix(rng, 40, 3)};
  EXPECT_EQ(majority_vote(one), decide(one[0]));
}
