// SPDX-License-Identifier: Apache-2.0
#pragma once

// Ensemble-layer random forest (RF) over the stacked N*K probability
// features. Gini splits, bootstrap rows, floor(sqrt(F)) candidate features
// per split, shallow trees. Tree t draws from its own generator seeded with
// seed + t, so training by tree in parallel is bit-identical to sequential.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "daft/core.hpp"
#include "daft/ensemble.hpp"
#include "daft/learners/lr.hpp"

namespace daft {

struct rf_config {
  int n_trees = 100;
  int max_depth = 2;
  std::uint64_t seed = 0;
  bool bootstrap = true;
  /// Worker threads; 1 trains sequentially.
  unsigned threads = 1;

  void validate() const {
    if (n_trees < 1) fail(errc::bad_config, "n_trees must be >= 1");
    if (max_depth < 1) fail(errc::bad_config, "max_depth must be >= 1");
    if (threads < 1) fail(errc::bad_config, "threads must be >= 1");
  }
};

struct tree_node {
  static constexpr int kLeaf = -1;
  int feature = kLeaf;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  /// Class distribution; populated on leaves only.
  std::vector<double> distribution;

  bool is_leaf() const noexcept { return feature == kLeaf; }
  friend bool operator==(const tree_node&, const tree_node&) = default;
};

struct decision_tree {
  std::vector<tree_node> nodes;  // nodes[0] is the root

  const std::vector<double>& leaf_for(std::span<const double> x) const {
    int at = 0;
    while (!nodes[at].is_leaf()) at = x[nodes[at].feature] <= nodes[at].threshold ? nodes[at].left : nodes[at].right;
    return nodes[at].distribution;
  }

  int depth() const { return depth_from(0); }

  friend bool operator==(const decision_tree&, const decision_tree&) = default;

 private:
  int depth_from(int at) const {
    if (nodes[at].is_leaf()) return 0;
    return 1 + std::max(depth_from(nodes[at].left), depth_from(nodes[at].right));
  }
};

struct rf_model {
  std::vector<decision_tree> trees;
  std::size_t classes = 0;
  std::size_t models = 0;  ///< N; features are N * classes
  int max_depth = 2;
  /// Set when every shot carried the same label; the forest is then a majority predictor.
  bool single_class_shots = false;

  std::size_t features() const noexcept { return models * classes; }
  friend bool operator==(const rf_model&, const rf_model&) = default;
};

namespace detail {

// Row-major n x F matrix of stacked per-model probabilities, feature m*K + k.
inline std::vector<double> stack_features(std::span<const prediction_matrix> preds) {
  const std::size_t n = preds.front().rows(), k_count = preds.front().arity(), f = preds.size() * k_count;
  std::vector<double> x(n * f);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t m = 0; m < preds.size(); ++m)
      for (std::size_t k = 0; k < k_count; ++k) x[i * f + m * k_count + k] = preds[m](i, k);
  return x;
}

inline double gini(std::span<const double> counts, double total) {
  if (total <= 0.0) return 0.0;
  double s = 0.0;
  for (double c : counts) s += (c / total) * (c / total);
  return 1.0 - s;
}

class tree_grower {
 public:
  tree_grower(std::span<const double> x, std::size_t n_features, std::span<const std::size_t> y, std::size_t classes,
              int max_depth, std::mt19937_64& rng)
      : x_(x), f_(n_features), y_(y), k_(classes), max_depth_(max_depth), rng_(rng),
        max_features_(std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n_features))))) {}

  decision_tree grow(std::vector<std::size_t> samples) {
    decision_tree tree;
    grow_node(tree, std::move(samples), 0);
    return tree;
  }

 private:
  struct split {
    int feature = tree_node::kLeaf;
    double threshold = 0.0;
    double impurity = std::numeric_limits<double>::infinity();
  };

  double value(std::size_t sample, std::size_t feature) const { return x_[sample * f_ + feature]; }

  std::vector<double> class_counts(const std::vector<std::size_t>& samples) const {
    std::vector<double> c(k_, 0.0);
    for (std::size_t s : samples) c[y_[s]] += 1.0;
    return c;
  }

  int grow_node(decision_tree& tree, std::vector<std::size_t> samples, int depth) {
    const int at = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const auto counts = class_counts(samples);
    const double total = static_cast<double>(samples.size());
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) <= 1;

    split best;
    if (depth < max_depth_ && !pure && samples.size() >= 2) best = find_split(samples);
    if (best.feature == tree_node::kLeaf) {
      auto& leaf = tree.nodes[at];
      leaf.distribution.resize(k_);
      for (std::size_t k = 0; k < k_; ++k) leaf.distribution[k] = counts[k] / total;
      return at;
    }

    std::vector<std::size_t> left, right;
    for (std::size_t s : samples) (value(s, best.feature) <= best.threshold ? left : right).push_back(s);
    tree.nodes[at].feature = best.feature;
    tree.nodes[at].threshold = best.threshold;
    const int l = grow_node(tree, std::move(left), depth + 1);
    const int r = grow_node(tree, std::move(right), depth + 1);
    tree.nodes[at].left = l;
    tree.nodes[at].right = r;
    return at;
  }

  // Visits features in random order until max_features non-constant ones have
  // been scored; constant features do not count against the budget.
  split find_split(const std::vector<std::size_t>& samples) {
    std::vector<std::size_t> features(f_);
    std::iota(features.begin(), features.end(), std::size_t{0});
    std::shuffle(features.begin(), features.end(), rng_);

    split best;
    std::size_t scored = 0;
    std::vector<std::size_t> sorted = samples;
    std::vector<double> left_counts(k_), right_counts(k_);
    const auto all_counts = class_counts(samples);
    const double total = static_cast<double>(samples.size());

    for (std::size_t feature : features) {
      if (scored >= max_features_) break;
      std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        const double va = value(a, feature), vb = value(b, feature);
        return va < vb || (va == vb && a < b);
      });
      if (value(sorted.front(), feature) >= value(sorted.back(), feature)) continue;
      ++scored;

      std::fill(left_counts.begin(), left_counts.end(), 0.0);
      right_counts = all_counts;
      for (std::size_t j = 0; j + 1 < sorted.size(); ++j) {
        const std::size_t label = y_[sorted[j]];
        left_counts[label] += 1.0;
        right_counts[label] -= 1.0;
        const double lo = value(sorted[j], feature), hi = value(sorted[j + 1], feature);
        if (!(lo < hi)) continue;
        const double nl = static_cast<double>(j + 1), nr = total - nl;
        const double impurity = (nl * gini(left_counts, nl) + nr * gini(right_counts, nr)) / total;
        if (impurity < best.impurity) {
          double threshold = lo + (hi - lo) / 2.0;
          if (!(threshold < hi)) threshold = lo;
          best = {static_cast<int>(feature), threshold, impurity};
        }
      }
    }
    return best;
  }

  std::span<const double> x_;
  std::size_t f_;
  std::span<const std::size_t> y_;
  std::size_t k_;
  int max_depth_;
  std::mt19937_64& rng_;
  std::size_t max_features_;
};

}  // namespace detail

inline rf_model fit_rf(std::span<const prediction_matrix> preds, const few_shot_set& shots, const rf_config& cfg = {}) {
  cfg.validate();
  detail::check_shots(preds, shots);
  const std::size_t n = shots.size(), k_count = preds.front().arity();

  rf_model model;
  model.classes = k_count;
  model.models = preds.size();
  model.max_depth = cfg.max_depth;
  model.single_class_shots =
      std::all_of(shots.labels.begin(), shots.labels.end(), [&](std::size_t l) { return l == shots.labels.front(); });

  const auto x = detail::stack_features(preds);
  const std::size_t f = model.features();
  model.trees.resize(static_cast<std::size_t>(cfg.n_trees));

  auto train_tree = [&](std::size_t t) {
    std::mt19937_64 rng(cfg.seed + t);
    std::vector<std::size_t> rows(n);
    if (cfg.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    detail::tree_grower grower(x, f, shots.labels, k_count, cfg.max_depth, rng);
    model.trees[t] = grower.grow(std::move(rows));
  };

  const std::size_t n_trees = model.trees.size();
  const unsigned workers = std::min<unsigned>(cfg.threads, static_cast<unsigned>(n_trees));
  if (workers <= 1) {
    for (std::size_t t = 0; t < n_trees; ++t) train_tree(t);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < n_trees; t += workers) train_tree(t);
      });
  }
  return model;
}

inline prediction_matrix predict_rf(const rf_model& model, std::span<const prediction_matrix> preds,
                                    std::string id = "rf-ensemble") {
  detail::check_aligned(preds);
  if (preds.size() != model.models || preds.front().arity() != model.classes)
    fail(errc::shape_mismatch, "forest expects " + std::to_string(model.models) + " models x " +
                                   std::to_string(model.classes) + " classes");
  if (model.trees.empty()) fail(errc::shape_mismatch, "forest has no trees");
  const std::size_t n = preds.front().rows(), f = model.features(), k_count = model.classes;
  const auto x = detail::stack_features(preds);
  std::vector<double> out(n * k_count, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> xi(x.data() + i * f, f);
    std::span<double> o(out.data() + i * k_count, k_count);
    for (const auto& tree : model.trees) {
      const auto& dist = tree.leaf_for(xi);
      for (std::size_t k = 0; k < k_count; ++k) o[k] += dist[k];
    }
    for (double& v : o) v /= static_cast<double>(model.trees.size());
  }
  return prediction_matrix::trusted(std::move(id), preds.front().space(), std::move(out), preds.front().ids());
}

}  // namespace daft
