// SPDX-License-Identifier: Apache-2.0
#pragma once

// Executable checks of the ensembling guarantees on synthetic model suites:
//
//  * the averaged ensemble never loses to a uniformly random member under a
//    convex loss (Jensen), checked per trial for cross-entropy and Brier;
//  * the best grid weighting is never worse than the best single member, and
//    with a member trained on the target domain it sits close to the full
//    fine-tuning optimum;
//  * uniform weight soups versus output averaging;
//  * learned ensemble layers versus the zero-shot average.
//
// Every quantity is a pure function of (config, seed, trial index).

#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "daft/ensemble.hpp"
#include "daft/learners/lr.hpp"
#include "daft/learners/oracle.hpp"
#include "daft/learners/rf.hpp"
#include "daft/metrics.hpp"
#include "daft/synthlab/domain.hpp"

namespace daft::synth {

inline constexpr double kJensenSlack = 1e-12;

struct suite_config {
  domain_config target;  ///< shift fields are ignored; the target is the reference domain
  std::size_t models = 5;
  double shift = 1.0;
  /// Per-member shift overrides; when non-empty its size must equal `models`.
  std::vector<double> shifts;
  /// Replace member 0 by a model trained on the target domain itself.
  bool zero_shift_member = false;
  std::size_t train_samples = 200;
  std::size_t test_samples = 1000;
  std::size_t shots = 128;
  std::size_t fft_samples = 2000;
  double grid_resolution = 0.05;
  std::uint64_t seed = 1;
  train_config training;

  void validate() const {
    target.validate();
    if (models < 1) fail(errc::bad_config, "a suite needs at least one model");
    if (!shifts.empty() && shifts.size() != models) fail(errc::bad_config, "shifts must list one value per model");
    for (double s : shifts)
      if (!(s >= 0.0)) fail(errc::bad_config, "shifts must be >= 0");
    if (!(shift >= 0.0)) fail(errc::bad_config, "shift must be >= 0");
    if (train_samples < 2 || test_samples < 1 || shots < 1 || fft_samples < 2)
      fail(errc::bad_config, "sample sizes too small");
  }

  double member_shift(std::size_t m) const {
    if (zero_shift_member && m == 0) return 0.0;
    return shifts.empty() ? shift : shifts[m];
  }
};

/// One generated instance: members fine-tuned on adjacent domains, plus a
/// held-out test set and a few-shot set drawn from the target domain.
struct suite_instance {
  std::uint64_t seed = 0;
  synthetic_domain target{domain_config{}};
  std::vector<synthetic_model> members;
  labeled_sample test;
  labeled_sample shots;
  std::vector<prediction_matrix> test_preds;
  std::vector<prediction_matrix> shot_preds;

  few_shot_set shot_set() const { return {shots.ids("shot"), shots.y}; }
};

inline std::uint64_t trial_seed(const suite_config& cfg, std::size_t trial) { return mix_seed(cfg.seed, trial); }

inline domain_config member_domain(const suite_config& cfg, std::uint64_t seed, std::size_t m) {
  domain_config d = cfg.target;
  d.seed = seed;
  d.shift = cfg.member_shift(m);
  d.shift_seed = mix_seed(seed, 100 + m);
  return d;
}

inline suite_instance build_instance(const suite_config& cfg, std::size_t trial) {
  cfg.validate();
  suite_instance inst;
  inst.seed = trial_seed(cfg, trial);
  domain_config target = cfg.target;
  target.seed = inst.seed;
  target.shift = 0.0;
  inst.target = synthetic_domain(target);
  inst.test = inst.target.sample(cfg.test_samples, mix_seed(inst.seed, 1));
  inst.shots = inst.target.sample(cfg.shots, mix_seed(inst.seed, 2));
  const auto test_ids = inst.test.ids("test");
  const auto shot_ids = inst.shots.ids("shot");
  for (std::size_t m = 0; m < cfg.models; ++m) {
    const synthetic_domain domain(member_domain(cfg, inst.seed, m));
    inst.members.push_back(train_synthetic(domain, cfg.train_samples, mix_seed(inst.seed, 200 + m), cfg.training));
    const std::string id = "m" + std::to_string(m);
    inst.test_preds.push_back(inst.members.back().predict(inst.test, id, test_ids));
    inst.shot_preds.push_back(inst.members.back().predict(inst.shots, id, shot_ids));
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Averaged ensemble versus a random member

struct jensen_result {
  double ce_ensemble = 0.0;
  double ce_member_mean = 0.0;
  double brier_ensemble = 0.0;
  double brier_member_mean = 0.0;
  /// Some pair of members assigns different probability to a gold label.
  bool gold_disagreement = false;
  /// Some pair of members produces different rows.
  bool row_disagreement = false;

  double ce_margin() const { return ce_member_mean - ce_ensemble; }
  double brier_margin() const { return brier_member_mean - brier_ensemble; }

  bool holds() const { return ce_margin() >= -kJensenSlack && brier_margin() >= -kJensenSlack; }
  /// Cross-entropy is strictly convex in p(gold) and Brier in the whole row,
  /// so each margin must be positive once the matching disagreement exists.
  bool strict_where_required() const {
    return (!gold_disagreement || ce_margin() > 0.0) && (!row_disagreement || brier_margin() > 0.0);
  }
};

inline jensen_result jensen_check(std::span<const prediction_matrix> preds, std::span<const std::size_t> labels) {
  jensen_result r;
  const auto avg = average_ensemble(preds);
  r.ce_ensemble = cross_entropy(avg, labels);
  r.brier_ensemble = brier(avg, labels);
  for (const auto& p : preds) {
    r.ce_member_mean += cross_entropy(p, labels);
    r.brier_member_mean += brier(p, labels);
  }
  r.ce_member_mean /= static_cast<double>(preds.size());
  r.brier_member_mean /= static_cast<double>(preds.size());
  for (std::size_t m = 1; m < preds.size(); ++m) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto a = preds[0].row(i), b = preds[m].row(i);
      if (a[labels[i]] != b[labels[i]]) r.gold_disagreement = true;
      if (!std::equal(a.begin(), a.end(), b.begin())) r.row_disagreement = true;
    }
  }
  return r;
}

struct prop2_trial {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  jensen_result result;
};

struct prop2_report {
  std::vector<prop2_trial> trials;

  std::size_t holding() const {
    std::size_t n = 0;
    for (const auto& t : trials) n += t.result.holds() && t.result.strict_where_required();
    return n;
  }
  bool all_hold() const { return holding() == trials.size(); }
  double min_ce_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& t : trials) m = std::min(m, t.result.ce_margin());
    return m;
  }
  double min_brier_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& t : trials) m = std::min(m, t.result.brier_margin());
    return m;
  }
};

inline prop2_report verify_prop2(const suite_config& cfg, std::size_t trials) {
  if (trials < 1) fail(errc::bad_config, "trials must be >= 1");
  prop2_report report;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto inst = build_instance(cfg, t);
    report.trials.push_back({t, inst.seed, jensen_check(inst.test_preds, inst.test.y)});
  }
  return report;
}

inline std::string prop2_csv(const prop2_report& r) {
  std::string out =
      "trial,seed,ce_ensemble,ce_member_mean,ce_margin,brier_ensemble,brier_member_mean,brier_margin,holds\n";
  char buf[512];
  for (const auto& t : r.trials) {
    const auto& j = t.result;
    std::snprintf(buf, sizeof buf, "%zu,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", t.trial,
                  static_cast<unsigned long long>(t.seed), j.ce_ensemble, j.ce_member_mean, j.ce_margin(),
                  j.brier_ensemble, j.brier_member_mean, j.brier_margin(),
                  j.holds() && j.strict_where_required() ? 1 : 0);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Oracle weighting versus the best member and the full fine-tuning optimum

struct prop3_instance {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::vector<double> oracle_weights;
  double oracle_loss = 0.0;  ///< on the target shots the oracle minimized over
  double grid_step_slack = 0.0;
  std::vector<double> member_loss;  ///< l(M_i) on the same shots
  double min_member_loss = 0.0;
  /// l(M~_i): member i's base fine-tuned on the target domain.
  std::vector<double> fft_loss;
  double optimum_loss = 0.0;  ///< l(M~*), the best of fft_loss
  double heldout_oracle_loss = 0.0;
  double heldout_optimum_loss = 0.0;

  bool holds() const { return oracle_loss <= min_member_loss + grid_step_slack; }
  double gap_to_optimum() const { return oracle_loss - optimum_loss; }
  /// mu(M~_i, M~*) = l(M~_i) - l(M~*).
  double mu(std::size_t i) const { return fft_loss[i] - optimum_loss; }
  /// Empirical adjacency penalty l(M_i) - l(M~_i); no distance is claimed.
  double adjacency_gap(std::size_t i) const { return member_loss[i] - fft_loss[i]; }
};

inline prop3_instance verify_prop3(const suite_config& cfg, std::size_t trial = 0) {
  if (cfg.models > kOracleMaxModels) fail(errc::too_many_models, "oracle check supports at most 5 models");
  const auto inst = build_instance(cfg, trial);
  const auto shots = inst.shot_set();
  prop3_instance r;
  r.trial = trial;
  r.seed = inst.seed;

  const auto oracle = grid_oracle_search(inst.shot_preds, shots, cfg.grid_resolution);
  r.oracle_weights = oracle.weights;
  r.oracle_loss = oracle.loss;
  r.grid_step_slack = oracle.grid_step_slack;
  r.min_member_loss = std::numeric_limits<double>::infinity();
  for (const auto& p : inst.shot_preds) {
    r.member_loss.push_back(cross_entropy(p, shots.labels));
    r.min_member_loss = std::min(r.min_member_loss, r.member_loss.back());
  }

  std::size_t best = 0;
  std::vector<synthetic_model> fft;
  for (std::size_t m = 0; m < cfg.models; ++m) {
    fft.push_back(train_synthetic(inst.target, cfg.fft_samples, mix_seed(inst.seed, 300 + m), cfg.training));
    r.fft_loss.push_back(cross_entropy(fft.back().predict(inst.shots), shots.labels));
    if (r.fft_loss.back() < r.fft_loss[best]) best = m;
  }
  r.optimum_loss = r.fft_loss[best];

  const auto weights = ensemble_weights::shared(inst.target.classes(), r.oracle_weights);
  r.heldout_oracle_loss = cross_entropy(weighted_ensemble(inst.test_preds, weights), inst.test.y);
  r.heldout_optimum_loss = cross_entropy(fft[best].predict(inst.test), inst.test.y);
  return r;
}

struct prop3_report {
  std::vector<prop3_instance> instances;

  std::size_t holding() const {
    std::size_t n = 0;
    for (const auto& i : instances) n += i.holds();
    return n;
  }
  bool all_hold() const { return holding() == instances.size(); }
  double max_gap_to_optimum() const {
    double g = -std::numeric_limits<double>::infinity();
    for (const auto& i : instances) g = std::max(g, i.gap_to_optimum());
    return g;
  }
};

inline prop3_report verify_prop3_suite(const suite_config& cfg, std::size_t instances) {
  if (instances < 1) fail(errc::bad_config, "instances must be >= 1");
  prop3_report r;
  for (std::size_t t = 0; t < instances; ++t) r.instances.push_back(verify_prop3(cfg, t));
  return r;
}

inline std::string prop3_csv(const prop3_report& r) {
  std::string out =
      "trial,seed,oracle_loss,min_member_loss,grid_step_slack,optimum_loss,gap_to_optimum,heldout_oracle_loss,"
      "heldout_optimum_loss,holds,weights\n";
  char buf[512];
  for (const auto& i : r.instances) {
    std::string w;
    for (std::size_t m = 0; m < i.oracle_weights.size(); ++m) {
      if (m) w += ';';
      std::snprintf(buf, sizeof buf, "%.2f", i.oracle_weights[m]);
      w += buf;
    }
    std::snprintf(buf, sizeof buf, "%zu,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%s\n", i.trial,
                  static_cast<unsigned long long>(i.seed), i.oracle_loss, i.min_member_loss, i.grid_step_slack,
                  i.optimum_loss, i.gap_to_optimum(), i.heldout_oracle_loss, i.heldout_optimum_loss,
                  i.holds() ? 1 : 0, w.c_str());
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Uniform soup versus output averaging

struct soup_row {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double soup_accuracy = 0.0;
  double ensemble_accuracy = 0.0;
  double soup_ce = 0.0;
  double ensemble_ce = 0.0;
};

inline std::vector<soup_row> compare_soup(const suite_config& cfg, std::size_t trials) {
  std::vector<soup_row> rows;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto inst = build_instance(cfg, t);
    const auto soup = uniform_soup(inst.members).predict(inst.test, "soup", inst.test.ids("test"));
    const auto avg = average_ensemble(inst.test_preds);
    rows.push_back({t, inst.seed, accuracy(soup, inst.test.y), accuracy(avg, inst.test.y),
                    cross_entropy(soup, inst.test.y), cross_entropy(avg, inst.test.y)});
  }
  return rows;
}

inline std::string soup_csv(const std::vector<soup_row>& rows) {
  std::string out = "trial,seed,soup_accuracy,ensemble_accuracy,soup_ce,ensemble_ce\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%llu,%.6f,%.6f,%.6f,%.6f\n", r.trial, static_cast<unsigned long long>(r.seed),
                  r.soup_accuracy, r.ensemble_accuracy, r.soup_ce, r.ensemble_ce);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Learned ensemble layers versus the zero-shot average

struct learner_row {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double average_accuracy = 0.0;
  double lr_accuracy = 0.0;
  double rf_accuracy = 0.0;
  double best_member_accuracy = 0.0;
};

inline std::vector<learner_row> compare_learners(const suite_config& cfg, std::size_t trials, lr_config lr = {},
                                                 rf_config rf = {}) {
  std::vector<learner_row> rows;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto inst = build_instance(cfg, t);
    const auto shots = inst.shot_set();
    lr.seed = inst.seed;
    rf.seed = inst.seed;
    learner_row row{t, inst.seed};
    row.average_accuracy = accuracy(average_ensemble(inst.test_preds), inst.test.y);
    row.lr_accuracy =
        accuracy(weighted_ensemble(inst.test_preds, fit_lr(inst.shot_preds, shots, lr)), inst.test.y);
    row.rf_accuracy = accuracy(predict_rf(fit_rf(inst.shot_preds, shots, rf), inst.test_preds), inst.test.y);
    for (const auto& p : inst.test_preds) row.best_member_accuracy = std::max(row.best_member_accuracy, accuracy(p, inst.test.y));
    rows.push_back(row);
  }
  return rows;
}

/// Members 1..N-1 are far from the target; member 0 is trained on it.
inline suite_config dominant_model_fixture() {
  suite_config cfg;
  cfg.models = 5;
  cfg.zero_shift_member = true;
  cfg.shift = 3.0;
  cfg.shots = 128;
  cfg.seed = 2024;
  return cfg;
}

// ---------------------------------------------------------------------------
// Accuracy decay with domain shift

/// accuracy[s][seed]: a model trained on the reference domain, evaluated on
/// the domain shifted by shifts[s]. Test draws share a seed across shifts.
inline std::vector<std::vector<double>> accuracy_vs_shift(const domain_config& base, std::span<const double> shifts,
                                                          std::size_t seeds, std::size_t train_samples = 200,
                                                          std::size_t test_samples = 2000) {
  std::vector<std::vector<double>> acc(shifts.size(), std::vector<double>(seeds));
  for (std::size_t s = 0; s < seeds; ++s) {
    domain_config ref = base;
    ref.seed = mix_seed(base.seed, s);
    ref.shift = 0.0;
    const auto model = train_synthetic(synthetic_domain(ref), train_samples, mix_seed(ref.seed, 1));
    for (std::size_t j = 0; j < shifts.size(); ++j) {
      domain_config shifted = ref;
      shifted.shift = shifts[j];
      shifted.shift_seed = mix_seed(ref.seed, 2);
      const auto test = synthetic_domain(shifted).sample(test_samples, mix_seed(ref.seed, 3));
      acc[j][s] = accuracy(model.predict(test), test.y);
    }
  }
  return acc;
}

}  // namespace daft::synth
