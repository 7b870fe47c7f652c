// SPDX-License-Identifier: Apache-2.0
#pragma once

// Implementations behind the `daft` command-line tool. Each command returns
// a process exit code and writes human-readable output to `out`.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "daft/clients/fetch.hpp"
#include "daft/core.hpp"
#include "daft/ensemble.hpp"
#include "daft/io.hpp"
#include "daft/learners/lr.hpp"
#include "daft/learners/oracle.hpp"
#include "daft/learners/rf.hpp"
#include "daft/metrics.hpp"
#include "daft/report.hpp"
#include "daft/synthlab/verify.hpp"

namespace daft::cli {

namespace fs = std::filesystem;

inline constexpr const char* kEnsembleName = "daft-e-z";
inline constexpr const char* kVoteName = "majority-vote";
inline constexpr const char* kTrainingFormat = "daft-training/1";

struct loaded_suite {
  daft::registry registry;
  std::vector<prediction_matrix> mapped;  ///< target space, rows follow `samples.ids`
  few_shot_set samples;
};

/// Loads `<preds>/<model id>.jsonl` for every registry model, maps it to the
/// target classes and aligns rows with the labels file.
inline loaded_suite load_suite(const fs::path& registry_path, const fs::path& preds_dir, const fs::path& labels_path) {
  loaded_suite s{load_registry(registry_path), {}, read_labels(labels_path)};
  check_labels(s.samples.labels, s.registry.target().arity());
  for (const auto& m : s.registry.models()) {
    const auto path = preds_dir / (m.id + ".jsonl");
    if (!fs::exists(path)) fail(errc::io_error, "missing prediction file for model '" + m.id + "': " + path.string());
    try {
      const auto native = load_predictions(path, m.native_space);
      s.mapped.push_back(select_rows(map_outputs(native, m.mapping), s.samples.ids).with_model_id(m.id));
    } catch (const error& e) {
      fail(e.code(), "model '" + m.id + "' (" + path.string() + "): " + e.what());
    }
  }
  return s;
}

inline method_score score(const std::string& name, const prediction_matrix& p, const std::vector<std::size_t>& gold) {
  return {name, accuracy(p, gold), cross_entropy(p, gold)};
}

inline eval_report base_report(const loaded_suite& s, const std::string& dataset) {
  eval_report r;
  r.samples = s.samples.size();
  r.dataset = dataset;
  for (std::size_t m = 0; m < s.mapped.size(); ++m)
    r.methods.push_back(score(s.registry.models()[m].id, s.mapped[m], s.samples.labels));
  r.methods.push_back(score(kEnsembleName, average_ensemble(s.mapped), s.samples.labels));
  return r;
}

inline void add_model_ri(eval_report& r, const loaded_suite& s) {
  for (const auto& m : s.registry.models()) r.add_ri(m.id, kEnsembleName);
}

inline void write_report(const eval_report& r, const fs::path& out_path, std::ostream& out) {
  detail::write_text(out_path, format_report_json(r));
  out << format_report_text(r);
}

// ---------------------------------------------------------------------------

inline int ensemble_z(const fs::path& registry_path, const fs::path& preds_dir, const fs::path& labels_path,
                      const fs::path& out_path, const std::string& dataset, std::ostream& out) {
  const auto suite = load_suite(registry_path, preds_dir, labels_path);
  auto report = base_report(suite, dataset);
  add_model_ri(report, suite);
  write_report(report, out_path, out);
  return 0;
}

enum class learner_kind { lr, rf };

/// Picks `count` shots from the pool with a seeded shuffle; order follows the pool.
inline few_shot_set sample_shots(const few_shot_set& pool, std::size_t count, std::uint64_t seed) {
  if (count > pool.size())
    fail(errc::bad_config, "asked for " + std::to_string(count) + " shots from a pool of " + std::to_string(pool.size()));
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(count);
  std::sort(order.begin(), order.end());
  few_shot_set out;
  for (std::size_t i : order) {
    out.ids.push_back(pool.ids[i]);
    out.labels.push_back(pool.labels[i]);
  }
  return out;
}

inline int ensemble_fit(const fs::path& registry_path, const fs::path& preds_dir, const fs::path& shots_path,
                        learner_kind learner, std::uint64_t seed, const fs::path& out_path,
                        std::optional<std::size_t> shot_count, std::ostream& out) {
  auto suite = load_suite(registry_path, preds_dir, shots_path);
  if (shot_count) {
    const auto shots = sample_shots(suite.samples, *shot_count, seed);
    for (auto& p : suite.mapped) p = select_rows(p, shots.ids);
    suite.samples = shots;
  }
  if (suite.samples.size() == 0) fail(errc::empty_shots, "no few-shot samples in " + shots_path.string());

  json doc;
  prediction_matrix fitted;
  if (learner == learner_kind::lr) {
    lr_config cfg;
    cfg.seed = seed;
    const auto w = fit_lr(suite.mapped, suite.samples, cfg);
    fitted = weighted_ensemble(suite.mapped, w);
    doc = weights_to_json(w);
  } else {
    rf_config cfg;
    cfg.seed = seed;
    const auto forest = fit_rf(suite.mapped, suite.samples, cfg);
    if (forest.single_class_shots) out << "warning: every shot has the same label; forest predicts the majority\n";
    fitted = predict_rf(forest, suite.mapped);
    doc = forest_to_json(forest);
  }
  std::vector<std::string> ids;
  for (const auto& m : suite.registry.models()) ids.push_back(m.id);
  doc["training"] = {{"format", kTrainingFormat},
                     {"learner", learner == learner_kind::lr ? "lr" : "rf"},
                     {"seed", seed},
                     {"shots", suite.samples.size()},
                     {"model_ids", ids},
                     {"train_accuracy", accuracy(fitted, suite.samples.labels)},
                     {"train_cross_entropy", cross_entropy(fitted, suite.samples.labels)}};
  detail::write_text(out_path, doc.dump(2) + "\n");
  out << "fitted " << (learner == learner_kind::lr ? "lr" : "rf") << " on " << suite.samples.size()
      << " shots; train accuracy " << doc["training"]["train_accuracy"].get<double>() << "\n";
  return 0;
}

/// Applies a fitted ensemble-layer file to aligned predictions.
inline prediction_matrix apply_model_file(const fs::path& path, const loaded_suite& suite, std::string& name) {
  const auto doc = read_json_file(path);
  if (doc.contains("training") && doc["training"].contains("model_ids")) {
    const auto ids = doc["training"]["model_ids"].get<std::vector<std::string>>();
    std::vector<std::string> have;
    for (const auto& m : suite.registry.models()) have.push_back(m.id);
    if (ids != have) fail(errc::shape_mismatch, path.string() + " was fitted on a different model list");
  }
  const auto format = doc.value("format", "");
  if (format == kWeightsFormat) {
    name = "daft-e-lr";
    return weighted_ensemble(suite.mapped, weights_from_json(doc, path.string()), name);
  }
  if (format == kForestFormat) {
    name = "daft-e-rf";
    return predict_rf(forest_from_json(doc, path.string()), suite.mapped, name);
  }
  fail(errc::parse_error, path.string() + ": unknown model format '" + format + "'");
}

inline int eval(const fs::path& registry_path, const fs::path& preds_dir, const fs::path& labels_path,
                const std::vector<fs::path>& model_files, const fs::path& out_path, const std::string& dataset,
                std::ostream& out) {
  const auto suite = load_suite(registry_path, preds_dir, labels_path);
  auto report = base_report(suite, dataset);
  const auto votes = majority_vote(suite.mapped);
  report.methods.push_back({kVoteName, accuracy(votes, suite.samples.labels), std::nullopt});
  std::vector<std::string> learned;
  for (const auto& f : model_files) {
    std::string name;
    const auto p = apply_model_file(f, suite, name);
    if (report.find(name)) name += "#" + std::to_string(learned.size());
    report.methods.push_back(score(name, p, suite.samples.labels));
    learned.push_back(name);
  }
  add_model_ri(report, suite);
  for (const auto& name : learned) report.add_ri(name, kEnsembleName);
  write_report(report, out_path, out);
  return 0;
}

/// Manifest: {"targets": [{"tag", "registry", "preds", "labels"}]}, paths
/// relative to the manifest. Cells are per-model accuracies keyed by the
/// model's fine-tuning dataset tag.
inline int heatmap(const fs::path& manifest_path, const fs::path& out_path, std::ostream& out) {
  const auto doc = read_json_file(manifest_path);
  const auto base = manifest_path.parent_path();
  std::vector<heatmap_cell> cells;
  if (!doc.contains("targets") || !doc["targets"].is_array())
    fail(errc::parse_error, manifest_path.string() + ": missing 'targets' array");
  for (const auto& t : doc["targets"]) {
    const auto where = manifest_path.string();
    const auto tag = detail::get_field<std::string>(t, "tag", where);
    const auto suite = load_suite(base / detail::get_field<std::string>(t, "registry", where),
                                  base / detail::get_field<std::string>(t, "preds", where),
                                  base / detail::get_field<std::string>(t, "labels", where));
    for (std::size_t m = 0; m < suite.mapped.size(); ++m) {
      const auto& desc = suite.registry.models()[m];
      cells.push_back({desc.source_dataset_tag.empty() ? desc.id : desc.source_dataset_tag, tag,
                       accuracy(suite.mapped[m], suite.samples.labels)});
    }
  }
  const auto csv = "# format: daft-heatmap/1\n" + format_heatmap_csv(cells);
  detail::write_text(out_path, csv);
  out << csv;
  return 0;
}

inline int leep_command(const fs::path& preds_path, const fs::path& labels_path, std::size_t target_arity,
                        std::ostream& out) {
  const auto preds = read_prediction_file(preds_path).matrix;
  const auto labels = read_labels(labels_path);
  const auto aligned = select_rows(preds, labels.ids);
  const double value = leep(aligned, labels.labels, target_arity);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  out << "leep " << buf << "\n";
  return 0;
}

inline int cost_command(method m, const cost_model<double>& cm, std::ostream& out) {
  const auto c = cost_of(m, cm);
  char buf[128];
  std::snprintf(buf, sizeof buf, "method %s training %.17g inference %.17g\n", std::string(to_string(m)).c_str(),
                c.training, c.inference);
  out << buf;
  return 0;
}

// ---------------------------------------------------------------------------
// Synthetic verification

inline synth::suite_config suite_from_json(const json& doc) {
  synth::suite_config c;
  if (doc.contains("target")) {
    const auto& t = doc["target"];
    c.target.classes = t.value("classes", c.target.classes);
    c.target.dims = t.value("dims", c.target.dims);
    c.target.separation = t.value("separation", c.target.separation);
    c.target.noise = t.value("noise", c.target.noise);
  }
  c.models = doc.value("models", c.models);
  c.shift = doc.value("shift", c.shift);
  if (doc.contains("shifts")) c.shifts = doc["shifts"].get<std::vector<double>>();
  c.zero_shift_member = doc.value("zero_shift_member", c.zero_shift_member);
  c.train_samples = doc.value("train_samples", c.train_samples);
  c.test_samples = doc.value("test_samples", c.test_samples);
  c.shots = doc.value("shots", c.shots);
  c.fft_samples = doc.value("fft_samples", c.fft_samples);
  c.grid_resolution = doc.value("grid_resolution", c.grid_resolution);
  c.seed = doc.value("seed", c.seed);
  c.validate();
  return c;
}

/// The three-model oracle suite with a member trained on the target domain.
inline synth::suite_config default_prop3_suite() {
  synth::suite_config c;
  c.models = 3;
  c.zero_shift_member = true;
  c.train_samples = 1000;
  c.shots = 256;
  c.fft_samples = 2000;
  return c;
}

enum class verify_target { prop2, prop3, soup, learners };

inline int synth_verify(verify_target what, std::size_t trials, std::optional<std::uint64_t> seed,
                        const std::optional<fs::path>& config_path, const std::optional<fs::path>& csv_path,
                        std::ostream& out) {
  synth::suite_config cfg;
  if (what == verify_target::prop3) cfg = default_prop3_suite();
  if (what == verify_target::learners) cfg = synth::dominant_model_fixture();
  if (config_path) cfg = suite_from_json(read_json_file(*config_path));
  if (seed) cfg.seed = *seed;

  std::string csv;
  bool ok = true;
  char buf[256];
  switch (what) {
    case verify_target::prop2: {
      const auto r = synth::verify_prop2(cfg, trials);
      csv = synth::prop2_csv(r);
      ok = r.all_hold();
      std::snprintf(buf, sizeof buf, "averaged ensemble vs random member: %zu/%zu trials hold; min margin ce %.3g brier %.3g\n",
                    r.holding(), r.trials.size(), r.min_ce_margin(), r.min_brier_margin());
      out << buf;
      break;
    }
    case verify_target::prop3: {
      const auto r = synth::verify_prop3_suite(cfg, trials);
      csv = synth::prop3_csv(r);
      ok = r.all_hold();
      std::snprintf(buf, sizeof buf, "oracle weighting vs best member: %zu/%zu instances hold; max gap to optimum %.4f\n",
                    r.holding(), r.instances.size(), r.max_gap_to_optimum());
      out << buf;
      break;
    }
    case verify_target::soup: {
      const auto rows = synth::compare_soup(cfg, trials);
      csv = synth::soup_csv(rows);
      double soup = 0, ens = 0;
      for (const auto& r : rows) {
        soup += r.soup_accuracy;
        ens += r.ensemble_accuracy;
      }
      std::snprintf(buf, sizeof buf, "mean accuracy: uniform soup %.4f, averaged ensemble %.4f over %zu trials\n",
                    soup / rows.size(), ens / rows.size(), rows.size());
      out << buf;
      break;
    }
    case verify_target::learners: {
      const auto rows = synth::compare_learners(cfg, trials);
      csv = "trial,seed,average_accuracy,lr_accuracy,rf_accuracy,best_member_accuracy\n";
      double avg = 0, lr = 0, rf = 0;
      for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%llu,%.6f,%.6f,%.6f,%.6f\n", r.trial,
                      static_cast<unsigned long long>(r.seed), r.average_accuracy, r.lr_accuracy, r.rf_accuracy,
                      r.best_member_accuracy);
        csv += buf;
        avg += r.average_accuracy;
        lr += r.lr_accuracy;
        rf += r.rf_accuracy;
      }
      const double n = static_cast<double>(rows.size());
      std::snprintf(buf, sizeof buf, "mean accuracy: average %.4f, lr %.4f, rf %.4f over %zu trials\n", avg / n,
                    lr / n, rf / n, rows.size());
      out << buf;
      break;
    }
  }
  if (csv_path) detail::write_text(*csv_path, csv);
  return ok ? 0 : 3;
}

/// Writes one dominant-model instance as registry + prediction files, so the
/// file-based commands can be exercised end to end.
inline int synth_export(std::uint64_t seed, const fs::path& out_dir, std::ostream& out) {
  auto cfg = synth::dominant_model_fixture();
  cfg.seed = seed;
  const auto inst = synth::build_instance(cfg, 0);
  const auto space = synth::default_space(cfg.target.classes);
  json models = json::array();
  for (std::size_t m = 0; m < inst.members.size(); ++m) {
    const std::string id = "m" + std::to_string(m);
    std::vector<double> flat = inst.shot_preds[m].data();
    flat.insert(flat.end(), inst.test_preds[m].data().begin(), inst.test_preds[m].data().end());
    auto ids = inst.shot_preds[m].ids();
    ids.insert(ids.end(), inst.test_preds[m].ids().begin(), inst.test_preds[m].ids().end());
    store_predictions(out_dir / "preds" / (id + ".jsonl"),
                      prediction_matrix::trusted(id, space, std::move(flat), std::move(ids)));
    char tag[32];
    std::snprintf(tag, sizeof tag, "shift-%.2f", cfg.member_shift(m));
    models.push_back({{"id", id},
                      {"base_model_tag", "logistic"},
                      {"source_dataset_tag", tag},
                      {"backend", "synthetic:" + id},
                      {"classes", space.classes()}});
  }
  detail::write_text(out_dir / "registry.json",
                     json{{"format", kRegistryFormat}, {"classes", space.classes()}, {"models", models}}.dump(2) + "\n");
  write_labels(out_dir / "shots.jsonl", inst.shot_set());
  write_labels(out_dir / "test.jsonl", {inst.test.ids("test"), inst.test.y});
  out << "wrote " << inst.members.size() << " models, " << inst.shots.size() << " shots, " << inst.test.size()
      << " test samples to " << out_dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

/// Inputs file: JSON lines of {"id", "text"}. Writes `<out>/<model id>.jsonl`
/// for every HTTP-backed registry model.
inline int fetch_command(const fs::path& registry_path, const fs::path& inputs_path, const fs::path& out_dir,
                         const fetch_options& opt, prediction_cache& cache, bool parallel, std::ostream& out) {
  const auto reg = load_registry(registry_path);
  inference_request base;
  for (const auto& line : detail::split_lines(detail::read_text(inputs_path))) {
    const auto rec = detail::parse_json(line, inputs_path.string());
    base.ids.push_back(detail::get_field<std::string>(rec, "id", inputs_path.string()));
    base.inputs.push_back(detail::get_field<std::string>(rec, "text", inputs_path.string()));
  }
  std::vector<fetch_job> jobs;
  for (const auto& m : reg.models()) {
    if (m.backend.type != backend::kind::http_endpoint) continue;
    auto req = base;
    req.model_id = m.id;
    jobs.push_back({m.backend.location, std::move(req), m.native_space});
  }
  if (jobs.empty()) fail(errc::bad_config, "registry has no HTTP-backed models");
  const auto results = fetch_many(jobs, cache, opt, nullptr, parallel);
  for (const auto& p : results) {
    store_predictions(out_dir / (p.model_id() + ".jsonl"), p);
    out << "fetched " << p.rows() << " rows for " << p.model_id() << "\n";
  }
  return 0;
}

}  // namespace daft::cli
