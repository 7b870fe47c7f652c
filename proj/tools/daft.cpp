// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "daft/cli/commands.hpp"

namespace {

using daft::cli::fs::path;

struct files {
  std::string registry, preds, labels, out, dataset;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensembles of domain-adjacent fine-tuned classifiers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "daft 0.1.0");

  files ez;
  auto* cmd_ez = app.add_subcommand("ensemble-z", "Zero-shot average ensemble over prediction files");
  cmd_ez->add_option("--registry", ez.registry, "Registry manifest")->required()->check(CLI::ExistingFile);
  cmd_ez->add_option("--preds", ez.preds, "Directory of <model id>.jsonl prediction files")->required();
  cmd_ez->add_option("--test-labels", ez.labels, "Labels file (JSON lines of id, label)")->required();
  cmd_ez->add_option("--out", ez.out, "Report path (JSON)")->required();
  cmd_ez->add_option("--dataset", ez.dataset, "Dataset tag recorded in the report");

  files fit;
  std::string learner = "lr";
  std::uint64_t fit_seed = 0;
  std::optional<std::size_t> fit_n;
  auto* cmd_fit = app.add_subcommand("ensemble-fit", "Fit an ensemble layer (lr or rf) on few-shot samples");
  cmd_fit->add_option("--registry", fit.registry)->required()->check(CLI::ExistingFile);
  cmd_fit->add_option("--preds", fit.preds)->required();
  cmd_fit->add_option("--shots", fit.labels, "Labelled shot pool (JSON lines of id, label)")->required();
  cmd_fit->add_option("--learner", learner)->check(CLI::IsMember({"lr", "rf"}));
  cmd_fit->add_option("--seed", fit_seed);
  cmd_fit->add_option("--n", fit_n, "Sample this many shots from the pool using --seed");
  cmd_fit->add_option("--out", fit.out, "Model file")->required();

  files ev;
  std::vector<std::string> ev_models;
  auto* cmd_eval = app.add_subcommand("eval", "Evaluate members, the average ensemble and fitted ensemble layers");
  cmd_eval->add_option("--registry", ev.registry)->required()->check(CLI::ExistingFile);
  cmd_eval->add_option("--preds", ev.preds)->required();
  cmd_eval->add_option("--test-labels", ev.labels)->required();
  cmd_eval->add_option("--model", ev_models, "Model files from ensemble-fit");
  cmd_eval->add_option("--out", ev.out)->required();
  cmd_eval->add_option("--dataset", ev.dataset);

  std::string hm_manifest, hm_out;
  auto* cmd_hm = app.add_subcommand("heatmap", "Per-model accuracy CSV, fine-tuning dataset x evaluation dataset");
  cmd_hm->add_option("--manifest", hm_manifest)->required()->check(CLI::ExistingFile);
  cmd_hm->add_option("--out", hm_out)->required();

  std::string lp_preds, lp_labels;
  std::size_t lp_arity = 0;
  auto* cmd_leep = app.add_subcommand("leep", "LEEP score of source-model outputs against target labels");
  cmd_leep->add_option("--preds", lp_preds, "Prediction file over the source classes")->required();
  cmd_leep->add_option("--labels", lp_labels)->required();
  cmd_leep->add_option("--target-classes", lp_arity, "Target arity (default: max label + 1)");

  std::string cost_method;
  daft::cost_model<double> cm;
  auto* cmd_cost = app.add_subcommand("cost", "Symbolic training and inference cost of a method");
  cmd_cost->add_option("--method", cost_method)
      ->required()
      ->check(CLI::IsMember({"ft", "daft-z", "daft-e-z", "da-ft2", "daft-e"}));
  cmd_cost->add_option("--n", cm.shots, "Few-shot samples");
  cmd_cost->add_option("--cf", cm.forward, "Forward-pass cost");
  cmd_cost->add_option("--cb", cm.backward, "Backward-pass cost");
  cmd_cost->add_option("--E", cm.epochs, "Epochs");
  cmd_cost->add_option("--N", cm.models, "Ensemble size");
  cmd_cost->add_option("--nbar", cm.nonzero, "Nonzero ensemble weights");

  std::string sv_prop = "2";
  std::size_t sv_trials = 100;
  std::optional<std::uint64_t> sv_seed;
  std::optional<std::string> sv_config, sv_csv;
  auto* cmd_sv = app.add_subcommand("synth-verify", "Run the synthetic verification harness");
  cmd_sv->add_option("--prop", sv_prop, "2, 3, soup or learners")->check(CLI::IsMember({"2", "3", "soup", "learners"}));
  cmd_sv->add_option("--trials", sv_trials);
  cmd_sv->add_option("--seed", sv_seed);
  cmd_sv->add_option("--config", sv_config, "Suite config (JSON)");
  cmd_sv->add_option("--csv", sv_csv, "Write per-trial rows here");

  std::uint64_t sx_seed = 2024;
  std::string sx_out;
  auto* cmd_sx = app.add_subcommand("synth-export", "Write a synthetic dominant-model fixture as files");
  cmd_sx->add_option("--seed", sx_seed);
  cmd_sx->add_option("--out", sx_out)->required();

  std::string fe_registry, fe_inputs, fe_out;
  std::optional<std::string> fe_cache;
  daft::fetch_options fe_opt;
  long fe_timeout_ms = 30000;
  bool fe_sequential = false;
  auto* cmd_fetch = app.add_subcommand("fetch", "Query HTTP-backed models and write prediction files");
  cmd_fetch->add_option("--registry", fe_registry)->required()->check(CLI::ExistingFile);
  cmd_fetch->add_option("--inputs", fe_inputs, "JSON lines of id, text")->required();
  cmd_fetch->add_option("--out", fe_out)->required();
  cmd_fetch->add_option("--cache-dir", fe_cache, "Cache directory (default: $DAFT_CACHE_DIR)");
  cmd_fetch->add_option("--batch-size", fe_opt.batch_size);
  cmd_fetch->add_option("--in-flight", fe_opt.in_flight, "Concurrent batches per model");
  cmd_fetch->add_option("--timeout-ms", fe_timeout_ms);
  cmd_fetch->add_option("--retries", fe_opt.retries);
  cmd_fetch->add_flag("--sequential", fe_sequential, "Fetch one batch at a time");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_ez) return daft::cli::ensemble_z(ez.registry, ez.preds, ez.labels, ez.out, ez.dataset, std::cout);
    if (*cmd_fit)
      return daft::cli::ensemble_fit(fit.registry, fit.preds, fit.labels,
                                     learner == "lr" ? daft::cli::learner_kind::lr : daft::cli::learner_kind::rf,
                                     fit_seed, fit.out, fit_n, std::cout);
    if (*cmd_eval) {
      std::vector<path> models(ev_models.begin(), ev_models.end());
      return daft::cli::eval(ev.registry, ev.preds, ev.labels, models, ev.out, ev.dataset, std::cout);
    }
    if (*cmd_hm) return daft::cli::heatmap(hm_manifest, hm_out, std::cout);
    if (*cmd_leep) return daft::cli::leep_command(lp_preds, lp_labels, lp_arity, std::cout);
    if (*cmd_cost) {
      if (!cmd_cost->count("--nbar")) cm.nonzero = cm.models;
      return daft::cli::cost_command(*daft::parse_method(cost_method), cm, std::cout);
    }
    if (*cmd_sv) {
      using daft::cli::verify_target;
      const verify_target what = sv_prop == "2"      ? verify_target::prop2
                                 : sv_prop == "3"    ? verify_target::prop3
                                 : sv_prop == "soup" ? verify_target::soup
                                                     : verify_target::learners;
      std::optional<path> config, csv;
      if (sv_config) config = *sv_config;
      if (sv_csv) csv = *sv_csv;
      return daft::cli::synth_verify(what, sv_trials, sv_seed, config, csv, std::cout);
    }
    if (*cmd_sx) return daft::cli::synth_export(sx_seed, sx_out, std::cout);
    if (*cmd_fetch) {
      fe_opt.timeout = std::chrono::milliseconds(fe_timeout_ms);
      if (fe_sequential) fe_opt.in_flight = 1;
      auto cache = fe_cache ? daft::prediction_cache(*fe_cache) : daft::prediction_cache::from_environment();
      return daft::cli::fetch_command(fe_registry, fe_inputs, fe_out, fe_opt, cache, !fe_sequential, std::cout);
    }
  } catch (const daft::error& e) {
    std::cerr << "daft: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "daft: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
