// SPDX-License-Identifier: Apache-2.0
#pragma once

// On-disk formats.
//
//   prediction file   JSON lines; line 1 {"model_id", "classes"}, then one
//                     {"id", "probs", ["label"]} record per sample
//   labels file       JSON lines of {"id", "label"}
//   registry manifest JSON object {"classes", "models": [...]}
//   weights / forest  JSON objects tagged "daft-weights/1" / "daft-forest/1"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "daft/core.hpp"
#include "daft/learners/rf.hpp"

namespace daft {

using json = nlohmann::ordered_json;

inline constexpr const char* kWeightsFormat = "daft-weights/1";
inline constexpr const char* kForestFormat = "daft-forest/1";
inline constexpr const char* kRegistryFormat = "daft-registry/1";

namespace detail {

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io_error, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::io_error, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(errc::io_error, "short write to '" + path.string() + "'");
}

inline json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(errc::parse_error, where + ": " + e.what());
  }
}

template <class T>
T get_field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) fail(errc::parse_error, where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(errc::parse_error, where + ": field '" + key + "': " + e.what());
  }
}

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Prediction files

struct prediction_file {
  prediction_matrix matrix;
  /// Per-record gold labels, present only if every record carried one.
  std::optional<std::vector<std::size_t>> labels;
};

inline prediction_file parse_prediction_file(const std::string& text, const label_space* expected,
                                             const std::string& where = "prediction file") {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) fail(errc::parse_error, where + ": empty file");
  const auto header = detail::parse_json(lines.front(), where + " header");
  const auto model_id = detail::get_field<std::string>(header, "model_id", where + " header");
  label_space space(detail::get_field<std::vector<std::string>>(header, "classes", where + " header"));
  if (expected && !(space == *expected))
    fail(errc::header_mismatch, where + ": classes of '" + model_id + "' differ from the declared label space");

  std::vector<std::vector<double>> rows;
  std::vector<std::string> ids;
  std::vector<std::size_t> labels;
  bool all_labelled = true;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string at = where + " line " + std::to_string(i + 1);
    const auto rec = detail::parse_json(lines[i], at);
    ids.push_back(detail::get_field<std::string>(rec, "id", at));
    rows.push_back(detail::get_field<std::vector<double>>(rec, "probs", at));
    if (rec.contains("label")) {
      labels.push_back(detail::get_field<std::size_t>(rec, "label", at));
    } else {
      all_labelled = false;
    }
  }
  prediction_file out{validate_prediction_matrix(model_id, rows, space, std::move(ids)), std::nullopt};
  if (all_labelled && !labels.empty()) {
    check_labels(labels, space.arity());
    out.labels = std::move(labels);
  }
  return out;
}

inline prediction_file read_prediction_file(const std::filesystem::path& path, const label_space* expected = nullptr) {
  return parse_prediction_file(detail::read_text(path), expected, path.string());
}

inline prediction_matrix load_predictions(const std::filesystem::path& path, const label_space& expected) {
  return read_prediction_file(path, &expected).matrix;
}

inline std::string format_predictions(const prediction_matrix& pred,
                                      const std::vector<std::size_t>* labels = nullptr) {
  std::string out = json{{"model_id", pred.model_id()}, {"classes", pred.space().classes()}}.dump() + "\n";
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    const auto r = pred.row(i);
    json rec{{"id", pred.ids().empty() ? std::to_string(i) : pred.ids()[i]},
             {"probs", std::vector<double>(r.begin(), r.end())}};
    if (labels) rec["label"] = labels->at(i);
    out += rec.dump() + "\n";
  }
  return out;
}

inline void store_predictions(const std::filesystem::path& path, const prediction_matrix& pred,
                              const std::vector<std::size_t>* labels = nullptr) {
  detail::write_text(path, format_predictions(pred, labels));
}

// ---------------------------------------------------------------------------
// Labels files

inline few_shot_set read_labels(const std::filesystem::path& path) {
  const auto lines = detail::split_lines(detail::read_text(path));
  few_shot_set set;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string at = path.string() + " line " + std::to_string(i + 1);
    const auto rec = detail::parse_json(lines[i], at);
    set.ids.push_back(detail::get_field<std::string>(rec, "id", at));
    set.labels.push_back(detail::get_field<std::size_t>(rec, "label", at));
  }
  return set;
}

inline void write_labels(const std::filesystem::path& path, const few_shot_set& set) {
  std::string out;
  for (std::size_t i = 0; i < set.size(); ++i) out += json{{"id", set.ids[i]}, {"label", set.labels[i]}}.dump() + "\n";
  detail::write_text(path, out);
}

/// Reorders the rows of `pred` to follow `ids`.
inline prediction_matrix select_rows(const prediction_matrix& pred, const std::vector<std::string>& ids) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < pred.ids().size(); ++i) index.emplace(pred.ids()[i], i);
  const std::size_t k = pred.arity();
  std::vector<double> flat;
  flat.reserve(ids.size() * k);
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) fail(errc::missing_sample, "model '" + pred.model_id() + "' has no prediction for '" + id + "'");
    const auto r = pred.row(it->second);
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return prediction_matrix::trusted(pred.model_id(), pred.space(), std::move(flat), ids);
}

// ---------------------------------------------------------------------------
// Registry manifest

namespace detail {

inline daft::backend parse_backend(const std::string& value) {
  if (value.rfind("http://", 0) == 0 || value.rfind("https://", 0) == 0)
    return {backend::kind::http_endpoint, value};
  if (value.rfind("synthetic:", 0) == 0) return {backend::kind::synthetic, value.substr(10)};
  if (value.rfind("file:", 0) == 0) return {backend::kind::prediction_file, value.substr(5)};
  return {backend::kind::prediction_file, value};
}

inline std::string format_backend(const daft::backend& b) {
  switch (b.type) {
    case backend::kind::http_endpoint: return b.location;
    case backend::kind::synthetic: return "synthetic:" + b.location;
    case backend::kind::prediction_file: return "file:" + b.location;
  }
  return b.location;
}

}  // namespace detail

inline registry parse_registry(const std::string& text, const std::string& where = "registry") {
  const auto doc = detail::parse_json(text, where);
  label_space target(detail::get_field<std::vector<std::string>>(doc, "classes", where));
  if (!doc.contains("models") || !doc["models"].is_array()) fail(errc::parse_error, where + ": missing 'models' array");
  std::vector<model_descriptor> models;
  for (std::size_t i = 0; i < doc["models"].size(); ++i) {
    const auto& m = doc["models"][i];
    const std::string at = where + " models[" + std::to_string(i) + "]";
    model_descriptor d;
    d.id = detail::get_field<std::string>(m, "id", at);
    d.base_model_tag = m.value("base_model_tag", "");
    d.source_dataset_tag = m.value("source_dataset_tag", "");
    d.backend = detail::parse_backend(m.value("backend", ""));
    d.native_space = m.contains("classes")
                         ? label_space(detail::get_field<std::vector<std::string>>(m, "classes", at))
                         : target;
    if (m.contains("mapping")) {
      const auto flat = detail::get_field<std::vector<double>>(m, "mapping", at);
      try {
        d.mapping = output_mapping(d.native_space, target, flat);
      } catch (const error& e) {
        fail(e.code(), "model '" + d.id + "': " + e.what());
      }
    } else if (d.native_space == target) {
      d.mapping = output_mapping::identity(target);
    } else {
      fail(errc::mapping_arity_mismatch, "model '" + d.id + "' has its own classes but no mapping");
    }
    models.push_back(std::move(d));
  }
  return registry(std::move(target), std::move(models));
}

inline registry load_registry(const std::filesystem::path& path) {
  return parse_registry(detail::read_text(path), path.string());
}

inline std::string format_registry(const registry& reg) {
  json models = json::array();
  for (const auto& m : reg.models()) {
    models.push_back({{"id", m.id},
                      {"base_model_tag", m.base_model_tag},
                      {"source_dataset_tag", m.source_dataset_tag},
                      {"backend", detail::format_backend(m.backend)},
                      {"classes", m.native_space.classes()},
                      {"mapping", m.mapping.matrix()}});
  }
  return json{{"format", kRegistryFormat}, {"classes", reg.target().classes()}, {"models", models}}.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Ensemble-layer models

inline json weights_to_json(const ensemble_weights& w) {
  return {{"format", kWeightsFormat},
          {"classes", w.classes()},
          {"models", w.models()},
          {"weights", w.matrix()},
          {"intercepts", w.intercepts()}};
}

inline ensemble_weights weights_from_json(const json& doc, const std::string& where = "weights") {
  if (doc.value("format", "") != kWeightsFormat) fail(errc::parse_error, where + ": not a " + kWeightsFormat + " document");
  return ensemble_weights(detail::get_field<std::size_t>(doc, "classes", where),
                          detail::get_field<std::size_t>(doc, "models", where),
                          detail::get_field<std::vector<double>>(doc, "weights", where),
                          detail::get_field<std::vector<double>>(doc, "intercepts", where));
}

inline json forest_to_json(const rf_model& model) {
  json trees = json::array();
  for (const auto& t : model.trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes) {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"distribution", n.distribution}});
    }
    trees.push_back({{"nodes", nodes}});
  }
  return {{"format", kForestFormat},
          {"classes", model.classes},
          {"models", model.models},
          {"max_depth", model.max_depth},
          {"single_class_shots", model.single_class_shots},
          {"trees", trees}};
}

inline rf_model forest_from_json(const json& doc, const std::string& where = "forest") {
  if (doc.value("format", "") != kForestFormat) fail(errc::parse_error, where + ": not a " + kForestFormat + " document");
  rf_model model;
  model.classes = detail::get_field<std::size_t>(doc, "classes", where);
  model.models = detail::get_field<std::size_t>(doc, "models", where);
  model.max_depth = detail::get_field<int>(doc, "max_depth", where);
  model.single_class_shots = doc.value("single_class_shots", false);
  for (const auto& t : doc.at("trees")) {
    decision_tree tree;
    const int count = static_cast<int>(t.at("nodes").size());
    for (const auto& n : t.at("nodes")) {
      const int self = static_cast<int>(tree.nodes.size());
      tree_node node;
      node.feature = detail::get_field<int>(n, "feature", where);
      node.threshold = detail::get_field<double>(n, "threshold", where);
      node.left = detail::get_field<int>(n, "left", where);
      node.right = detail::get_field<int>(n, "right", where);
      node.distribution = detail::get_field<std::vector<double>>(n, "distribution", where);
      // Children always follow their parent, which rules out cycles.
      if (!node.is_leaf() && (node.feature < 0 || static_cast<std::size_t>(node.feature) >= model.features() ||
                              node.left <= self || node.right <= self || node.left >= count || node.right >= count))
        fail(errc::parse_error, where + ": malformed tree node");
      if (node.is_leaf() && node.distribution.size() != model.classes)
        fail(errc::parse_error, where + ": leaf distribution has the wrong arity");
      tree.nodes.push_back(std::move(node));
    }
    if (tree.nodes.empty()) fail(errc::parse_error, where + ": empty tree");
    model.trees.push_back(std::move(tree));
  }
  return model;
}

inline json read_json_file(const std::filesystem::path& path) {
  return detail::parse_json(detail::read_text(path), path.string());
}

}  // namespace daft
