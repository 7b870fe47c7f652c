// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "daft/io.hpp"
#include "daft/metrics.hpp"

namespace daft {

inline constexpr const char* kReportFormat = "daft-eval-report/1";

struct method_score {
  std::string name;
  double accuracy = 0.0;
  /// Absent for methods that emit labels only.
  std::optional<double> cross_entropy;
};

/// RI of method `a` measured against baseline `b`, in percent.
struct ri_entry {
  std::string a;
  std::string b;
  double value = 0.0;
};

struct eval_report {
  std::vector<method_score> methods;
  std::vector<ri_entry> relative_improvements;
  std::optional<std::uint64_t> seed;
  std::size_t samples = 0;
  std::optional<std::size_t> shots;
  std::string dataset;

  const method_score* find(const std::string& name) const {
    for (const auto& m : methods)
      if (m.name == name) return &m;
    return nullptr;
  }

  /// Records RI(a, b) from stored accuracies.
  void add_ri(const std::string& a, const std::string& b) {
    const auto* ma = find(a);
    const auto* mb = find(b);
    if (!ma || !mb) fail(errc::bad_config, "RI between unknown methods '" + a + "' and '" + b + "'");
    relative_improvements.push_back({a, b, relative_improvement(ma->accuracy, mb->accuracy)});
  }
};

inline json report_to_json(const eval_report& r) {
  json methods = json::array();
  for (const auto& m : r.methods)
    methods.push_back({{"name", m.name},
                       {"accuracy", m.accuracy},
                       {"cross_entropy", m.cross_entropy ? json(*m.cross_entropy) : json(nullptr)}});
  json ri = json::array();
  for (const auto& e : r.relative_improvements) ri.push_back({{"a", e.a}, {"b", e.b}, {"ri_percent", e.value}});
  json meta{{"dataset", r.dataset}, {"samples", r.samples}};
  meta["seed"] = r.seed ? json(*r.seed) : json(nullptr);
  meta["shots"] = r.shots ? json(*r.shots) : json(nullptr);
  return {{"format", kReportFormat}, {"metadata", meta}, {"methods", methods}, {"relative_improvement", ri}};
}

inline std::string format_report_json(const eval_report& r) { return report_to_json(r).dump(2) + "\n"; }

inline std::string format_report_text(const eval_report& r) {
  std::size_t width = 6;
  for (const auto& m : r.methods) width = std::max(width, m.name.size());
  std::string out = "# " + std::string(kReportFormat) + "\n";
  out += "dataset: " + (r.dataset.empty() ? std::string("-") : r.dataset) + "  samples: " + std::to_string(r.samples);
  if (r.shots) out += "  shots: " + std::to_string(*r.shots);
  if (r.seed) out += "  seed: " + std::to_string(*r.seed);
  out += "\n\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %10s  %13s\n", static_cast<int>(width), "method", "accuracy", "cross_entropy");
  out += buf;
  for (const auto& m : r.methods) {
    if (m.cross_entropy) {
      std::snprintf(buf, sizeof buf, "%-*s  %10.6f  %13.6f\n", static_cast<int>(width), m.name.c_str(), m.accuracy,
                    *m.cross_entropy);
    } else {
      std::snprintf(buf, sizeof buf, "%-*s  %10.6f  %13s\n", static_cast<int>(width), m.name.c_str(), m.accuracy, "-");
    }
    out += buf;
  }
  if (!r.relative_improvements.empty()) {
    out += "\n";
    std::snprintf(buf, sizeof buf, "%-*s  %-*s  %10s\n", static_cast<int>(width), "a", static_cast<int>(width), "b",
                  "RI(%)");
    out += buf;
    for (const auto& e : r.relative_improvements) {
      std::snprintf(buf, sizeof buf, "%-*s  %-*s  %10.4f\n", static_cast<int>(width), e.a.c_str(),
                    static_cast<int>(width), e.b.c_str(), e.value);
      out += buf;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Heatmap (rows: fine-tuning dataset, columns: evaluation dataset)

struct heatmap_cell {
  std::string source;
  std::string target;
  double value = 0.0;
};

/// Rows and columns keep first-appearance order; repeated cells are averaged.
inline std::string format_heatmap_csv(const std::vector<heatmap_cell>& cells) {
  std::vector<std::string> rows, cols;
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> acc;
  auto note = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& c : cells) {
    note(rows, c.source);
    note(cols, c.target);
    auto& slot = acc[{c.source, c.target}];
    slot.first += c.value;
    slot.second += 1;
  }
  std::string out = "source";
  for (const auto& c : cols) out += "," + c;
  out += "\n";
  char buf[64];
  for (const auto& r : rows) {
    out += r;
    for (const auto& c : cols) {
      const auto it = acc.find({r, c});
      if (it == acc.end()) {
        out += ",";
        continue;
      }
      std::snprintf(buf, sizeof buf, ",%.6f", it->second.first / it->second.second);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace daft
