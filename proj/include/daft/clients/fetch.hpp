// SPDX-License-Identifier: Apache-2.0
#pragma once

// Black-box inference client. Wire contract: POST {"inputs": [string]} to the
// model endpoint, expect {"probs": [[float; K]]} back in input order.
//
// Requests are split into batches and fanned out over a bounded number of
// in-flight connections. Results are assembled in request order and cached by
// input content, so the returned matrix does not depend on completion order.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <httplib.h>

#include "daft/core.hpp"
#include "daft/io.hpp"

namespace daft {

struct inference_request {
  std::string model_id;
  std::vector<std::string> ids;
  std::vector<std::string> inputs;

  void validate() const {
    if (inputs.empty()) fail(errc::empty_input, "inference request for '" + model_id + "' has no inputs");
    if (ids.size() != inputs.size()) fail(errc::length_mismatch, "request ids and inputs differ in length");
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
      if (!seen.insert(id).second) fail(errc::bad_config, "duplicate sample id '" + id + "' in request");
  }
};

/// FNV-1a over the input text. Stable across runs and platforms.
constexpr std::uint64_t content_hash(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct cache_key {
  std::string model_id;
  std::uint64_t hash = 0;
  std::size_t length = 0;

  static cache_key of(const std::string& model_id, std::string_view input) {
    return {model_id, content_hash(input), input.size()};
  }

  std::string shard_name() const {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%016llx-%zu", static_cast<unsigned long long>(hash), length);
    return buf;
  }
  std::string str() const { return model_id + "/" + shard_name(); }

  friend bool operator==(const cache_key&, const cache_key&) = default;
};

/// Write-once store of per-input probability rows, optionally persisted as
/// one single-record prediction file per key under `dir/<model_id>/`.
class prediction_cache {
 public:
  prediction_cache() = default;
  explicit prediction_cache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  /// Honors DAFT_CACHE_DIR when set, else `fallback` (which may be empty for memory only).
  static prediction_cache from_environment(std::filesystem::path fallback = {}) {
    if (const char* env = std::getenv("DAFT_CACHE_DIR"); env && *env) return prediction_cache(env);
    if (fallback.empty()) return {};
    return prediction_cache(std::move(fallback));
  }

  const std::optional<std::filesystem::path>& directory() const noexcept { return dir_; }

  std::optional<std::vector<double>> get(const cache_key& key, const label_space& space) {
    std::lock_guard lock(mu_);
    if (auto it = rows_.find(key.str()); it != rows_.end()) return it->second;
    if (!dir_) return std::nullopt;
    const auto path = shard_path(key);
    if (!std::filesystem::exists(path)) return std::nullopt;
    const auto file = read_prediction_file(path, &space);
    const auto r = file.matrix.row(0);
    std::vector<double> row(r.begin(), r.end());
    rows_.emplace(key.str(), row);
    return row;
  }

  /// Stores `row` unless the key already has a value; returns the stored value.
  std::vector<double> put(const cache_key& key, const label_space& space, std::vector<double> row) {
    std::lock_guard lock(mu_);
    auto [it, inserted] = rows_.emplace(key.str(), std::move(row));
    if (inserted && dir_) {
      const auto path = shard_path(key);
      if (!std::filesystem::exists(path)) {
        const auto shard =
            prediction_matrix::trusted(key.model_id, space, it->second, std::vector<std::string>{key.shard_name()});
        store_predictions(path, shard);
      }
    }
    return it->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return rows_.size();
  }

 private:
  std::filesystem::path shard_path(const cache_key& key) const {
    return *dir_ / key.model_id / (key.shard_name() + ".jsonl");
  }

  std::optional<std::filesystem::path> dir_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::vector<double>> rows_;
};

struct fetch_options {
  std::size_t batch_size = 32;
  /// Concurrent batches for one model; 1 fetches sequentially.
  std::size_t in_flight = 4;
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
};

struct fetch_stats {
  std::atomic<std::size_t> requests{0};  ///< HTTP POSTs attempted
  std::atomic<std::size_t> cache_hits{0};
};

namespace detail {

struct endpoint_parts {
  std::string origin;  ///< scheme://host[:port]
  std::string path;
};

inline endpoint_parts split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) fail(errc::bad_config, "endpoint '" + url + "' has no scheme");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

inline std::vector<std::vector<double>> post_batch(const endpoint_parts& ep, const std::vector<std::string>& inputs,
                                                   const label_space& space, const fetch_options& opt,
                                                   fetch_stats* stats) {
  httplib::Client client(ep.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opt.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opt.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  const std::string body = json{{"inputs", inputs}}.dump();
  errc last_code = errc::unreachable;
  std::string last_message;
  for (int attempt = 0; attempt <= opt.retries; ++attempt) {
    if (stats) ++stats->requests;
    auto res = client.Post(ep.path, body, "application/json");
    if (!res) {
      const auto err = res.error();
      last_code = (err == httplib::Error::Read || err == httplib::Error::Write ||
                   err == httplib::Error::ConnectionTimeout)
                      ? errc::timeout
                      : errc::unreachable;
      last_message = ep.origin + ep.path + ": " + httplib::to_string(err);
      continue;
    }
    if (res->status != 200) {
      last_code = errc::malformed_response;
      last_message = ep.origin + ep.path + ": HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      const auto doc = json::parse(res->body);
      auto rows = doc.at("probs").get<std::vector<std::vector<double>>>();
      if (rows.size() != inputs.size())
        fail(errc::malformed_response, std::to_string(rows.size()) + " rows for " + std::to_string(inputs.size()) +
                                           " inputs");
      const auto checked = validate_prediction_matrix("response", rows, space);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = checked.row(i);
        rows[i].assign(r.begin(), r.end());
      }
      return rows;
    } catch (const json::exception& e) {
      last_code = errc::malformed_response;
      last_message = ep.origin + ep.path + ": " + e.what();
    } catch (const error& e) {
      last_code = errc::malformed_response;
      last_message = ep.origin + ep.path + ": " + e.what();
    }
  }
  fail(last_code, last_message + " (after " + std::to_string(opt.retries + 1) + " attempts)");
}

}  // namespace detail

inline prediction_matrix fetch_predictions(const std::string& endpoint, const inference_request& req,
                                           const label_space& space, prediction_cache& cache,
                                           const fetch_options& opt = {}, fetch_stats* stats = nullptr) {
  req.validate();
  if (opt.batch_size < 1 || opt.in_flight < 1 || opt.retries < 0)
    fail(errc::bad_config, "batch_size and in_flight must be >= 1, retries >= 0");
  const std::size_t k = space.arity();

  // Unique uncached inputs, in first-appearance order.
  std::vector<std::optional<std::vector<double>>> resolved(req.inputs.size());
  std::vector<std::string> missing;
  std::unordered_map<std::string, std::size_t> missing_index;
  for (std::size_t i = 0; i < req.inputs.size(); ++i) {
    if (auto hit = cache.get(cache_key::of(req.model_id, req.inputs[i]), space)) {
      resolved[i] = std::move(hit);
      if (stats) ++stats->cache_hits;
    } else if (missing_index.emplace(req.inputs[i], missing.size()).second) {
      missing.push_back(req.inputs[i]);
    }
  }

  if (!missing.empty()) {
    const auto ep = detail::split_endpoint(endpoint);
    const std::size_t n_batches = (missing.size() + opt.batch_size - 1) / opt.batch_size;
    std::vector<std::vector<std::vector<double>>> results(n_batches);
    std::vector<std::exception_ptr> errors(n_batches);

    auto run_batch = [&](std::size_t b) {
      const auto first = missing.begin() + static_cast<std::ptrdiff_t>(b * opt.batch_size);
      const auto last = missing.begin() + static_cast<std::ptrdiff_t>(std::min(missing.size(), (b + 1) * opt.batch_size));
      try {
        results[b] = detail::post_batch(ep, std::vector<std::string>(first, last), space, opt, stats);
      } catch (...) {
        errors[b] = std::current_exception();
      }
    };

    const std::size_t workers = std::min(opt.in_flight, n_batches);
    if (workers <= 1) {
      for (std::size_t b = 0; b < n_batches; ++b) run_batch(b);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
          for (std::size_t b = next++; b < n_batches; b = next++) run_batch(b);
        });
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);

    for (std::size_t b = 0; b < n_batches; ++b)
      for (std::size_t j = 0; j < results[b].size(); ++j) {
        const auto& input = missing[b * opt.batch_size + j];
        cache.put(cache_key::of(req.model_id, input), space, std::move(results[b][j]));
      }
    for (std::size_t i = 0; i < req.inputs.size(); ++i)
      if (!resolved[i]) resolved[i] = cache.get(cache_key::of(req.model_id, req.inputs[i]), space);
  }

  std::vector<double> flat;
  flat.reserve(req.inputs.size() * k);
  for (const auto& row : resolved) flat.insert(flat.end(), row->begin(), row->end());
  return prediction_matrix::trusted(req.model_id, space, std::move(flat), req.ids);
}

struct fetch_job {
  std::string endpoint;
  inference_request request;
  label_space space;
};

/// Fetches several models at once, each with its own in-flight budget.
inline std::vector<prediction_matrix> fetch_many(const std::vector<fetch_job>& jobs, prediction_cache& cache,
                                                 const fetch_options& opt = {}, fetch_stats* stats = nullptr,
                                                 bool parallel = true) {
  std::vector<prediction_matrix> out(jobs.size());
  if (!parallel || jobs.size() <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j)
      out[j] = fetch_predictions(jobs[j].endpoint, jobs[j].request, jobs[j].space, cache, opt, stats);
    return out;
  }
  std::vector<std::future<prediction_matrix>> pending;
  for (const auto& job : jobs)
    pending.push_back(std::async(std::launch::async, [&, &job = job] {
      return fetch_predictions(job.endpoint, job.request, job.space, cache, opt, stats);
    }));
  std::exception_ptr first_error;
  for (std::size_t j = 0; j < pending.size(); ++j) {
    try {
      out[j] = pending[j].get();
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

}  // namespace daft
