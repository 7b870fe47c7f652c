// SPDX-License-Identifier: Apache-2.0
#pragma once

// Local inference endpoint speaking the fetch wire contract. Probabilities are
// a pure function of the input text, so any correct client sees the same rows
// whatever the request interleaving.

#include <atomic>
#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "daft/clients/fetch.hpp"
#include "daft/io.hpp"
#include "daft/synthlab/domain.hpp"

namespace daft::testing {

class stub_server {
 public:
  struct options {
    std::size_t classes = 2;
    /// Reply with [0.9, 0.3] rows.
    bool malformed = false;
    /// Answer the first `fail_first` requests with HTTP 503.
    int fail_first = 0;
    /// Per-request sleep in [0, jitter), derived from the batch content.
    std::chrono::milliseconds jitter{0};
    /// Fixed sleep added to every request.
    std::chrono::milliseconds delay{0};
  };

  stub_server() : stub_server(options{}) {}

  explicit stub_server(options opt) : opt_(opt) {
    server_.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~stub_server() {
    server_.stop();
    thread_.join();
  }

  stub_server(const stub_server&) = delete;
  stub_server& operator=(const stub_server&) = delete;

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/predict"; }
  int port() const noexcept { return port_; }
  std::size_t requests() const noexcept { return requests_.load(); }

  static std::vector<double> probs_for(const std::string& text, std::size_t k) {
    const auto h = content_hash(text);
    std::vector<double> row(k);
    double mass = 0.0;
    for (std::size_t j = 0; j < k; ++j) mass += row[j] = 1.0 + static_cast<double>(synth::mix_seed(h, j) % 1000);
    for (double& v : row) v /= mass;
    return row;
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    const int seen = static_cast<int>(requests_++);
    const auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("inputs")) {
      res.status = 400;
      return;
    }
    const auto inputs = body["inputs"].get<std::vector<std::string>>();
    auto pause = opt_.delay;
    if (opt_.jitter.count() > 0 && !inputs.empty())
      pause += std::chrono::milliseconds(content_hash(inputs.front()) % static_cast<std::uint64_t>(opt_.jitter.count()));
    if (pause.count() > 0) std::this_thread::sleep_for(pause);
    if (seen < opt_.fail_first) {
      res.status = 503;
      return;
    }
    json probs = json::array();
    for (const auto& text : inputs)
      probs.push_back(opt_.malformed ? std::vector<double>{0.9, 0.3} : probs_for(text, opt_.classes));
    res.set_content(json{{"probs", probs}}.dump(), "application/json");
  }

  options opt_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::size_t> requests_{0};
};

}  // namespace daft::testing
