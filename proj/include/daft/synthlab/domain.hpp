// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic stand-ins for domain-adjacent datasets and the models fine-tuned
// on them. A domain is a K-class Gaussian mixture with shared isotropic
// noise; adjacent domains translate every class mean by one shift vector.
// Models are multinomial logistic regressions fit by full-batch gradient
// descent, which makes fine-tuning, full fine-tuning and weight souping all
// cheap and well defined.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "daft/core.hpp"

namespace daft::synth {

/// SplitMix64 step; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct domain_config {
  std::uint64_t seed = 0;  ///< draws the reference class means
  std::size_t classes = 3;
  std::size_t dims = 4;
  /// Standard deviation of the reference class means around the origin.
  double separation = 1.5;
  double noise = 1.0;
  /// Length of the translation applied to every class mean.
  double shift = 0.0;
  std::uint64_t shift_seed = 0;  ///< draws the shift direction

  void validate() const {
    if (classes < 2) fail(errc::bad_config, "a domain needs at least 2 classes");
    if (dims < 1) fail(errc::bad_config, "a domain needs at least 1 dimension");
    if (!(separation >= 0.0) || !std::isfinite(separation)) fail(errc::bad_config, "separation must be >= 0");
    if (!(noise > 0.0) || !std::isfinite(noise)) fail(errc::bad_config, "noise must be > 0");
    if (!(shift >= 0.0) || !std::isfinite(shift)) fail(errc::bad_config, "shift must be >= 0");
  }
};

struct labeled_sample {
  std::size_t dims = 0;
  std::vector<double> x;  ///< n x dims, row-major
  std::vector<std::size_t> y;

  std::size_t size() const noexcept { return y.size(); }
  std::span<const double> point(std::size_t i) const { return {x.data() + i * dims, dims}; }

  std::vector<std::string> ids(const std::string& prefix = "s") const {
    std::vector<std::string> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = prefix + std::to_string(i);
    return out;
  }
};

class synthetic_domain {
 public:
  explicit synthetic_domain(const domain_config& cfg) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t k = cfg_.classes, d = cfg_.dims;
    std::mt19937_64 rng(cfg_.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    means_.resize(k * d);
    for (double& v : means_) v = cfg_.separation * normal(rng);

    shift_.assign(d, 0.0);
    if (cfg_.shift > 0.0) {
      std::mt19937_64 srng(mix_seed(cfg_.shift_seed, 0x5bd1e995));
      double norm = 0.0;
      while (norm == 0.0) {
        for (double& v : shift_) v = normal(srng);
        norm = std::sqrt(std::inner_product(shift_.begin(), shift_.end(), shift_.begin(), 0.0));
      }
      for (double& v : shift_) v *= cfg_.shift / norm;
      for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < d; ++j) means_[c * d + j] += shift_[j];
    }
  }

  const domain_config& config() const noexcept { return cfg_; }
  std::size_t classes() const noexcept { return cfg_.classes; }
  std::size_t dims() const noexcept { return cfg_.dims; }
  const std::vector<double>& means() const noexcept { return means_; }
  const std::vector<double>& shift() const noexcept { return shift_; }

  /// Draws labels uniformly and points around their class means. The random
  /// stream does not depend on the means, so domains that differ only in
  /// shift produce translated copies of the same draw for a given seed.
  labeled_sample sample(std::size_t n, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> label(0, cfg_.classes - 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    labeled_sample s;
    s.dims = cfg_.dims;
    s.x.resize(n * cfg_.dims);
    s.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      s.y[i] = label(rng);
      for (std::size_t j = 0; j < cfg_.dims; ++j)
        s.x[i * cfg_.dims + j] = means_[s.y[i] * cfg_.dims + j] + cfg_.noise * normal(rng);
    }
    return s;
  }

 private:
  domain_config cfg_;
  std::vector<double> means_;
  std::vector<double> shift_;
};

inline synthetic_domain gen_domain(const domain_config& cfg) { return synthetic_domain(cfg); }

inline label_space default_space(std::size_t classes) {
  std::vector<std::string> names(classes);
  for (std::size_t k = 0; k < classes; ++k) names[k] = "c" + std::to_string(k);
  return label_space(std::move(names));
}

struct provenance {
  double shift = 0.0;
  std::uint64_t shift_seed = 0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  bool converged = false;
};

/// softmax(W x + b) classifier.
struct synthetic_model {
  std::size_t classes = 0;
  std::size_t dims = 0;
  std::vector<double> weights;  ///< classes x dims
  std::vector<double> bias;
  synth::provenance provenance;

  void logits(std::span<const double> x, std::span<double> out) const {
    for (std::size_t k = 0; k < classes; ++k) {
      double z = bias[k];
      for (std::size_t j = 0; j < dims; ++j) z += weights[k * dims + j] * x[j];
      out[k] = z;
    }
  }

  prediction_matrix predict(const labeled_sample& s, std::string id = "synthetic",
                            std::vector<std::string> ids = {}) const {
    if (s.dims != dims) fail(errc::shape_mismatch, "sample dimension differs from model dimension");
    std::vector<double> out(s.size() * classes);
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::span<double> row(out.data() + i * classes, classes);
      logits(s.point(i), row);
      softmax_in_place(row);
    }
    return prediction_matrix::trusted(std::move(id), default_space(classes), std::move(out), std::move(ids));
  }

  static void softmax_in_place(std::span<double> z) {
    const double top = *std::max_element(z.begin(), z.end());
    double mass = 0.0;
    for (double& v : z) {
      v = std::exp(v - top);
      mass += v;
    }
    for (double& v : z) v /= mass;
  }
};

struct train_config {
  double tolerance = 1e-6;  ///< max-abs gradient at convergence
  std::size_t max_steps = 10000;
  /// Ridge penalty (l2/2)||W||^2; keeps separable fits bounded.
  double l2 = 1e-3;
  std::size_t max_resamples = 64;
};

namespace detail {

// Mean cross-entropy gradient plus ridge term; returns the loss.
inline double logistic_gradient(const synthetic_model& m, const labeled_sample& s, double l2, std::vector<double>& gw,
                                std::vector<double>& gb, std::vector<double>& scratch) {
  std::fill(gw.begin(), gw.end(), 0.0);
  std::fill(gb.begin(), gb.end(), 0.0);
  const std::size_t k = m.classes, d = m.dims;
  const double inv_n = 1.0 / static_cast<double>(s.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto x = s.point(i);
    std::span<double> p(scratch.data(), k);
    m.logits(x, p);
    synthetic_model::softmax_in_place(p);
    loss -= std::log(std::max(p[s.y[i]], 1e-300));
    for (std::size_t c = 0; c < k; ++c) {
      const double r = (p[c] - (c == s.y[i] ? 1.0 : 0.0)) * inv_n;
      gb[c] += r;
      for (std::size_t j = 0; j < d; ++j) gw[c * d + j] += r * x[j];
    }
  }
  loss *= inv_n;
  for (std::size_t j = 0; j < gw.size(); ++j) {
    gw[j] += l2 * m.weights[j];
    loss += 0.5 * l2 * m.weights[j] * m.weights[j];
  }
  return loss;
}

inline std::size_t distinct_labels(const labeled_sample& s) {
  std::vector<std::size_t> y = s.y;
  std::sort(y.begin(), y.end());
  return static_cast<std::size_t>(std::unique(y.begin(), y.end()) - y.begin());
}

}  // namespace detail

/// Full-batch gradient descent from zero parameters with step 1/L (L bounds
/// the curvature of the mean softmax cross-entropy), Nesterov momentum and
/// function-value restarts. Stops once the max-abs gradient at the iterate
/// drops to the tolerance.
inline synthetic_model fit_logistic(const labeled_sample& s, std::size_t classes, const train_config& cfg = {}) {
  if (s.size() == 0) fail(errc::degenerate_sample, "empty training sample");
  synthetic_model m;
  m.classes = classes;
  m.dims = s.dims;
  m.weights.assign(classes * s.dims, 0.0);
  m.bias.assign(classes, 0.0);

  double mean_sq = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto x = s.point(i);
    mean_sq += 1.0 + std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
  }
  mean_sq /= static_cast<double>(s.size());
  const double step = 1.0 / (0.5 * mean_sq + cfg.l2);

  const std::size_t nw = m.weights.size();
  std::vector<double> gw(nw), gb(classes), scratch(classes);
  synthetic_model look = m;  // extrapolated point
  std::vector<double> prev_w = m.weights, prev_b = m.bias;
  double momentum_t = 1.0;
  double prev_loss = std::numeric_limits<double>::infinity();

  for (std::size_t it = 0; it < cfg.max_steps; ++it) {
    const double loss = detail::logistic_gradient(look, s, cfg.l2, gw, gb, scratch);
    if (loss > prev_loss) {
      // Momentum overshot: restart from the last iterate.
      look.weights = m.weights;
      look.bias = m.bias;
      momentum_t = 1.0;
      prev_loss = detail::logistic_gradient(look, s, cfg.l2, gw, gb, scratch);
    } else {
      prev_loss = loss;
    }
    double gmax = 0.0;
    for (double g : gw) gmax = std::max(gmax, std::abs(g));
    for (double g : gb) gmax = std::max(gmax, std::abs(g));
    m.provenance.steps = it;
    if (gmax <= cfg.tolerance) {
      m.weights = look.weights;
      m.bias = look.bias;
      m.provenance.converged = true;
      break;
    }
    prev_w = m.weights;
    prev_b = m.bias;
    for (std::size_t j = 0; j < nw; ++j) m.weights[j] = look.weights[j] - step * gw[j];
    for (std::size_t c = 0; c < classes; ++c) m.bias[c] = look.bias[c] - step * gb[c];
    const double next_t = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum_t * momentum_t));
    const double beta = (momentum_t - 1.0) / next_t;
    momentum_t = next_t;
    for (std::size_t j = 0; j < nw; ++j) look.weights[j] = m.weights[j] + beta * (m.weights[j] - prev_w[j]);
    for (std::size_t c = 0; c < classes; ++c) look.bias[c] = m.bias[c] + beta * (m.bias[c] - prev_b[c]);
    m.provenance.steps = it + 1;
  }
  m.provenance.samples = s.size();
  return m;
}

/// Synthetic analog of fine-tuning a base model on n samples of a domain.
inline synthetic_model train_synthetic(const synthetic_domain& domain, std::size_t n, std::uint64_t seed,
                                       const train_config& cfg = {}) {
  if (n < 2) fail(errc::degenerate_sample, "need at least 2 training samples");
  for (std::size_t attempt = 0; attempt <= cfg.max_resamples; ++attempt) {
    const auto s = domain.sample(n, attempt == 0 ? seed : mix_seed(seed, attempt));
    if (detail::distinct_labels(s) < 2) continue;
    auto m = fit_logistic(s, domain.classes(), cfg);
    m.provenance.shift = domain.config().shift;
    m.provenance.shift_seed = domain.config().shift_seed;
    m.provenance.seed = seed;
    return m;
  }
  fail(errc::degenerate_sample, "could not draw a sample with two classes");
}

/// Parameter-wise mean of same-shaped models. Uses a running mean so that
/// souping identical members returns their parameters bit-for-bit.
inline synthetic_model uniform_soup(std::span<const synthetic_model> models) {
  if (models.empty()) fail(errc::empty_ensemble, "nothing to soup");
  synthetic_model soup = models.front();
  for (std::size_t i = 1; i < models.size(); ++i) {
    const auto& m = models[i];
    if (m.classes != soup.classes || m.dims != soup.dims)
      fail(errc::shape_mismatch, "soup members must share one architecture");
    const double inv = 1.0 / static_cast<double>(i + 1);
    for (std::size_t j = 0; j < soup.weights.size(); ++j) soup.weights[j] += (m.weights[j] - soup.weights[j]) * inv;
    for (std::size_t c = 0; c < soup.classes; ++c) soup.bias[c] += (m.bias[c] - soup.bias[c]) * inv;
  }
  soup.provenance = {};
  return soup;
}

}  // namespace daft::synth
