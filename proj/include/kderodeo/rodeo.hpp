#pragma once

// Greedy local bandwidth selection (Rodeo) for one query point against one class.
//
// Every bandwidth starts at h0 = c0 / ln ln n. Active dimensions are visited
// round-robin; dimension j is shrunk by the shrink factor while the derivative of
// the density estimate with respect to h_j exceeds its noise threshold
//   lambda_j = s_j * sqrt(2 ln(n * cn)),  cn = cn_multiplier * ln n,
// and leaves the active set otherwise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kderodeo/kernel_math.hpp"
#include "kderodeo/matrix.hpp"

namespace kderodeo {

/// Smallest class size for which c0 / ln ln n is defined and positive.
inline constexpr std::size_t kMinClassSize = 4;

struct RodeoConfig {
  double c0 = 1.0;
  double shrink_factor = 0.9;
  double cn_multiplier = 1.0;  // cn = cn_multiplier * ln(n)
  double tau0 = -1.0;
  double h_floor = 1e-8;
  std::size_t max_iters_per_dim = 10'000;

  void validate() const {
    if (!(c0 > 0.0) || !std::isfinite(c0)) throw std::invalid_argument("RodeoConfig: c0 must be positive");
    if (!(shrink_factor > 0.0 && shrink_factor < 1.0))
      throw std::invalid_argument("RodeoConfig: shrink factor must lie in (0, 1)");
    if (!(cn_multiplier > 0.0) || !std::isfinite(cn_multiplier))
      throw std::invalid_argument("RodeoConfig: cn multiplier must be positive");
    if (!(h_floor > 0.0)) throw std::invalid_argument("RodeoConfig: h_floor must be positive");
    if (!std::isfinite(tau0)) throw std::invalid_argument("RodeoConfig: tau0 must be finite");
    if (max_iters_per_dim == 0) throw std::invalid_argument("RodeoConfig: max_iters_per_dim must be >= 1");
  }

  double cn(std::size_t n) const { return cn_multiplier * std::log(static_cast<double>(n)); }

  /// sqrt(2 ln(n * cn)), the multiplier on s_j in the threshold.
  double threshold_factor(std::size_t n) const {
    const double arg = static_cast<double>(n) * cn(n);
    if (!(arg > 1.0))
      throw std::invalid_argument("RodeoConfig: n * cn must exceed 1 (n = " + std::to_string(n) + ")");
    return std::sqrt(2.0 * std::log(arg));
  }

  friend bool operator==(const RodeoConfig&, const RodeoConfig&) = default;
};

inline double initial_bandwidth(std::size_t n, const RodeoConfig& config) {
  if (n < kMinClassSize)
    throw std::invalid_argument("class too small: n = " + std::to_string(n) + ", need at least " +
                                std::to_string(kMinClassSize));
  const double loglog = std::log(std::log(static_cast<double>(n)));
  if (!(loglog > 0.0)) throw std::invalid_argument("class too small: ln ln n is not positive");
  return config.c0 / loglog;
}

struct RodeoResult {
  BandwidthVector bandwidths;
  double log_density = 0.0;
  double density = 0.0;
  std::vector<std::uint32_t> iterations;  // shrink count per dimension
};

/// Rodeo with a precomputed h0; used by the classifier which caches h0 per class.
inline RodeoResult select_local_bandwidths(std::span<const double> query, const Matrix& samples,
                                           const RodeoConfig& config, double h0) {
  const std::size_t n = samples.rows();
  const std::size_t d = samples.cols();
  if (n == 0) throw std::invalid_argument("rodeo: empty class sample");
  if (d == 0) throw std::invalid_argument("rodeo: zero-dimensional data");
  if (query.size() != d)
    throw std::invalid_argument("rodeo: query has dimension " + std::to_string(query.size()) + ", expected " +
                                std::to_string(d));
  if (n < 2) throw std::invalid_argument("rodeo: need at least 2 samples for the variance estimate");
  const double lambda_factor = config.threshold_factor(n);

  // Squared offsets and each sample's exponent -0.5 * sum_k sq_ik / h_k^2.
  std::vector<double> sq(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = samples.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = query[k] - xi[k];
      sq[i * d + k] = diff * diff;
    }
  }

  BandwidthVector h(d, h0);
  std::vector<std::uint32_t> shrinks(d, 0);
  const double inv_h0_sq = 1.0 / (h0 * h0);
  std::vector<double> exponent(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) acc += sq[i * d + k];
    exponent[i] = -0.5 * acc * inv_h0_sq;
  }

  std::vector<double> weight(n);
  bool weights_stale = true;
  auto refresh_weights = [&] {
    const double peak = *std::max_element(exponent.begin(), exponent.end());
    for (std::size_t i = 0; i < n; ++i) weight[i] = std::exp(exponent[i] - peak);
    weights_stale = false;
  };

  std::vector<std::size_t> active(d);
  for (std::size_t k = 0; k < d; ++k) active[k] = k;
  std::vector<std::size_t> still_active;
  still_active.reserve(d);

  while (!active.empty()) {
    still_active.clear();
    for (std::size_t j : active) {
      if (weights_stale) refresh_weights();
      const double hj = h[j];
      const double hj2 = hj * hj;
      const double inv_hj3 = 1.0 / (hj2 * hj);

      // Rescaled Z_ji: mean and sample variance by Welford.
      double mean = 0.0;
      double m2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double zi = (sq[i * d + j] - hj2) * inv_hj3 * weight[i];
        const double delta = zi - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (zi - mean);
      }
      const double s = std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
      const double lambda = s * lambda_factor;

      if (!(std::abs(mean) > lambda)) continue;
      const double next = hj * config.shrink_factor;
      if (next < config.h_floor || shrinks[j] >= config.max_iters_per_dim) continue;

      const double delta_inv = 1.0 / (next * next) - 1.0 / hj2;
      for (std::size_t i = 0; i < n; ++i) exponent[i] -= 0.5 * sq[i * d + j] * delta_inv;
      h[j] = next;
      ++shrinks[j];
      weights_stale = true;
      still_active.push_back(j);
    }
    active.swap(still_active);
  }

  RodeoResult result;
  result.log_density = log_product_kernel_density(query, samples, h);
  result.density = std::exp(result.log_density);
  result.bandwidths = std::move(h);
  result.iterations = std::move(shrinks);
  return result;
}

inline RodeoResult select_local_bandwidths(std::span<const double> query, const Matrix& samples,
                                           const RodeoConfig& config) {
  config.validate();
  return select_local_bandwidths(query, samples, config, initial_bandwidth(samples.rows(), config));
}

}  // namespace kderodeo
