#pragma once

// Product-Gaussian kernel density estimation and its analytic derivatives.
//
// All per-sample kernel products are accumulated as sums of log terms, so the
// estimators stay finite at d = 64 where the direct product underflows.
// Dimension indices are zero-based throughout the C++ API.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kderodeo/matrix.hpp"

namespace kderodeo {

using Point = std::vector<double>;
using BandwidthVector = std::vector<double>;

inline constexpr double kLogSqrtTwoPi = 0.91893853320467274178;  // log(sqrt(2*pi))

/// Moments of the univariate kernel; the d-dimensional product kernel uses powers.
struct KernelConstants {
  double alpha_per_dim = 1.0;      // int u^2 K(u) du
  double l2norm_sq_per_dim = 0.0;  // int K(u)^2 du

  static KernelConstants gaussian() noexcept {
    return {1.0, 1.0 / (2.0 * std::sqrt(std::numbers::pi))};
  }

  /// (int K^2)^(r/2) for the r-dimensional product kernel.
  double l2norm(std::size_t r) const noexcept {
    return std::pow(l2norm_sq_per_dim, 0.5 * static_cast<double>(r));
  }
};

namespace detail {

inline void check_shapes(std::span<const double> query, const Matrix& samples,
                         std::span<const double> bw) {
  if (samples.rows() == 0) throw std::invalid_argument("kernel: empty sample list");
  if (query.size() != bw.size() || samples.cols() != bw.size())
    throw std::invalid_argument("kernel: dimension mismatch (query " + std::to_string(query.size()) +
                                ", samples " + std::to_string(samples.cols()) + ", bandwidths " +
                                std::to_string(bw.size()) + ")");
  for (double h : bw)
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("kernel: bandwidths must be positive");
}

inline void check_index(std::size_t j, std::size_t d) {
  if (j >= d)
    throw std::invalid_argument("kernel: dimension index " + std::to_string(j) + " out of range for d = " +
                                std::to_string(d));
}

/// log of (1/h) phi((x - xi)/h)
inline double log_kernel_term(double x, double xi, double h) noexcept {
  const double u = (x - xi) / h;
  return -0.5 * u * u - std::log(h) - kLogSqrtTwoPi;
}

inline double log_sum_exp(std::span<const double> values) noexcept {
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : values) peak = std::max(peak, v);
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

/// Signed value of coeff * exp(log_mag) evaluated without forming exp(log_mag) alone.
inline double signed_exp(double coeff, double log_mag) noexcept {
  if (coeff == 0.0) return 0.0;
  return std::copysign(std::exp(std::log(std::abs(coeff)) + log_mag), coeff);
}

}  // namespace detail

/// log prod_k (1/h_k) phi((x_k - x_ik)/h_k) for every sample i.
inline std::vector<double> log_kernel_products(std::span<const double> query, const Matrix& samples,
                                               std::span<const double> bw) {
  detail::check_shapes(query, samples, bw);
  std::vector<double> out(samples.rows(), 0.0);
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    const auto xi = samples.row(i);
    double acc = 0.0;
    for (std::size_t k = 0; k < bw.size(); ++k) acc += detail::log_kernel_term(query[k], xi[k], bw[k]);
    out[i] = acc;
  }
  return out;
}

/// log of the kernel density estimate; -inf when every kernel term underflows.
inline double log_product_kernel_density(std::span<const double> query, const Matrix& samples,
                                         std::span<const double> bw) {
  const auto logs = log_kernel_products(query, samples, bw);
  return detail::log_sum_exp(logs) - std::log(static_cast<double>(samples.rows()));
}

inline double product_kernel_density(std::span<const double> query, const Matrix& samples,
                                     std::span<const double> bw) {
  return std::exp(log_product_kernel_density(query, samples, bw));
}

struct ZDerivative {
  double z = 0.0;                   // d p_hat / d h_j
  std::vector<double> per_sample;   // Z_ji, one per sample
};

/// Derivative of the density estimate with respect to bandwidth j.
inline ZDerivative z_derivative(std::span<const double> query, const Matrix& samples,
                                std::span<const double> bw, std::size_t j) {
  detail::check_shapes(query, samples, bw);
  detail::check_index(j, bw.size());
  const auto logs = log_kernel_products(query, samples, bw);
  const double h = bw[j];
  ZDerivative out;
  out.per_sample.resize(samples.rows());
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    const double diff = query[j] - samples(i, j);
    const double coeff = (diff * diff - h * h) / (h * h * h);
    out.per_sample[i] = detail::signed_exp(coeff, logs[i]);
    sum += out.per_sample[i];
  }
  out.z = sum / static_cast<double>(samples.rows());
  return out;
}

/// Estimated variance of the mean of the Z_ji: sample variance (divisor n-1) over n.
inline double z_variance(std::span<const double> per_sample) {
  const std::size_t n = per_sample.size();
  if (n < 2) throw std::invalid_argument("z_variance: need at least 2 samples");
  // Welford
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double delta = per_sample[i] - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (per_sample[i] - mean);
  }
  const double v2 = m2 / static_cast<double>(n - 1);
  return v2 / static_cast<double>(n);
}

/// Kernel estimate of d^2 f / dx_j^2 at the query.
inline double second_partial_density(std::span<const double> query, const Matrix& samples,
                                     std::span<const double> bw, std::size_t j) {
  detail::check_shapes(query, samples, bw);
  detail::check_index(j, bw.size());
  const auto logs = log_kernel_products(query, samples, bw);
  const double h = bw[j];
  const double h2 = h * h;
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    const double diff = query[j] - samples(i, j);
    sum += detail::signed_exp((diff * diff - h2) / (h2 * h2), logs[i]);
  }
  return sum / static_cast<double>(samples.rows());
}

/// f''_jj / f at the query, formed with a common rescaling of the kernel terms so it
/// survives when both numerator and denominator underflow. NaN if the density is exactly 0.
inline double curvature_ratio(std::span<const double> query, const Matrix& samples,
                              std::span<const double> bw, std::size_t j) {
  detail::check_shapes(query, samples, bw);
  detail::check_index(j, bw.size());
  const auto logs = log_kernel_products(query, samples, bw);
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : logs) peak = std::max(peak, v);
  if (!std::isfinite(peak)) return std::numeric_limits<double>::quiet_NaN();
  const double h2 = bw[j] * bw[j];
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    const double w = std::exp(logs[i] - peak);
    const double diff = query[j] - samples(i, j);
    num += (diff * diff - h2) / (h2 * h2) * w;
    den += w;
  }
  return num / den;
}

}  // namespace kderodeo
