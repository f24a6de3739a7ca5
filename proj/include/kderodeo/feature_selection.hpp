#pragma once

// Bandwidth-based variable selection: average the local bandwidths selected for a
// set of evaluation points, standardise the averages across dimensions, and keep
// the dimensions whose z-score is at or below the cutpoint tau0.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kderodeo/classifier.hpp"
#include "kderodeo/kernel_math.hpp"
#include "kderodeo/matrix.hpp"
#include "kderodeo/parallel.hpp"

namespace kderodeo {

struct BandwidthSummary {
  int class_label = 0;
  std::vector<double> mean_bandwidths;
  std::vector<double> z_scores;
  std::vector<std::size_t> relevant_set;  // zero-based, ascending
};

inline std::vector<double> mean_bandwidths(std::span<const BandwidthVector> per_query) {
  if (per_query.empty()) throw std::invalid_argument("mean_bandwidths: empty list");
  const std::size_t d = per_query.front().size();
  std::vector<double> sum(d, 0.0);
  for (const auto& bw : per_query) {
    if (bw.size() != d) throw std::invalid_argument("mean_bandwidths: inconsistent dimension");
    for (std::size_t j = 0; j < d; ++j) sum[j] += bw[j];
  }
  for (double& s : sum) s /= static_cast<double>(per_query.size());
  return sum;
}

/// Centre by the mean and scale by the sample standard deviation (divisor d-1).
/// A constant input maps to all zeros.
inline std::vector<double> z_scores(std::span<const double> values) {
  const std::size_t d = values.size();
  if (d < 2) throw std::invalid_argument("z_scores: need at least 2 dimensions");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(d);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(d - 1));
  std::vector<double> z(d, 0.0);
  if (!(sd > 0.0)) return z;
  for (std::size_t j = 0; j < d; ++j) z[j] = (values[j] - mean) / sd;
  return z;
}

inline std::vector<std::size_t> select_features(std::span<const double> z, double tau0) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < z.size(); ++j)
    if (z[j] <= tau0) out.push_back(j);
  return out;
}

inline BandwidthSummary summarize_bandwidths(int class_label, std::span<const BandwidthVector> per_query,
                                             double tau0) {
  BandwidthSummary s;
  s.class_label = class_label;
  s.mean_bandwidths = mean_bandwidths(per_query);
  s.z_scores = z_scores(s.mean_bandwidths);
  s.relevant_set = select_features(s.z_scores, tau0);
  return s;
}

/// Runs Rodeo for every evaluation point against one class and summarises the result.
inline BandwidthSummary class_feature_report(const Classifier& clf, const Matrix& evaluation_points,
                                             int class_label, unsigned threads = 1) {
  if (evaluation_points.rows() == 0) throw std::invalid_argument("class_feature_report: no evaluation points");
  if (class_label < 1 || static_cast<std::size_t>(class_label) > clf.class_count())
    throw std::invalid_argument("class_feature_report: unknown class " + std::to_string(class_label));
  const auto y = static_cast<std::size_t>(class_label - 1);
  std::vector<BandwidthVector> bws(evaluation_points.rows());
  parallel_for(evaluation_points.rows(), threads,
               [&](std::size_t i) { bws[i] = clf.select(evaluation_points.row(i), y).bandwidths; });
  return summarize_bandwidths(class_label, bws, clf.config().tau0);
}

}  // namespace kderodeo
