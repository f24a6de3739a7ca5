#pragma once

// Multi-class classification by per-class kernel density estimates. Each class
// density is evaluated with bandwidths chosen locally for the query by Rodeo; the
// posterior is the normalised (optionally prior-weighted) density ratio.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kderodeo/kernel_math.hpp"
#include "kderodeo/matrix.hpp"
#include "kderodeo/parallel.hpp"
#include "kderodeo/rodeo.hpp"

namespace kderodeo {

struct LabeledClass {
  int label = 0;
  Matrix samples;

  friend bool operator==(const LabeledClass&, const LabeledClass&) = default;
};

/// Per-class training matrices with labels 1..c.
class TrainingSet {
public:
  TrainingSet() = default;

  explicit TrainingSet(std::vector<LabeledClass> classes) : classes_(std::move(classes)) {
    if (classes_.size() < 2) throw std::invalid_argument("TrainingSet: need at least 2 classes");
    std::sort(classes_.begin(), classes_.end(),
              [](const LabeledClass& a, const LabeledClass& b) { return a.label < b.label; });
    for (std::size_t y = 0; y < classes_.size(); ++y) {
      const auto& cls = classes_[y];
      if (y > 0 && cls.label == classes_[y - 1].label)
        throw std::invalid_argument("TrainingSet: duplicate label " + std::to_string(cls.label));
      if (cls.label != static_cast<int>(y) + 1)
        throw std::invalid_argument("TrainingSet: labels must be contiguous 1..c");
      if (cls.samples.rows() == 0)
        throw std::invalid_argument("TrainingSet: class " + std::to_string(cls.label) + " is empty");
      if (cls.samples.cols() != classes_.front().samples.cols())
        throw std::invalid_argument("TrainingSet: class " + std::to_string(cls.label) + " has dimension " +
                                    std::to_string(cls.samples.cols()) + ", expected " +
                                    std::to_string(classes_.front().samples.cols()));
    }
    if (dimension() == 0) throw std::invalid_argument("TrainingSet: zero-dimensional data");
  }

  /// Groups a labelled matrix (labels 1..c) into per-class matrices.
  static TrainingSet from_labeled(const Matrix& features, std::span<const int> labels) {
    if (features.rows() != labels.size()) throw std::invalid_argument("TrainingSet: label count mismatch");
    int max_label = 0;
    for (int l : labels) {
      if (l < 1) throw std::invalid_argument("TrainingSet: labels must be >= 1");
      max_label = std::max(max_label, l);
    }
    std::vector<LabeledClass> classes(static_cast<std::size_t>(max_label));
    for (int y = 1; y <= max_label; ++y) classes[y - 1].label = y;
    for (std::size_t i = 0; i < labels.size(); ++i) classes[labels[i] - 1].samples.append_row(features.row(i));
    return TrainingSet(std::move(classes));
  }

  std::size_t class_count() const noexcept { return classes_.size(); }
  std::size_t dimension() const noexcept { return classes_.empty() ? 0 : classes_.front().samples.cols(); }
  const std::vector<LabeledClass>& classes() const noexcept { return classes_; }
  const Matrix& samples(std::size_t class_index) const { return classes_.at(class_index).samples; }

  std::size_t total_size() const noexcept {
    std::size_t n = 0;
    for (const auto& c : classes_) n += c.samples.rows();
    return n;
  }

  friend bool operator==(const TrainingSet&, const TrainingSet&) = default;

private:
  std::vector<LabeledClass> classes_;
};

enum class Priors { uniform, proportional };

inline std::string to_string(Priors p) { return p == Priors::uniform ? "uniform" : "proportional"; }

inline Priors priors_from_string(const std::string& s) {
  if (s == "uniform") return Priors::uniform;
  if (s == "proportional") return Priors::proportional;
  throw std::invalid_argument("unknown priors '" + s + "' (expected uniform|proportional)");
}

struct ClassPosterior {
  std::vector<double> log_densities;
  std::vector<double> posteriors;
  int predicted = 0;
  std::vector<BandwidthVector> local_bandwidths;
};

/// Normal-reference (Silverman-type) bandwidths: sigma_j * (4 / ((d+2) n))^(1/(d+4)).
/// sigma_j falls back to h_floor when undefined (n = 1) or zero.
inline BandwidthVector normal_reference_bandwidths(const Matrix& samples, double h_floor) {
  const std::size_t n = samples.rows();
  const std::size_t d = samples.cols();
  if (n == 0 || d == 0) throw std::invalid_argument("normal_reference_bandwidths: empty sample");
  const double factor = std::pow(4.0 / (static_cast<double>(d + 2) * static_cast<double>(n)),
                                 1.0 / static_cast<double>(d + 4));
  BandwidthVector h(d);
  for (std::size_t j = 0; j < d; ++j) {
    double sigma = 0.0;
    if (n > 1) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += samples(i, j);
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) ss += (samples(i, j) - mean) * (samples(i, j) - mean);
      sigma = std::sqrt(ss / static_cast<double>(n - 1));
    }
    if (!(sigma > 0.0)) sigma = h_floor;
    h[j] = sigma * factor;
  }
  return h;
}

class Classifier {
public:
  static Classifier fit(TrainingSet data, const RodeoConfig& config, Priors priors = Priors::uniform) {
    config.validate();
    Classifier clf;
    clf.data_ = std::move(data);
    clf.config_ = config;
    clf.priors_ = priors;
    if (clf.data_.class_count() < 2) throw std::invalid_argument("fit: need at least 2 classes");
    const std::size_t total = clf.data_.total_size();
    for (const auto& cls : clf.data_.classes()) {
      const std::size_t n = cls.samples.rows();
      if (n < kMinClassSize)
        throw std::invalid_argument("fit: class " + std::to_string(cls.label) + " has " + std::to_string(n) +
                                    " samples, need at least " + std::to_string(kMinClassSize));
      clf.h0_.push_back(initial_bandwidth(n, config));
      clf.log_prior_.push_back(std::log(static_cast<double>(n) / static_cast<double>(total)));
      clf.baseline_bw_.push_back(normal_reference_bandwidths(cls.samples, config.h_floor));
    }
    return clf;
  }

  const TrainingSet& training() const noexcept { return data_; }
  const RodeoConfig& config() const noexcept { return config_; }
  Priors priors() const noexcept { return priors_; }
  std::size_t class_count() const noexcept { return data_.class_count(); }
  std::size_t dimension() const noexcept { return data_.dimension(); }
  const std::vector<double>& initial_bandwidths() const noexcept { return h0_; }
  const std::vector<BandwidthVector>& baseline_bandwidths() const noexcept { return baseline_bw_; }

  /// Rodeo for one (query, class) pair.
  RodeoResult select(std::span<const double> query, std::size_t class_index) const {
    check_query(query);
    return select_local_bandwidths(query, data_.samples(class_index), config_, h0_.at(class_index));
  }

  ClassPosterior posterior(std::span<const double> query) const {
    check_query(query);
    ClassPosterior out;
    const std::size_t c = class_count();
    out.log_densities.resize(c);
    out.local_bandwidths.resize(c);
    for (std::size_t y = 0; y < c; ++y) {
      auto r = select_local_bandwidths(query, data_.samples(y), config_, h0_[y]);
      out.log_densities[y] = r.log_density;
      out.local_bandwidths[y] = std::move(r.bandwidths);
    }
    normalize(out);
    return out;
  }

  std::vector<ClassPosterior> predict_batch(const Matrix& queries, unsigned threads = 1) const {
    std::vector<ClassPosterior> out(queries.rows());
    if (queries.rows() > 0 && queries.cols() != dimension())
      throw std::invalid_argument("predict_batch: queries have dimension " + std::to_string(queries.cols()) +
                                  ", expected " + std::to_string(dimension()));
    parallel_for(queries.rows(), threads, [&](std::size_t i) { out[i] = posterior(queries.row(i)); });
    return out;
  }

  /// Same decomposed posterior with fixed normal-reference bandwidths per class.
  ClassPosterior baseline_fixed_bandwidth_posterior(std::span<const double> query) const {
    check_query(query);
    ClassPosterior out;
    const std::size_t c = class_count();
    out.log_densities.resize(c);
    out.local_bandwidths = baseline_bw_;
    for (std::size_t y = 0; y < c; ++y)
      out.log_densities[y] = log_product_kernel_density(query, data_.samples(y), baseline_bw_[y]);
    normalize(out);
    return out;
  }

private:
  void check_query(std::span<const double> query) const {
    if (query.size() != dimension())
      throw std::invalid_argument("query has dimension " + std::to_string(query.size()) + ", expected " +
                                  std::to_string(dimension()));
  }

  void normalize(ClassPosterior& out) const {
    const std::size_t c = class_count();
    std::vector<double> score(out.log_densities);
    if (priors_ == Priors::proportional)
      for (std::size_t y = 0; y < c; ++y) score[y] += log_prior_[y];

    out.posteriors.assign(c, 0.0);
    const double peak = *std::max_element(score.begin(), score.end());
    if (!std::isfinite(peak)) {
      // No class has any density mass at the query: fall back to the class proportions.
      for (std::size_t y = 0; y < c; ++y) out.posteriors[y] = std::exp(log_prior_[y]);
    } else {
      double total = 0.0;
      for (std::size_t y = 0; y < c; ++y) {
        out.posteriors[y] = std::exp(score[y] - peak);
        total += out.posteriors[y];
      }
      for (double& p : out.posteriors) p /= total;
    }
    std::size_t best = 0;
    for (std::size_t y = 1; y < c; ++y)
      if (out.posteriors[y] > out.posteriors[best]) best = y;
    out.predicted = data_.classes()[best].label;
  }

  TrainingSet data_;
  RodeoConfig config_;
  Priors priors_ = Priors::uniform;
  std::vector<double> h0_;
  std::vector<double> log_prior_;
  std::vector<BandwidthVector> baseline_bw_;
};

}  // namespace kderodeo
