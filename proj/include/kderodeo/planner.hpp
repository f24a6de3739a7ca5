#pragma once

// Adaptive per-class sample-size planning.
//
// The excess risk of the plug-in Bayes rule is bounded (asymptotically) by
//   epsilon = sum_y A_y B_y / N,   A_y = n_y^((2+r_y)/(4+r_y)),
// where r_y is the number of selected variables of class y and B_y collects the
// curvature and variance constants of the class density. Each round fits the
// classifier, estimates r_y and B_y, and grows N with A proportional to B.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kderodeo/classifier.hpp"
#include "kderodeo/dataset.hpp"
#include "kderodeo/dataset_io.hpp"
#include "kderodeo/feature_selection.hpp"
#include "kderodeo/kernel_math.hpp"
#include "kderodeo/random.hpp"
#include "kderodeo/synthetic.hpp"

namespace kderodeo {

inline double compute_A(std::size_t n, std::size_t r_hat) {
  if (n == 0) throw std::invalid_argument("compute_A: n must be >= 1");
  const auto r = static_cast<double>(r_hat);
  return std::pow(static_cast<double>(n), (2.0 + r) / (4.0 + r));
}

/// k_j = h_j * n^(1/(4+r)) for the mean bandwidth h_j of each selected dimension.
inline std::vector<double> compute_k_constants(std::span<const double> selected_bandwidths, std::size_t n,
                                               std::size_t r_hat) {
  if (r_hat == 0) throw std::invalid_argument("no relevant variables; B undefined");
  if (selected_bandwidths.size() != r_hat)
    throw std::invalid_argument("compute_k_constants: expected " + std::to_string(r_hat) + " bandwidths");
  const double scale = std::pow(static_cast<double>(n), 1.0 / (4.0 + static_cast<double>(r_hat)));
  std::vector<double> k(r_hat);
  for (std::size_t j = 0; j < r_hat; ++j) k[j] = selected_bandwidths[j] * scale;
  return k;
}

/// Density estimate at one importance-sampling point: log f(x) and f''_jj(x) / f(x)
/// for each selected dimension j.
struct DensitySample {
  double log_density = 0.0;
  std::vector<double> curvature_ratios;

  static DensitySample from_values(double density, std::span<const double> second_partials) {
    DensitySample s;
    s.log_density = std::log(density);
    for (double f2 : second_partials) s.curvature_ratios.push_back(f2 / density);
    return s;
  }
};

struct BEstimate {
  double value = 0.0;
  std::size_t used = 0;
  std::size_t dropped = 0;  // points with zero density or non-finite curvature
};

/// Importance-sampling estimate of
///   (alpha/2) int |sum_j k_j^2 f''_jj| + ||K||_2^r (prod_j k_j)^(-1/2) int sqrt(f),
/// weighting each point by 1/f(x) and averaging over the points.
inline BEstimate compute_B(std::span<const DensitySample> points, std::span<const double> k, std::size_t r_hat,
                           const KernelConstants& constants = KernelConstants::gaussian()) {
  if (r_hat == 0) throw std::invalid_argument("compute_B: no relevant variables; B undefined");
  if (k.size() != r_hat) throw std::invalid_argument("compute_B: k has the wrong length");
  if (points.empty()) throw std::invalid_argument("compute_B: empty point set");

  double log_prod_k = 0.0;
  for (double kj : k) log_prod_k += std::log(kj);
  const double variance_coeff = constants.l2norm(r_hat) * std::exp(-0.5 * log_prod_k);
  const double alpha = constants.alpha_per_dim;

  BEstimate out;
  double bias_sum = 0.0;
  double variance_sum = 0.0;
  for (const auto& p : points) {
    if (p.curvature_ratios.size() != r_hat) throw std::invalid_argument("compute_B: curvature count mismatch");
    bool finite = std::isfinite(p.log_density);
    double curvature = 0.0;
    for (std::size_t j = 0; finite && j < r_hat; ++j) {
      curvature += k[j] * k[j] * p.curvature_ratios[j];
      finite = std::isfinite(p.curvature_ratios[j]);
    }
    const double inv_sqrt_f = std::exp(-0.5 * p.log_density);
    if (!finite || !std::isfinite(inv_sqrt_f)) {
      ++out.dropped;
      continue;
    }
    bias_sum += std::abs(curvature);
    variance_sum += inv_sqrt_f;
    ++out.used;
  }
  if (out.used == 0) {
    out.value = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const auto m = static_cast<double>(out.used);
  out.value = 0.5 * alpha * bias_sum / m + variance_coeff * variance_sum / m;
  return out;
}

inline double compute_epsilon(std::span<const double> A, std::span<const double> B, std::size_t N) {
  if (A.size() != B.size()) throw std::invalid_argument("compute_epsilon: length mismatch");
  if (N == 0) throw std::invalid_argument("compute_epsilon: N must be >= 1");
  double dot = 0.0;
  for (std::size_t y = 0; y < A.size(); ++y) dot += A[y] * B[y];
  return dot / static_cast<double>(N);
}

/// Integer sizes n_y >= lower_y with sum N such that n_y^((2+r)/(4+r)) is proportional
/// to B_y wherever the lower bounds allow. Classes with B_y = 0 stay at their lower
/// bound. Real-valued targets come from bisection on the proportionality constant,
/// integers from largest-remainder rounding (ties to the lower index).
inline std::vector<std::size_t> reallocate_sizes(std::span<const double> B, std::span<const std::size_t> r_hat,
                                                 std::size_t N, std::span<const std::size_t> lower) {
  const std::size_t c = B.size();
  if (r_hat.size() != c || lower.size() != c) throw std::invalid_argument("reallocate_sizes: length mismatch");
  if (c == 0) throw std::invalid_argument("reallocate_sizes: no classes");
  const std::size_t floor_total = std::accumulate(lower.begin(), lower.end(), std::size_t{0});
  if (N < floor_total)
    throw std::invalid_argument("reallocate_sizes: N = " + std::to_string(N) + " is below the minimum total " +
                                std::to_string(floor_total));
  for (double b : B)
    if (!(b >= 0.0) || !std::isfinite(b)) throw std::invalid_argument("reallocate_sizes: B must be finite and >= 0");

  const auto target_total = static_cast<double>(N);
  std::vector<double> target(c);
  const bool any_positive = std::any_of(B.begin(), B.end(), [](double b) { return b > 0.0; });

  if (!any_positive) {
    // No allocation signal: spread the surplus evenly.
    const double extra = (target_total - static_cast<double>(floor_total)) / static_cast<double>(c);
    for (std::size_t y = 0; y < c; ++y) target[y] = static_cast<double>(lower[y]) + extra;
  } else {
    // n_y(t) = max(lower_y, (t B_y)^((4+r)/(2+r))), searched over u = log t.
    auto fill = [&](double u) {
      double total = 0.0;
      for (std::size_t y = 0; y < c; ++y) {
        double n = static_cast<double>(lower[y]);
        if (B[y] > 0.0) {
          const auto r = static_cast<double>(r_hat[y]);
          const double exponent = (4.0 + r) / (2.0 + r);
          n = std::max(n, std::exp(std::min(exponent * (u + std::log(B[y])), 700.0)));
        }
        target[y] = n;
        total += n;
      }
      return total;
    };
    double lo = -1.0;
    double hi = 1.0;
    while (fill(lo) > target_total) lo = lo * 2.0 - 1.0;
    while (fill(hi) < target_total) hi = hi * 2.0 + 1.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (fill(mid) < target_total) lo = mid;
      else hi = mid;
    }
    fill(hi);
    // Rescale the unconstrained part so the real targets sum to N exactly.
    double free_total = 0.0;
    double fixed_total = 0.0;
    for (std::size_t y = 0; y < c; ++y) {
      if (target[y] > static_cast<double>(lower[y])) free_total += target[y];
      else fixed_total += target[y];
    }
    if (free_total > 0.0) {
      const double ratio = (target_total - fixed_total) / free_total;
      for (std::size_t y = 0; y < c; ++y)
        if (target[y] > static_cast<double>(lower[y]))
          target[y] = std::max(static_cast<double>(lower[y]), target[y] * ratio);
    }
  }

  std::vector<std::size_t> out(c);
  std::size_t assigned = 0;
  for (std::size_t y = 0; y < c; ++y) {
    out[y] = std::max(lower[y], static_cast<std::size_t>(std::floor(target[y])));
    assigned += out[y];
  }
  // Largest remainder; if flooring overshot (rounding noise), take back from the largest remainders' opposites.
  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return (target[a] - std::floor(target[a])) > (target[b] - std::floor(target[b]));
  });
  for (std::size_t k = 0; assigned < N; k = (k + 1) % c) {
    ++out[order[k]];
    ++assigned;
  }
  for (std::size_t k = c; assigned > N;) {
    k = (k == 0 ? c : k) - 1;
    if (out[order[k]] > lower[order[k]]) {
      --out[order[k]];
      --assigned;
    }
  }
  return out;
}

inline std::vector<std::size_t> reallocate_sizes(std::span<const double> B, std::span<const std::size_t> r_hat,
                                                 std::size_t N, std::size_t min_per_class) {
  const std::vector<std::size_t> lower(B.size(), min_per_class);
  return reallocate_sizes(B, r_hat, N, lower);
}

// ---------------------------------------------------------------------------
// Sources

/// Supplies class-labelled rows on demand. draw() returns fewer rows than asked
/// for once a class is exhausted.
class SampleSource {
public:
  virtual ~SampleSource() = default;
  virtual std::size_t class_count() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual Matrix draw(std::size_t class_index, std::size_t count) = 0;
};

/// Unlimited ex2 rows for a subset of groups, one persistent stream per group.
class Ex2Source final : public SampleSource {
public:
  Ex2Source(std::uint64_t seed, const std::set<int>& groups) : groups_(groups.begin(), groups.end()) {
    if (groups_.size() < 2) throw std::invalid_argument("Ex2Source: need at least 2 groups");
    for (int g : groups_) {
      if (g < 1 || g > static_cast<int>(kEx2Groups)) throw std::invalid_argument("Ex2Source: group outside 1..5");
      streams_.emplace_back(derive_seed(seed, 0x9A7ULL, static_cast<std::uint64_t>(g)));
    }
  }
  std::size_t class_count() const override { return groups_.size(); }
  std::size_t dimension() const override { return kEx2Dims; }
  Matrix draw(std::size_t class_index, std::size_t count) override {
    Matrix out(count, kEx2Dims);
    for (std::size_t r = 0; r < count; ++r) ex2_row(streams_.at(class_index), groups_[class_index], out.row(r));
    return out;
  }

private:
  std::vector<int> groups_;
  std::vector<Rng> streams_;
};

/// Finite pool: each class's rows in a seeded random order, handed out without replacement.
class FrameSource final : public SampleSource {
public:
  FrameSource(const LabeledFrame& frame, std::uint64_t seed) : features_(frame.features) {
    order_.resize(frame.class_count());
    for (std::size_t i = 0; i < frame.labels.size(); ++i)
      order_[static_cast<std::size_t>(frame.labels[i] - 1)].push_back(i);
    for (std::size_t y = 0; y < order_.size(); ++y) {
      Rng rng(derive_seed(seed, 0xF5ULL, y + 1));
      rng.shuffle(std::span<std::size_t>(order_[y]));
    }
    cursor_.assign(order_.size(), 0);
  }
  std::size_t class_count() const override { return order_.size(); }
  std::size_t dimension() const override { return features_.cols(); }
  Matrix draw(std::size_t class_index, std::size_t count) override {
    auto& cur = cursor_.at(class_index);
    const auto& idx = order_[class_index];
    const std::size_t take = std::min(count, idx.size() - cur);
    Matrix out = features_.select_rows(std::span<const std::size_t>(idx).subspan(cur, take));
    cur += take;
    return out;
  }

private:
  Matrix features_;
  std::vector<std::vector<std::size_t>> order_;
  std::vector<std::size_t> cursor_;
};

// ---------------------------------------------------------------------------
// Planner loop

struct PlannerConfig {
  std::size_t n0 = 50;
  std::size_t n_test = 50;
  double epsilon_star = 0.1;
  double n_add_frac = 0.1;
  std::size_t max_rounds = 50;
  unsigned threads = 1;

  void validate() const {
    if (n0 < kMinClassSize)
      throw std::invalid_argument("planner: n0 = " + std::to_string(n0) + " is below the minimum class size " +
                                  std::to_string(kMinClassSize));
    if (n_test == 0) throw std::invalid_argument("planner: n_test must be positive");
    if (!(epsilon_star > 0.0)) throw std::invalid_argument("planner: epsilon* must be positive");
    if (!(n_add_frac > 0.0) || !std::isfinite(n_add_frac)) throw std::invalid_argument("planner: n_add_frac must be positive");
    if (max_rounds == 0) throw std::invalid_argument("planner: max_rounds must be >= 1");
  }
};

/// ceil(frac * N) rounded up to a multiple of c, at least c.
inline std::size_t planner_increment(std::size_t N, std::size_t c, double frac) {
  auto add = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(N)));
  add = ((add + c - 1) / c) * c;
  return std::max(add, c);
}

struct PlannerState {
  std::size_t round = 0;
  std::size_t total = 0;  // N
  std::vector<std::size_t> sizes;
  double epsilon = 0.0;
  std::vector<double> A_hat;
  std::vector<double> B_hat;  // 0 for classes without selected variables
  std::vector<std::size_t> r_hat;
  std::vector<std::vector<double>> k_constants;  // c x d; 0 where not selected
  double accuracy = 0.0;
  std::size_t dropped_points = 0;
};

enum class PlannerStatus { converged, exhausted, max_rounds };

inline std::string to_string(PlannerStatus s) {
  switch (s) {
    case PlannerStatus::converged: return "converged";
    case PlannerStatus::exhausted: return "exhausted";
    case PlannerStatus::max_rounds: return "max_rounds";
  }
  return "unknown";
}

struct PlannerTrace {
  std::vector<PlannerState> rounds;
  PlannerStatus status = PlannerStatus::converged;
};

/// One E-step: fit, predict the held-out set, and estimate r, k, B per class.
/// Points predicted as class y form its importance sample; the class's own
/// training rows stand in when none are.
inline PlannerState planner_estimate(const TrainingSet& train, const LabeledSet& test, const RodeoConfig& rodeo,
                                     unsigned threads) {
  const auto clf = Classifier::fit(train, rodeo, Priors::proportional);
  const auto posteriors = clf.predict_batch(test.features, threads);
  const std::size_t c = clf.class_count();
  const std::size_t d = clf.dimension();

  PlannerState st;
  st.sizes.resize(c);
  st.A_hat.resize(c);
  st.B_hat.assign(c, 0.0);
  st.r_hat.resize(c);
  st.k_constants.assign(c, std::vector<double>(d, 0.0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) correct += posteriors[i].predicted == test.labels[i];
  st.accuracy = test.size() ? static_cast<double>(correct) / static_cast<double>(test.size()) : 0.0;

  for (std::size_t y = 0; y < c; ++y) {
    const Matrix& samples = train.samples(y);
    const std::size_t n = samples.rows();
    st.sizes[y] = n;
    st.total += n;

    Matrix points;
    std::vector<BandwidthVector> bws;
    std::vector<double> log_f;
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (posteriors[i].predicted != static_cast<int>(y) + 1) continue;
      points.append_row(test.features.row(i));
      bws.push_back(posteriors[i].local_bandwidths[y]);
      log_f.push_back(posteriors[i].log_densities[y]);
    }
    if (points.empty()) {
      points = samples;
      bws.resize(n);
      log_f.resize(n);
      parallel_for(n, threads, [&](std::size_t i) {
        auto r = clf.select(samples.row(i), y);
        bws[i] = std::move(r.bandwidths);
        log_f[i] = r.log_density;
      });
    }

    const auto summary = summarize_bandwidths(static_cast<int>(y) + 1, bws, rodeo.tau0);
    const std::size_t r = summary.relevant_set.size();
    st.r_hat[y] = r;
    st.A_hat[y] = compute_A(n, r);
    if (r == 0) continue;

    std::vector<double> selected;
    for (std::size_t j : summary.relevant_set) selected.push_back(summary.mean_bandwidths[j]);
    const auto k = compute_k_constants(selected, n, r);
    for (std::size_t q = 0; q < r; ++q) st.k_constants[y][summary.relevant_set[q]] = k[q];

    std::vector<DensitySample> ds(points.rows());
    parallel_for(points.rows(), threads, [&](std::size_t i) {
      ds[i].log_density = log_f[i];
      for (std::size_t j : summary.relevant_set)
        ds[i].curvature_ratios.push_back(curvature_ratio(points.row(i), samples, bws[i], j));
    });
    const auto b = compute_B(ds, k, r);
    st.dropped_points += b.dropped;
    st.B_hat[y] = std::isfinite(b.value) ? b.value : 0.0;
  }
  st.epsilon = compute_epsilon(st.A_hat, st.B_hat, st.total);
  return st;
}

inline PlannerTrace run_planner(SampleSource& source, const PlannerConfig& config, const RodeoConfig& rodeo) {
  config.validate();
  rodeo.validate();
  const std::size_t c = source.class_count();
  if (c < 2) throw std::invalid_argument("planner: need at least 2 classes");

  PlannerTrace trace;
  LabeledSet test;
  std::vector<Matrix> train(c);
  for (std::size_t y = 0; y < c; ++y) {
    Matrix t = source.draw(y, config.n_test);
    Matrix s = source.draw(y, config.n0);
    if (t.rows() < config.n_test || s.rows() < config.n0) {
      trace.status = PlannerStatus::exhausted;
      return trace;
    }
    for (std::size_t i = 0; i < t.rows(); ++i) test.append(t.row(i), static_cast<int>(y) + 1);
    train[y] = std::move(s);
  }

  for (std::size_t round = 1;; ++round) {
    std::vector<LabeledClass> classes;
    for (std::size_t y = 0; y < c; ++y) classes.push_back({static_cast<int>(y) + 1, train[y]});
    auto st = planner_estimate(TrainingSet(std::move(classes)), test, rodeo, config.threads);
    st.round = round;
    const double epsilon = st.epsilon;
    const auto B = st.B_hat;
    const auto r = st.r_hat;
    const auto sizes = st.sizes;
    const std::size_t N = st.total;
    trace.rounds.push_back(std::move(st));

    if (epsilon <= config.epsilon_star) {
      trace.status = PlannerStatus::converged;
      return trace;
    }
    if (round >= config.max_rounds) {
      trace.status = PlannerStatus::max_rounds;
      return trace;
    }

    const std::size_t next_N = N + planner_increment(N, c, config.n_add_frac);
    const auto next = reallocate_sizes(B, r, next_N, sizes);
    for (std::size_t y = 0; y < c; ++y) {
      const std::size_t want = next[y] - sizes[y];
      if (want == 0) continue;
      Matrix extra = source.draw(y, want);
      train[y].append_rows(extra);
      if (extra.rows() < want) {
        trace.status = PlannerStatus::exhausted;
        return trace;
      }
    }
  }
}

}  // namespace kderodeo
