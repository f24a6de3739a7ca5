#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "kderodeo/evaluation.hpp"
#include "kderodeo/feature_selection.hpp"
#include "kderodeo/synthetic.hpp"
#include "support.hpp"

using namespace kderodeo;

TEST(ZScores, SmallExamples) {
  const auto z = z_scores(std::vector{1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(z[0], -1.0);
  EXPECT_DOUBLE_EQ(z[1], 0.0);
  EXPECT_DOUBLE_EQ(z[2], 1.0);
  EXPECT_EQ(z_scores(std::vector{0.4, 0.4, 0.4, 0.4}), std::vector<double>(4, 0.0));
  EXPECT_THROW(z_scores(std::vector{1.0}), std::invalid_argument);
}

TEST(ZScores, MeanZeroUnitSampleVariance) {
  Rng rng(51);
  for (int t = 0; t < 20; ++t) {
    const auto v = fixtures::random_vector(rng, 2 + rng.below(40), 0.0, 1.0);
    const auto z = z_scores(v);
    double m = 0.0;
    double ss = 0.0;
    for (double x : z) m += x;
    for (double x : z) ss += x * x;
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(ss / static_cast<double>(z.size() - 1), 1.0, 1e-12);
  }
}

TEST(ZScores, AffineInvariant) {
  const std::vector<double> v{0.1, 0.5, 0.2, 0.9, 0.3};
  std::vector<double> w;
  for (double x : v) w.push_back(3.0 * x + 7.0);
  const auto a = z_scores(v);
  const auto b = z_scores(w);
  for (std::size_t j = 0; j < v.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-12);
}

TEST(SelectFeatures, InclusiveCutpoint) {
  const std::vector<double> z{-1.0, -0.5, -1.2, 0.3};
  EXPECT_EQ(select_features(z, -1.0), (std::vector<std::size_t>{0, 2}));
  EXPECT_TRUE(select_features(z, -5.0).empty());
  EXPECT_EQ(select_features(z, 10.0).size(), 4u);
}

TEST(SelectFeatures, MonotoneInCutpoint) {
  Rng rng(52);
  for (int t = 0; t < 50; ++t) {
    const auto z = z_scores(fixtures::random_vector(rng, 12, 0.0, 1.0));
    const double lo = rng.uniform(-2.5, 1.0);
    const double hi = lo + rng.uniform(0.0, 1.5);
    const auto a = select_features(z, lo);
    const auto b = select_features(z, hi);
    EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
  }
}

TEST(SelectFeatures, PermutingDimensionsPermutesSelection) {
  const std::vector<double> mb{0.3, 0.05, 0.6, 0.62, 0.58, 0.6, 0.61, 0.04};
  const std::vector<std::size_t> perm{7, 2, 5, 0, 1, 6, 3, 4};
  std::vector<double> pm(mb.size());
  for (std::size_t j = 0; j < mb.size(); ++j) pm[j] = mb[perm[j]];
  const auto a = select_features(z_scores(mb), -1.0);
  const auto b = select_features(z_scores(pm), -1.0);
  std::vector<std::size_t> mapped;
  for (std::size_t j : b) mapped.push_back(perm[j]);
  std::sort(mapped.begin(), mapped.end());
  EXPECT_EQ(a, mapped);
}

TEST(MeanBandwidths, AveragesAndValidates) {
  const std::vector<BandwidthVector> bw{{0.1, 0.4}, {0.3, 0.6}};
  EXPECT_EQ(mean_bandwidths(bw), (std::vector<double>{0.2, 0.5}));
  EXPECT_THROW(mean_bandwidths(std::vector<BandwidthVector>{}), std::invalid_argument);
  EXPECT_THROW(mean_bandwidths(std::vector<BandwidthVector>{{0.1}, {0.1, 0.2}}), std::invalid_argument);
}

TEST(ClassFeatureReport, ThreadIndependentAndChecked) {
  const auto data = generate_ex2(53, {1, 2}, 60, 20);
  const auto clf = Classifier::fit(data.train, RodeoConfig{});
  const Matrix pts = data.test.rows_with_label(1);
  const auto a = class_feature_report(clf, pts, 1, 1);
  const auto b = class_feature_report(clf, pts, 1, 3);
  EXPECT_EQ(a.mean_bandwidths, b.mean_bandwidths);
  EXPECT_EQ(a.relevant_set, b.relevant_set);
  EXPECT_THROW(class_feature_report(clf, pts, 3), std::invalid_argument);
  EXPECT_THROW(class_feature_report(clf, Matrix(0, kEx2Dims), 1), std::invalid_argument);
}

// Reference mean z-scores for group 1, dims 1-6, averaged over trials.
TEST(FeatureRecovery, Ex1GroupOneMatchesReference) {
  constexpr std::array<double, 6> reference{-2.4945, -2.2906, -2.0713, -1.7927, -1.5563, -1.3577};
  ExperimentSpec spec;
  const auto agg = run_experiment(spec, 10, 2024, 0);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(agg.mean_z_scores[0][j], reference[j], 0.15) << "dim " << j + 1;
  for (std::size_t j = 6; j < kEx1Dims; ++j) EXPECT_GT(agg.mean_z_scores[0][j], 0.0) << "dim " << j + 1;
}

// Dim 2 has a reference mean z-score near -0.92, just above the default cutpoint,
// so it misses R_y in roughly half the trials per class. Measured: 26 of 100.
TEST(FeatureRecovery, DISABLED_Ex2TwoGroupsSelectFirstTwoDims) {
  int hits = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto data = generate_ex2(derive_seed(54, t), {1, 2}, 200, 150);
    const auto r = run_trial(data, RodeoConfig{}, Priors::uniform, 0);
    bool ok = true;
    for (const auto& s : r.relevant_sets) ok = ok && s == std::vector<std::size_t>{0, 1};
    hits += ok;
  }
  EXPECT_GE(hits, 95);
}

TEST(FeatureRecovery, Ex2TwoGroupsZScoresMatchReference) {
  constexpr double reference[2][2] = {{-2.5575, -0.9233}, {-2.5553, -0.9317}};
  double mean_z[2][2] = {};
  int dim1_selected = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto data = generate_ex2(derive_seed(54, t), {1, 2}, 200, 150);
    const auto r = run_trial(data, RodeoConfig{}, Priors::uniform, 0);
    for (std::size_t y = 0; y < 2; ++y) {
      for (std::size_t j = 0; j < 2; ++j) mean_z[y][j] += r.z_scores[y][j] / 100.0;
      for (std::size_t j = 2; j < kEx2Dims; ++j) EXPECT_GT(r.z_scores[y][j], -1.0);
      dim1_selected += !r.relevant_sets[y].empty() && r.relevant_sets[y].front() == 0;
    }
  }
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(mean_z[y][j], reference[y][j], 0.15) << y << ',' << j;
  EXPECT_GE(dim1_selected, 190);
}

TEST(FeatureRecovery, Ex3SmallSampleStillFindsFirstTwoDims) {
  int hits = 0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    const auto data = generate_ex3(derive_seed(55, t), 50, 2);
    const auto r = run_trial(data, RodeoConfig{}, Priors::uniform, 0);
    bool ok = true;
    for (const auto& z : r.z_scores) ok = ok && z[0] < 0.0 && z[1] < 0.0;
    hits += ok;
  }
  EXPECT_GE(hits, 18);
}
