#pragma once

// Seeded generators for the three synthetic designs.
//
//  ex1: 10 groups, 30 dims. Group y has N(0.5, (0.02 (i - y + 1))^2) columns
//       i = y..y+5 and Uniform(0,1) columns elsewhere.
//  ex2: 5 groups, 10 dims. Columns 1-2 are N(mu_y, diag(0.1^2, 0.2^2)) with the
//       group means below; columns 3-10 are Uniform(0,1).
//  ex3: ex2 with a fixed combination of groups per group count.
//
// Every group draws from its own stream derive_seed(seed, design, group), so a
// group's rows do not depend on which other groups are generated.

#include <array>
#include <cstddef>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "kderodeo/dataset.hpp"
#include "kderodeo/matrix.hpp"
#include "kderodeo/random.hpp"

namespace kderodeo {

inline constexpr std::size_t kEx1Groups = 10;
inline constexpr std::size_t kEx1Dims = 30;
inline constexpr std::size_t kEx1RelevantPerGroup = 6;
inline constexpr std::size_t kEx1PoolSize = 1000;

inline constexpr std::size_t kEx2Groups = 5;
inline constexpr std::size_t kEx2Dims = 10;
inline constexpr std::array<std::array<double, 2>, kEx2Groups> kEx2Means{{
    {0.0, 0.0},
    {0.1635, 0.2044},
    {-0.2452, 0.1431},
    {-0.2180, -0.3815},
    {0.3815, -0.1907},
}};
inline constexpr std::array<double, 2> kEx2Sd{0.1, 0.2};
inline constexpr std::size_t kEx2DefaultTest = 150;

namespace detail {
inline constexpr std::uint64_t kStreamEx1 = 1;
inline constexpr std::uint64_t kStreamEx2 = 2;
inline constexpr std::uint64_t kStreamNoise = 3;

inline void check_train_count(std::size_t n_train) {
  if (n_train == 0) throw std::invalid_argument("generator: n_train must be positive");
}
}  // namespace detail

/// Zero-based relevant columns of ex1 group y (1-based group id).
inline std::vector<std::size_t> ex1_relevant_columns(int group) {
  if (group < 1 || group > static_cast<int>(kEx1Groups)) throw std::invalid_argument("ex1: group out of range");
  std::vector<std::size_t> cols;
  for (std::size_t k = 0; k < kEx1RelevantPerGroup; ++k) cols.push_back(static_cast<std::size_t>(group - 1) + k);
  return cols;
}

inline void ex1_row(Rng& rng, int group, std::span<double> row) {
  const auto y = static_cast<std::size_t>(group);
  for (std::size_t i = 1; i <= kEx1Dims; ++i) {
    if (i >= y && i <= y + kEx1RelevantPerGroup - 1)
      row[i - 1] = rng.normal(0.5, 0.02 * static_cast<double>(i - y + 1));
    else
      row[i - 1] = rng.uniform();
  }
}

inline SplitData generate_ex1(std::uint64_t seed, std::size_t n_train, std::size_t n_test,
                              std::size_t pool_size = kEx1PoolSize) {
  detail::check_train_count(n_train);
  if (n_train + n_test > pool_size)
    throw std::invalid_argument("ex1: n_train + n_test = " + std::to_string(n_train + n_test) +
                                " exceeds the per-group pool of " + std::to_string(pool_size));
  std::vector<LabeledClass> classes;
  SplitData out;
  std::vector<double> row(kEx1Dims);
  for (int g = 1; g <= static_cast<int>(kEx1Groups); ++g) {
    Rng rng(derive_seed(seed, detail::kStreamEx1, static_cast<std::uint64_t>(g)));
    LabeledClass cls{g, Matrix{}};
    for (std::size_t r = 0; r < n_train; ++r) {
      ex1_row(rng, g, row);
      cls.samples.append_row(row);
    }
    for (std::size_t r = 0; r < n_test; ++r) {
      ex1_row(rng, g, row);
      out.test.append(row, g);
    }
    classes.push_back(std::move(cls));
    out.label_names.push_back("group" + std::to_string(g));
  }
  out.train = TrainingSet(std::move(classes));
  return out;
}

inline void ex2_row(Rng& rng, int group, std::span<double> row) {
  const auto& mu = kEx2Means.at(static_cast<std::size_t>(group - 1));
  row[0] = rng.normal(mu[0], kEx2Sd[0]);
  row[1] = rng.normal(mu[1], kEx2Sd[1]);
  for (std::size_t k = 2; k < kEx2Dims; ++k) row[k] = rng.uniform();
}

/// `count` rows of one ex1 group, from the same stream generate_ex1 uses.
inline Matrix sample_ex1_group(std::uint64_t seed, int group, std::size_t count) {
  if (group < 1 || group > static_cast<int>(kEx1Groups)) throw std::invalid_argument("ex1: group out of range");
  Rng rng(derive_seed(seed, detail::kStreamEx1, static_cast<std::uint64_t>(group)));
  Matrix out(count, kEx1Dims);
  for (std::size_t r = 0; r < count; ++r) ex1_row(rng, group, out.row(r));
  return out;
}

/// `count` rows of one ex2 group, from the same stream generate_ex2 uses.
inline Matrix sample_ex2_group(std::uint64_t seed, int group, std::size_t count) {
  if (group < 1 || group > static_cast<int>(kEx2Groups)) throw std::invalid_argument("ex2: group out of range");
  Rng rng(derive_seed(seed, detail::kStreamEx2, static_cast<std::uint64_t>(group)));
  Matrix out(count, kEx2Dims);
  for (std::size_t r = 0; r < count; ++r) ex2_row(rng, group, out.row(r));
  return out;
}

/// Groups are 1-based ids into the mean table; class labels follow the sorted subset order.
inline SplitData generate_ex2(std::uint64_t seed, const std::set<int>& groups, std::size_t n_train,
                              std::size_t n_test) {
  detail::check_train_count(n_train);
  if (groups.empty()) throw std::invalid_argument("ex2: empty group subset");
  for (int g : groups)
    if (g < 1 || g > static_cast<int>(kEx2Groups))
      throw std::invalid_argument("ex2: group " + std::to_string(g) + " outside 1..5");
  std::vector<LabeledClass> classes;
  SplitData out;
  std::vector<double> row(kEx2Dims);
  int label = 0;
  for (int g : groups) {
    ++label;
    Rng rng(derive_seed(seed, detail::kStreamEx2, static_cast<std::uint64_t>(g)));
    LabeledClass cls{label, Matrix{}};
    for (std::size_t r = 0; r < n_train; ++r) {
      ex2_row(rng, g, row);
      cls.samples.append_row(row);
    }
    for (std::size_t r = 0; r < n_test; ++r) {
      ex2_row(rng, g, row);
      out.test.append(row, label);
    }
    classes.push_back(std::move(cls));
    out.label_names.push_back("group" + std::to_string(g));
  }
  if (classes.size() < 2) throw std::invalid_argument("ex2: need at least 2 groups to form a training set");
  out.train = TrainingSet(std::move(classes));
  return out;
}

enum class Ex3Combination {
  lexicographic_first,  // {1,2}, {1,2,3}, {1,2,3,4}, {1,...,5}
  table_first           // {4,5}, {3,4,5}, {1,2,3,4}, {1,...,5}
};

inline std::set<int> ex3_groups(std::size_t group_count, Ex3Combination which = Ex3Combination::lexicographic_first) {
  if (group_count < 2 || group_count > kEx2Groups) throw std::invalid_argument("ex3: group count must be 2..5");
  std::set<int> out;
  if (which == Ex3Combination::table_first && group_count < 4) {
    for (int g = static_cast<int>(kEx2Groups - group_count) + 1; g <= static_cast<int>(kEx2Groups); ++g)
      out.insert(g);
  } else {
    for (int g = 1; g <= static_cast<int>(group_count); ++g) out.insert(g);
  }
  return out;
}

inline SplitData generate_ex3(std::uint64_t seed, std::size_t n_train, std::size_t group_count,
                              std::size_t n_test = kEx2DefaultTest,
                              Ex3Combination which = Ex3Combination::lexicographic_first) {
  return generate_ex2(seed, ex3_groups(group_count, which), n_train, n_test);
}

/// Appends k standard-normal columns; the original columns are untouched.
inline Matrix augment_noise(const Matrix& features, std::size_t k_noise, std::uint64_t seed) {
  if (k_noise == 0) return features;
  Rng rng(derive_seed(seed, detail::kStreamNoise));
  Matrix out(features.rows(), features.cols() + k_noise);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto src = features.row(i);
    auto dst = out.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    for (std::size_t k = 0; k < k_noise; ++k) dst[features.cols() + k] = rng.normal();
  }
  return out;
}

/// Noise augmentation applied to both halves of a split, each from its own stream.
inline SplitData augment_noise(const SplitData& data, std::size_t k_noise, std::uint64_t seed) {
  if (k_noise == 0) return data;
  SplitData out;
  out.label_names = data.label_names;
  std::vector<LabeledClass> classes;
  for (const auto& cls : data.train.classes())
    classes.push_back({cls.label, augment_noise(cls.samples, k_noise,
                                                derive_seed(seed, static_cast<std::uint64_t>(cls.label)))});
  out.train = TrainingSet(std::move(classes));
  out.test.features = augment_noise(data.test.features, k_noise, derive_seed(seed, 0));
  out.test.labels = data.test.labels;
  return out;
}

}  // namespace kderodeo
