#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kderodeo/classifier.hpp"
#include "kderodeo/matrix.hpp"

namespace kderodeo {

/// Feature rows with integer labels 1..c.
struct LabeledSet {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }

  void append(std::span<const double> row, int label) {
    features.append_row(row);
    labels.push_back(label);
  }

  /// Rows carrying the given label, in order.
  Matrix rows_with_label(int label) const {
    Matrix out;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == label) out.append_row(features.row(i));
    return out;
  }

  friend bool operator==(const LabeledSet&, const LabeledSet&) = default;
};

struct SplitData {
  TrainingSet train;
  LabeledSet test;
  std::vector<std::string> label_names;  // label_names[y-1] names class y
};

}  // namespace kderodeo
