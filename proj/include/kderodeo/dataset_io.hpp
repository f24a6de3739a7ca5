#pragma once

// CSV ingestion, label encoding, stratified splitting and dataset manifests for
// the real-data pipelines.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "kderodeo/dataset.hpp"
#include "kderodeo/random.hpp"
#include "kderodeo/synthetic.hpp"

namespace kderodeo {

// ---------------------------------------------------------------------------
// CSV

/// RFC-4180 style reader: comma separated, double-quoted fields with "" escapes,
/// CRLF or LF line endings. Blank lines are skipped.
inline std::vector<std::vector<std::string>> read_csv_records(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  char ch = 0;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record.front().empty())) records.push_back(std::move(record));
    record.clear();
  };

  while (in.get(ch)) {
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (!field_started && field.empty()) quoted = true;
        else field.push_back(ch);
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(ch);
        field_started = true;
    }
  }
  if (quoted) throw std::runtime_error("csv: unterminated quoted field");
  if (!field.empty() || !record.empty()) end_record();
  return records;
}

/// Parses a finite double; surrounding blanks are allowed.
inline std::optional<double> parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

/// %.17g by default; 17 significant digits round-trip every double.
inline std::string format_double(double v, int significant = 17) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", significant, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Manifest

struct SplitSpec {
  std::size_t per_class_train = 0;
  std::size_t per_class_test = 0;
  std::uint64_t seed = 0;
};

struct DatasetManifest {
  std::filesystem::path path;
  std::variant<std::string, std::size_t> label_column = std::string("label");
  std::vector<std::string> feature_columns;  // empty: every column except the label
  std::vector<std::string> class_filter;     // empty: keep every class
  std::size_t noise_augment = 0;
  SplitSpec split;
  bool standardize = false;
};

inline DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  DatasetManifest m;
  if (!j.contains("path")) throw std::invalid_argument("manifest: missing 'path'");
  m.path = j.at("path").get<std::string>();
  if (m.path.is_relative() && !base_dir.empty()) m.path = base_dir / m.path;
  if (j.contains("label_column")) {
    const auto& lc = j.at("label_column");
    if (lc.is_number_integer() && lc.get<long long>() >= 0) m.label_column = lc.get<std::size_t>();
    else if (lc.is_string()) m.label_column = lc.get<std::string>();
    else throw std::invalid_argument("manifest: 'label_column' must be a name or a column index");
  }
  if (j.contains("feature_columns")) {
    const auto& fc = j.at("feature_columns");
    if (fc.is_array()) m.feature_columns = fc.get<std::vector<std::string>>();
    else if (!(fc.is_string() && fc.get<std::string>() == "all others"))
      throw std::invalid_argument("manifest: 'feature_columns' must be a list or \"all others\"");
  }
  if (j.contains("class_filter") && !j.at("class_filter").is_null())
    m.class_filter = j.at("class_filter").get<std::vector<std::string>>();
  m.noise_augment = j.value("noise_augment", std::size_t{0});
  m.standardize = j.value("standardize", false);
  if (j.contains("split")) {
    const auto& s = j.at("split");
    m.split.per_class_train = s.value("per_class_train", std::size_t{0});
    m.split.per_class_test = s.value("per_class_test", std::size_t{0});
    m.split.seed = s.value("seed", std::uint64_t{0});
  }
  return m;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["path"] = m.path.string();
  if (std::holds_alternative<std::size_t>(m.label_column)) j["label_column"] = std::get<std::size_t>(m.label_column);
  else j["label_column"] = std::get<std::string>(m.label_column);
  if (m.feature_columns.empty()) j["feature_columns"] = "all others";
  else j["feature_columns"] = m.feature_columns;
  j["class_filter"] = m.class_filter;
  j["noise_augment"] = m.noise_augment;
  j["standardize"] = m.standardize;
  j["split"] = {{"per_class_train", m.split.per_class_train},
                {"per_class_test", m.split.per_class_test},
                {"seed", m.split.seed}};
  return j;
}

inline DatasetManifest load_manifest(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open manifest " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("manifest " + file.string() + ": " + e.what());
  }
  return manifest_from_json(j, file.parent_path());
}

// ---------------------------------------------------------------------------
// Frames

struct LabeledFrame {
  Matrix features;
  std::vector<int> labels;                 // 1..c in first-appearance order
  std::vector<std::string> label_names;    // label_names[y-1] is the original value of class y
  std::vector<std::string> feature_names;
  std::size_t dropped_rows = 0;

  std::size_t class_count() const noexcept { return label_names.size(); }

  std::vector<std::string> decode(std::span<const int> encoded) const {
    std::vector<std::string> out;
    out.reserve(encoded.size());
    for (int y : encoded) out.push_back(label_names.at(static_cast<std::size_t>(y - 1)));
    return out;
  }
};

/// Parses CSV records (header first) into a frame. Rows with a missing or
/// non-numeric feature are dropped and counted.
inline LabeledFrame frame_from_records(const std::vector<std::vector<std::string>>& records,
                                       const DatasetManifest& m) {
  if (records.empty()) throw std::runtime_error("csv: no header row");
  const auto& header = records.front();

  std::size_t label_idx = 0;
  if (std::holds_alternative<std::size_t>(m.label_column)) {
    label_idx = std::get<std::size_t>(m.label_column);
    if (label_idx >= header.size())
      throw std::invalid_argument("csv: label column index " + std::to_string(label_idx) + " out of range");
  } else {
    const auto& name = std::get<std::string>(m.label_column);
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument("csv: missing label column '" + name + "'");
    label_idx = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<std::size_t> feature_idx;
  LabeledFrame frame;
  if (m.feature_columns.empty()) {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (k != label_idx) {
        feature_idx.push_back(k);
        frame.feature_names.push_back(header[k]);
      }
  } else {
    for (const auto& name : m.feature_columns) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw std::invalid_argument("csv: missing feature column '" + name + "'");
      feature_idx.push_back(static_cast<std::size_t>(it - header.begin()));
      frame.feature_names.push_back(name);
    }
  }
  if (feature_idx.empty()) throw std::invalid_argument("csv: no feature columns");

  std::map<std::string, int> codes;
  std::vector<double> row(feature_idx.size());
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (label_idx >= rec.size()) {
      ++frame.dropped_rows;
      continue;
    }
    const std::string& label = rec[label_idx];
    if (!m.class_filter.empty() &&
        std::find(m.class_filter.begin(), m.class_filter.end(), label) == m.class_filter.end())
      continue;
    bool ok = !label.empty();
    for (std::size_t k = 0; ok && k < feature_idx.size(); ++k) {
      const auto v = feature_idx[k] < rec.size() ? parse_double(rec[feature_idx[k]]) : std::nullopt;
      if (!v) ok = false;
      else row[k] = *v;
    }
    if (!ok) {
      ++frame.dropped_rows;
      continue;
    }
    auto [it, inserted] = codes.try_emplace(label, static_cast<int>(codes.size()) + 1);
    if (inserted) frame.label_names.push_back(label);
    frame.features.append_row(row);
    frame.labels.push_back(it->second);
  }
  if (frame.labels.empty()) throw std::runtime_error("csv: zero usable rows");
  return frame;
}

inline LabeledFrame load_csv(const DatasetManifest& m) {
  std::ifstream in(m.path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + m.path.string());
  return frame_from_records(read_csv_records(in), m);
}

/// Per class: shuffle the class's rows with its own stream, take the first
/// per_class_train rows for training and the next per_class_test for testing.
inline SplitData stratified_split(const LabeledFrame& frame, std::size_t per_class_train,
                                  std::size_t per_class_test, std::uint64_t seed) {
  const std::size_t c = frame.class_count();
  std::vector<std::vector<std::size_t>> rows(c);
  for (std::size_t i = 0; i < frame.labels.size(); ++i) rows[static_cast<std::size_t>(frame.labels[i] - 1)].push_back(i);

  SplitData out;
  out.label_names = frame.label_names;
  std::vector<LabeledClass> classes;
  for (std::size_t y = 0; y < c; ++y) {
    auto& idx = rows[y];
    if (idx.size() < per_class_train + per_class_test)
      throw std::invalid_argument("split: class '" + frame.label_names[y] + "' has " + std::to_string(idx.size()) +
                                  " rows, need " + std::to_string(per_class_train + per_class_test));
    Rng rng(derive_seed(seed, 0x5B117ULL, y + 1));
    rng.shuffle(std::span<std::size_t>(idx));
    const int label = static_cast<int>(y) + 1;
    classes.push_back({label, frame.features.select_rows(std::span<const std::size_t>(idx).first(per_class_train))});
    for (std::size_t k = per_class_train; k < per_class_train + per_class_test; ++k)
      out.test.append(frame.features.row(idx[k]), label);
  }
  out.train = TrainingSet(std::move(classes));
  return out;
}

/// Per-feature affine map fitted on training rows.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const TrainingSet& train) {
    const std::size_t d = train.dimension();
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    const auto n = static_cast<double>(train.total_size());
    for (const auto& cls : train.classes())
      for (std::size_t i = 0; i < cls.samples.rows(); ++i)
        for (std::size_t j = 0; j < d; ++j) s.mean[j] += cls.samples(i, j);
    for (double& m : s.mean) m /= n;
    std::vector<double> ss(d, 0.0);
    for (const auto& cls : train.classes())
      for (std::size_t i = 0; i < cls.samples.rows(); ++i)
        for (std::size_t j = 0; j < d; ++j) ss[j] += (cls.samples(i, j) - s.mean[j]) * (cls.samples(i, j) - s.mean[j]);
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = n > 1 ? std::sqrt(ss[j] / (n - 1.0)) : 0.0;
      s.scale[j] = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  Matrix apply(const Matrix& m) const {
    Matrix out = m;
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = (out(i, j) - mean[j]) / scale[j];
    return out;
  }

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

inline SplitData standardize(const SplitData& data, const Standardizer& s) {
  SplitData out;
  out.label_names = data.label_names;
  std::vector<LabeledClass> classes;
  for (const auto& cls : data.train.classes()) classes.push_back({cls.label, s.apply(cls.samples)});
  out.train = TrainingSet(std::move(classes));
  out.test.features = s.apply(data.test.features);
  out.test.labels = data.test.labels;
  return out;
}

/// Split, augment and (optionally) standardise according to the manifest.
inline SplitData prepare_split(const LabeledFrame& frame, const DatasetManifest& m, std::uint64_t trial_seed) {
  auto split = stratified_split(frame, m.split.per_class_train, m.split.per_class_test, trial_seed);
  if (m.noise_augment > 0) split = augment_noise(split, m.noise_augment, derive_seed(trial_seed, 0xA0157ULL));
  if (m.standardize) split = standardize(split, Standardizer::fit(split.train));
  return split;
}

/// Writes `x1,...,xd,label` CSV with 17-significant-digit floats.
inline void write_labeled_csv(std::ostream& out, const Matrix& features, std::span<const int> labels) {
  for (std::size_t j = 0; j < features.cols(); ++j) out << 'x' << (j + 1) << ',';
  out << "label\n";
  for (std::size_t i = 0; i < features.rows(); ++i) {
    for (std::size_t j = 0; j < features.cols(); ++j) out << format_double(features(i, j)) << ',';
    out << labels[i] << '\n';
  }
}

inline void write_labeled_csv(std::ostream& out, const TrainingSet& train) {
  Matrix features;
  std::vector<int> labels;
  for (const auto& cls : train.classes()) {
    features.append_rows(cls.samples);
    labels.insert(labels.end(), cls.samples.rows(), cls.label);
  }
  write_labeled_csv(out, features, labels);
}

}  // namespace kderodeo
