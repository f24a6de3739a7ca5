#pragma once

// Saved models. The classifier is memory based, so a model is the training
// data plus its configuration.
//
//   {"schema_version": 1, "d": 2, "c": 2,
//    "classes": [{"label": 1, "samples": [[...], ...]}, ...],
//    "config": {...}, "priors": "uniform",
//    "label_names": [...], "standardization": {"mean": [...], "scale": [...]}}
//
// Floats are written in shortest round-trip form, so load(save(m)) == m exactly.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kderodeo/classifier.hpp"
#include "kderodeo/dataset_io.hpp"
#include "kderodeo/rodeo.hpp"

namespace kderodeo {

inline constexpr int kModelSchemaVersion = 1;

/// Thrown for documents that parse but do not match the model schema.
class SchemaError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct SavedModel {
  TrainingSet train;
  RodeoConfig config;
  Priors priors = Priors::uniform;
  std::vector<std::string> label_names;
  std::optional<Standardizer> standardization;

  friend bool operator==(const SavedModel&, const SavedModel&) = default;
};

inline nlohmann::json rodeo_config_to_json(const RodeoConfig& c) {
  return {{"c0", c.c0},
          {"shrink_factor", c.shrink_factor},
          {"cn_multiplier", c.cn_multiplier},
          {"tau0", c.tau0},
          {"h_floor", c.h_floor},
          {"max_iters_per_dim", c.max_iters_per_dim}};
}

inline RodeoConfig rodeo_config_from_json(const nlohmann::json& j) {
  RodeoConfig c;
  c.c0 = j.value("c0", c.c0);
  c.shrink_factor = j.value("shrink_factor", c.shrink_factor);
  c.cn_multiplier = j.value("cn_multiplier", c.cn_multiplier);
  c.tau0 = j.value("tau0", c.tau0);
  c.h_floor = j.value("h_floor", c.h_floor);
  c.max_iters_per_dim = j.value("max_iters_per_dim", c.max_iters_per_dim);
  return c;
}

inline nlohmann::json model_to_json(const SavedModel& m) {
  nlohmann::json j;
  j["schema_version"] = kModelSchemaVersion;
  j["d"] = m.train.dimension();
  j["c"] = m.train.class_count();
  auto& classes = j["classes"] = nlohmann::json::array();
  for (const auto& cls : m.train.classes()) {
    auto rows = nlohmann::json::array();
    for (std::size_t i = 0; i < cls.samples.rows(); ++i) {
      auto r = cls.samples.row(i);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    classes.push_back({{"label", cls.label}, {"samples", std::move(rows)}});
  }
  j["config"] = rodeo_config_to_json(m.config);
  j["priors"] = to_string(m.priors);
  j["label_names"] = m.label_names;
  if (m.standardization)
    j["standardization"] = {{"mean", m.standardization->mean}, {"scale", m.standardization->scale}};
  return j;
}

inline SavedModel model_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw SchemaError("model: document is not an object");
    const int version = j.at("schema_version").get<int>();
    if (version != kModelSchemaVersion)
      throw SchemaError("model: unsupported schema_version " + std::to_string(version));
    const auto d = j.at("d").get<std::size_t>();
    const auto c = j.at("c").get<std::size_t>();

    std::vector<LabeledClass> classes;
    for (const auto& cls : j.at("classes")) {
      LabeledClass lc{cls.at("label").get<int>(), Matrix{}};
      for (const auto& row : cls.at("samples")) {
        const auto values = row.get<std::vector<double>>();
        if (values.size() != d)
          throw SchemaError("model: class " + std::to_string(lc.label) + " row has " +
                            std::to_string(values.size()) + " values, expected d = " + std::to_string(d));
        lc.samples.append_row(values);
      }
      classes.push_back(std::move(lc));
    }
    if (classes.size() != c)
      throw SchemaError("model: c = " + std::to_string(c) + " but " + std::to_string(classes.size()) +
                        " classes present");

    SavedModel m;
    try {
      m.train = TrainingSet(std::move(classes));
    } catch (const std::invalid_argument& e) {
      throw SchemaError(std::string("model: ") + e.what());
    }
    m.config = rodeo_config_from_json(j.at("config"));
    m.config.validate();
    m.priors = priors_from_string(j.value("priors", std::string("uniform")));
    if (j.contains("label_names")) m.label_names = j.at("label_names").get<std::vector<std::string>>();
    if (!m.label_names.empty() && m.label_names.size() != c)
      throw SchemaError("model: label_names has " + std::to_string(m.label_names.size()) + " entries, expected " +
                        std::to_string(c));
    if (j.contains("standardization")) {
      Standardizer s{j.at("standardization").at("mean").get<std::vector<double>>(),
                     j.at("standardization").at("scale").get<std::vector<double>>()};
      if (s.mean.size() != d || s.scale.size() != d)
        throw SchemaError("model: standardization length does not match d = " + std::to_string(d));
      m.standardization = std::move(s);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("model: ") + e.what());
  } catch (const SchemaError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("model: ") + e.what());
  }
}

inline void save_model(const std::filesystem::path& file, const SavedModel& m) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << model_to_json(m).dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

inline SavedModel load_model(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(file.string() + ": " + e.what());
  }
  return model_from_json(j);
}

/// Query rows from a headered CSV of numeric columns; a "label" column is ignored.
inline Matrix read_query_csv(std::istream& in, std::size_t expected_d) {
  const auto records = read_csv_records(in);
  Matrix out(0, expected_d);
  if (records.empty()) return out;
  const auto& header = records.front();
  std::vector<std::size_t> cols;
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] != "label") cols.push_back(k);
  if (cols.size() != expected_d)
    throw SchemaError("query has " + std::to_string(cols.size()) + " feature columns, expected d = " +
                      std::to_string(expected_d));
  std::vector<double> row(expected_d);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size())
      throw SchemaError("query row " + std::to_string(r + 1) + " has " + std::to_string(rec.size()) +
                        " fields, expected " + std::to_string(header.size()));
    for (std::size_t k = 0; k < expected_d; ++k) {
      const auto v = parse_double(rec[cols[k]]);
      if (!v) throw SchemaError("query row " + std::to_string(r + 1) + ": '" + rec[cols[k]] + "' is not a number");
      row[k] = *v;
    }
    out.append_row(row);
  }
  return out;
}

}  // namespace kderodeo
