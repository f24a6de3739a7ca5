#pragma once

// Trial loops, classification metrics, aggregation across seeded trials and
// report emission.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kderodeo/classifier.hpp"
#include "kderodeo/dataset.hpp"
#include "kderodeo/dataset_io.hpp"
#include "kderodeo/feature_selection.hpp"
#include "kderodeo/planner.hpp"
#include "kderodeo/random.hpp"
#include "kderodeo/synthetic.hpp"

namespace kderodeo {

inline double accuracy(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("accuracy: length mismatch");
  if (truth.empty()) throw std::invalid_argument("accuracy: no labels");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == predicted[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// counts[t][p]: true class t+1 predicted as p+1.
struct ConfusionMatrix {
  std::vector<std::vector<std::size_t>> counts;

  static ConfusionMatrix build(std::span<const int> truth, std::span<const int> predicted, std::size_t classes) {
    if (truth.size() != predicted.size()) throw std::invalid_argument("confusion: length mismatch");
    ConfusionMatrix cm{std::vector<std::vector<std::size_t>>(classes, std::vector<std::size_t>(classes, 0))};
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] < 1 || predicted[i] < 1 || truth[i] > static_cast<int>(classes) ||
          predicted[i] > static_cast<int>(classes))
        throw std::invalid_argument("confusion: label outside 1.." + std::to_string(classes));
      ++cm.counts[truth[i] - 1][predicted[i] - 1];
    }
    return cm;
  }

  std::size_t total() const noexcept {
    std::size_t t = 0;
    for (const auto& row : counts)
      for (auto v : row) t += v;
    return t;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct MacroScores {
  double precision = 0.0;
  double specificity = 0.0;
};

/// One-vs-rest per class, macro averaged. Classes never predicted have no
/// precision and are left out of that average.
inline MacroScores macro_precision_specificity(const ConfusionMatrix& cm) {
  const std::size_t c = cm.counts.size();
  const std::size_t total = cm.total();
  double precision_sum = 0.0;
  std::size_t precision_n = 0;
  double specificity_sum = 0.0;
  std::size_t specificity_n = 0;
  for (std::size_t y = 0; y < c; ++y) {
    std::size_t tp = cm.counts[y][y];
    std::size_t fp = 0;
    std::size_t fn = 0;
    for (std::size_t k = 0; k < c; ++k) {
      if (k == y) continue;
      fp += cm.counts[k][y];
      fn += cm.counts[y][k];
    }
    const std::size_t tn = total - tp - fp - fn;
    if (tp + fp > 0) {
      precision_sum += static_cast<double>(tp) / static_cast<double>(tp + fp);
      ++precision_n;
    }
    if (tn + fp > 0) {
      specificity_sum += static_cast<double>(tn) / static_cast<double>(tn + fp);
      ++specificity_n;
    }
  }
  MacroScores s;
  s.precision = precision_n ? precision_sum / static_cast<double>(precision_n) : 0.0;
  s.specificity = specificity_n ? specificity_sum / static_cast<double>(specificity_n) : 0.0;
  return s;
}

/// Linear-interpolation quantile (the R type 7 / numpy default convention).
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// ---------------------------------------------------------------------------
// Experiments

enum class ExperimentKind { ex1, ex2, ex3, manifest };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::ex1: return "ex1";
    case ExperimentKind::ex2: return "ex2";
    case ExperimentKind::ex3: return "ex3";
    case ExperimentKind::manifest: return "manifest";
  }
  return "unknown";
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "ex1") return ExperimentKind::ex1;
  if (s == "ex2") return ExperimentKind::ex2;
  if (s == "ex3") return ExperimentKind::ex3;
  if (s == "manifest") return ExperimentKind::manifest;
  throw std::invalid_argument("unknown experiment '" + s + "' (expected ex1|ex2|ex3|manifest)");
}

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::ex1;
  std::size_t n_train = 150;
  std::size_t n_test = 100;
  std::set<int> groups{1, 2, 3, 4, 5};  // ex2
  std::size_t group_count = 2;          // ex3
  Ex3Combination ex3_combination = Ex3Combination::lexicographic_first;
  std::size_t noise = 0;
  bool standardize = false;
  std::optional<DatasetManifest> manifest;
  RodeoConfig rodeo;
  Priors priors = Priors::uniform;
};

/// Builds one trial's split. `frame` must be loaded for manifest experiments.
inline SplitData make_trial_data(const ExperimentSpec& spec, std::uint64_t trial_seed,
                                 const LabeledFrame* frame = nullptr) {
  SplitData data;
  switch (spec.kind) {
    case ExperimentKind::ex1: data = generate_ex1(trial_seed, spec.n_train, spec.n_test); break;
    case ExperimentKind::ex2: data = generate_ex2(trial_seed, spec.groups, spec.n_train, spec.n_test); break;
    case ExperimentKind::ex3:
      data = generate_ex3(trial_seed, spec.n_train, spec.group_count, spec.n_test, spec.ex3_combination);
      break;
    case ExperimentKind::manifest: {
      if (!spec.manifest || frame == nullptr) throw std::invalid_argument("manifest experiment without a dataset");
      auto m = *spec.manifest;
      m.noise_augment = spec.noise;
      m.standardize = spec.standardize;
      return prepare_split(*frame, m, trial_seed);
    }
  }
  if (spec.noise > 0) data = augment_noise(data, spec.noise, derive_seed(trial_seed, 0xA0157ULL));
  if (spec.standardize) data = standardize(data, Standardizer::fit(data.train));
  return data;
}

struct TrialResult {
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double specificity = 0.0;
  ConfusionMatrix confusion;
  std::vector<std::vector<double>> z_scores;         // class x dim
  std::vector<std::vector<double>> mean_bandwidths;  // class x dim
  std::vector<std::vector<std::size_t>> relevant_sets;
  double wall_seconds = 0.0;

  friend bool operator==(const TrialResult&, const TrialResult&) = default;
};

struct BoxStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
  friend bool operator==(const BoxStats&, const BoxStats&) = default;
};

struct MetricSummary {
  double mean = 0.0;
  std::optional<double> std;  // absent for a single trial
  friend bool operator==(const MetricSummary&, const MetricSummary&) = default;
};

struct TrialAggregate {
  std::string experiment;
  std::uint64_t seed = 0;
  std::size_t class_count = 0;
  std::size_t dimension = 0;
  std::vector<std::string> label_names;
  std::vector<TrialResult> trials;
  MetricSummary accuracy, precision, specificity;
  std::vector<std::vector<double>> mean_z_scores;
  std::vector<std::vector<double>> mean_bandwidths;
  std::vector<std::vector<BoxStats>> bandwidth_box;  // per-trial mean bandwidths across trials

  friend bool operator==(const TrialAggregate&, const TrialAggregate&) = default;
};

inline MetricSummary summarize_metric(std::span<const double> values) {
  MetricSummary s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

/// Recomputes every aggregate field from the trial list, in trial order.
inline void finalize_aggregate(TrialAggregate& agg) {
  if (agg.trials.empty()) throw std::invalid_argument("aggregate: no trials");
  std::vector<double> acc, prec, spec;
  for (const auto& t : agg.trials) {
    acc.push_back(t.accuracy);
    prec.push_back(t.precision);
    spec.push_back(t.specificity);
  }
  agg.accuracy = summarize_metric(acc);
  agg.precision = summarize_metric(prec);
  agg.specificity = summarize_metric(spec);

  const std::size_t c = agg.class_count;
  const std::size_t d = agg.dimension;
  const auto n = static_cast<double>(agg.trials.size());
  agg.mean_z_scores.assign(c, std::vector<double>(d, 0.0));
  agg.mean_bandwidths.assign(c, std::vector<double>(d, 0.0));
  agg.bandwidth_box.assign(c, std::vector<BoxStats>(d));
  for (std::size_t y = 0; y < c; ++y)
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<double> column;
      for (const auto& t : agg.trials) {
        agg.mean_z_scores[y][j] += t.z_scores[y][j];
        agg.mean_bandwidths[y][j] += t.mean_bandwidths[y][j];
        column.push_back(t.mean_bandwidths[y][j]);
      }
      agg.mean_z_scores[y][j] /= n;
      agg.mean_bandwidths[y][j] /= n;
      agg.bandwidth_box[y][j] = {quantile(column, 0.0), quantile(column, 0.25), quantile(column, 0.5),
                                 quantile(column, 0.75), quantile(column, 1.0)};
    }
}

/// Fits, predicts and summarises one split. Feature reports for class y aggregate
/// the class-y local bandwidths over the test points whose true label is y.
inline TrialResult run_trial(const SplitData& data, const RodeoConfig& rodeo, Priors priors, unsigned threads) {
  const auto start = std::chrono::steady_clock::now();
  const auto clf = Classifier::fit(data.train, rodeo, priors);
  const auto posts = clf.predict_batch(data.test.features, threads);
  const std::size_t c = clf.class_count();

  TrialResult r;
  std::vector<int> predicted(posts.size());
  for (std::size_t i = 0; i < posts.size(); ++i) predicted[i] = posts[i].predicted;
  r.accuracy = accuracy(data.test.labels, predicted);
  r.confusion = ConfusionMatrix::build(data.test.labels, predicted, c);
  const auto macro = macro_precision_specificity(r.confusion);
  r.precision = macro.precision;
  r.specificity = macro.specificity;

  for (std::size_t y = 0; y < c; ++y) {
    std::vector<BandwidthVector> bws;
    for (std::size_t i = 0; i < posts.size(); ++i)
      if (data.test.labels[i] == static_cast<int>(y) + 1) bws.push_back(posts[i].local_bandwidths[y]);
    if (bws.empty())
      throw std::invalid_argument("trial: class " + std::to_string(y + 1) + " has no test points");
    const auto summary = summarize_bandwidths(static_cast<int>(y) + 1, bws, rodeo.tau0);
    r.z_scores.push_back(summary.z_scores);
    r.mean_bandwidths.push_back(summary.mean_bandwidths);
    r.relevant_sets.push_back(summary.relevant_set);
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

inline std::string experiment_label(const ExperimentSpec& spec) {
  std::string name = to_string(spec.kind);
  if (spec.kind == ExperimentKind::ex2) {
    name += ":";
    for (int g : spec.groups) name += std::to_string(g);
  } else if (spec.kind == ExperimentKind::ex3) {
    name += ":" + std::to_string(spec.group_count) + "groups";
  } else if (spec.kind == ExperimentKind::manifest && spec.manifest) {
    name += ":" + spec.manifest->path.filename().string();
  }
  return name;
}

/// Trial t uses seed derive_seed(seed, t); trials run in order, each one
/// parallelised over its test points.
inline TrialAggregate run_experiment(const ExperimentSpec& spec, std::size_t trials, std::uint64_t seed,
                                     unsigned threads = 1) {
  if (trials == 0) throw std::invalid_argument("run_experiment: trials must be >= 1");
  spec.rodeo.validate();
  std::optional<LabeledFrame> frame;
  if (spec.kind == ExperimentKind::manifest) {
    if (!spec.manifest) throw std::invalid_argument("run_experiment: manifest experiment needs a manifest");
    frame = load_csv(*spec.manifest);
  }

  TrialAggregate agg;
  agg.experiment = experiment_label(spec);
  agg.seed = seed;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::uint64_t trial_seed = derive_seed(seed, t);
    const auto data = make_trial_data(spec, trial_seed, frame ? &*frame : nullptr);
    auto result = run_trial(data, spec.rodeo, spec.priors, threads);
    result.seed = trial_seed;
    if (t == 0) {
      agg.class_count = data.train.class_count();
      agg.dimension = data.train.dimension();
      agg.label_names = data.label_names;
    }
    agg.trials.push_back(std::move(result));
  }
  finalize_aggregate(agg);
  return agg;
}

// ---------------------------------------------------------------------------
// Serialisation

inline nlohmann::json metric_to_json(const MetricSummary& m) {
  nlohmann::json j{{"mean", m.mean}};
  j["std"] = m.std ? nlohmann::json(*m.std) : nlohmann::json(nullptr);
  return j;
}

inline MetricSummary metric_from_json(const nlohmann::json& j) {
  MetricSummary m;
  m.mean = j.at("mean").get<double>();
  if (!j.at("std").is_null()) m.std = j.at("std").get<double>();
  return m;
}

/// metrics.json content. Wall times are kept out so reports are reproducible
/// byte-for-byte; they live in timing.json.
inline nlohmann::json aggregate_to_json(const TrialAggregate& agg) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["experiment"] = agg.experiment;
  j["seed"] = agg.seed;
  j["class_count"] = agg.class_count;
  j["dimension"] = agg.dimension;
  j["label_names"] = agg.label_names;
  j["accuracy"] = metric_to_json(agg.accuracy);
  j["precision"] = metric_to_json(agg.precision);
  j["specificity"] = metric_to_json(agg.specificity);
  j["mean_z_scores"] = agg.mean_z_scores;
  j["mean_bandwidths"] = agg.mean_bandwidths;
  auto& trials = j["trials"] = nlohmann::json::array();
  for (const auto& t : agg.trials) {
    trials.push_back({{"seed", t.seed},
                      {"accuracy", t.accuracy},
                      {"precision", t.precision},
                      {"specificity", t.specificity},
                      {"confusion", t.confusion.counts},
                      {"z_scores", t.z_scores},
                      {"mean_bandwidths", t.mean_bandwidths},
                      {"relevant_sets", t.relevant_sets}});
  }
  return j;
}

inline TrialAggregate aggregate_from_json(const nlohmann::json& j, const nlohmann::json* timing = nullptr) {
  if (j.at("schema_version").get<int>() != 1) throw std::invalid_argument("metrics.json: unsupported schema");
  TrialAggregate agg;
  agg.experiment = j.at("experiment").get<std::string>();
  agg.seed = j.at("seed").get<std::uint64_t>();
  agg.class_count = j.at("class_count").get<std::size_t>();
  agg.dimension = j.at("dimension").get<std::size_t>();
  agg.label_names = j.at("label_names").get<std::vector<std::string>>();
  for (const auto& t : j.at("trials")) {
    TrialResult r;
    r.seed = t.at("seed").get<std::uint64_t>();
    r.accuracy = t.at("accuracy").get<double>();
    r.precision = t.at("precision").get<double>();
    r.specificity = t.at("specificity").get<double>();
    r.confusion.counts = t.at("confusion").get<std::vector<std::vector<std::size_t>>>();
    r.z_scores = t.at("z_scores").get<std::vector<std::vector<double>>>();
    r.mean_bandwidths = t.at("mean_bandwidths").get<std::vector<std::vector<double>>>();
    r.relevant_sets = t.at("relevant_sets").get<std::vector<std::vector<std::size_t>>>();
    agg.trials.push_back(std::move(r));
  }
  if (timing != nullptr) {
    const auto secs = timing->at("wall_seconds").get<std::vector<double>>();
    if (secs.size() != agg.trials.size()) throw std::invalid_argument("timing.json: trial count mismatch");
    for (std::size_t t = 0; t < secs.size(); ++t) agg.trials[t].wall_seconds = secs[t];
  }
  finalize_aggregate(agg);
  return agg;
}

inline void write_matrix_csv(const std::filesystem::path& file, const std::vector<std::vector<double>>& rows,
                             const std::vector<std::string>& row_names, int significant) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "class";
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  for (std::size_t j = 0; j < d; ++j) out << ",x" << (j + 1);
  out << '\n';
  for (std::size_t y = 0; y < rows.size(); ++y) {
    out << (y < row_names.size() ? row_names[y] : std::to_string(y + 1));
    for (double v : rows[y]) out << ',' << format_double(v, significant);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

inline void write_json_file(const std::filesystem::path& file, const nlohmann::json& j) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

inline nlohmann::json planner_state_to_json(const PlannerState& s) {
  return {{"round", s.round}, {"N", s.total},      {"sizes", s.sizes},       {"epsilon", s.epsilon},
          {"A", s.A_hat},     {"B", s.B_hat},      {"r_hat", s.r_hat},       {"k", s.k_constants},
          {"accuracy", s.accuracy}, {"dropped_points", s.dropped_points}};
}

inline void write_trace_jsonl(const std::filesystem::path& file, const PlannerTrace& trace) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  for (const auto& s : trace.rounds) out << planner_state_to_json(s).dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

/// Writes metrics.json, zscores.csv, mean_bandwidths.csv, bandwidth_boxplot.csv
/// and timing.json; trace.jsonl as well when a planner trace is given.
inline std::vector<std::filesystem::path> emit_reports(const TrialAggregate& agg, const std::filesystem::path& dir,
                                                       const PlannerTrace* trace = nullptr) {
  if (agg.trials.empty()) throw std::invalid_argument("emit_reports: empty aggregate");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  write_json_file(dir / "metrics.json", aggregate_to_json(agg));
  written.push_back(dir / "metrics.json");
  write_matrix_csv(dir / "zscores.csv", agg.mean_z_scores, agg.label_names, 17);
  written.push_back(dir / "zscores.csv");
  write_matrix_csv(dir / "mean_bandwidths.csv", agg.mean_bandwidths, agg.label_names, 17);
  written.push_back(dir / "mean_bandwidths.csv");

  {
    const auto file = dir / "bandwidth_boxplot.csv";
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << "class,dimension,min,q1,median,q3,max\n";
    for (std::size_t y = 0; y < agg.bandwidth_box.size(); ++y)
      for (std::size_t j = 0; j < agg.bandwidth_box[y].size(); ++j) {
        const auto& b = agg.bandwidth_box[y][j];
        out << (y < agg.label_names.size() ? agg.label_names[y] : std::to_string(y + 1)) << ',' << (j + 1) << ','
            << format_double(b.min) << ',' << format_double(b.q1) << ',' << format_double(b.median) << ','
            << format_double(b.q3) << ',' << format_double(b.max) << '\n';
      }
    if (!out) throw std::runtime_error("write failed: " + file.string());
    written.push_back(file);
  }

  nlohmann::json timing;
  std::vector<double> secs;
  for (const auto& t : agg.trials) secs.push_back(t.wall_seconds);
  timing["wall_seconds"] = secs;
  write_json_file(dir / "timing.json", timing);
  written.push_back(dir / "timing.json");

  if (trace != nullptr) {
    write_trace_jsonl(dir / "trace.jsonl", *trace);
    written.push_back(dir / "trace.jsonl");
  }
  return written;
}

/// Reads metrics.json (and timing.json when present) back into an aggregate.
inline TrialAggregate read_reports(const std::filesystem::path& dir) {
  std::ifstream in(dir / "metrics.json");
  if (!in) throw std::runtime_error("cannot open " + (dir / "metrics.json").string());
  const auto j = nlohmann::json::parse(in);
  std::ifstream tin(dir / "timing.json");
  if (tin) {
    const auto t = nlohmann::json::parse(tin);
    return aggregate_from_json(j, &t);
  }
  return aggregate_from_json(j);
}

}  // namespace kderodeo
