// kderodeo: batch front end for the Rodeo KDE classifier.
//
//   kderodeo bench ex1 --trials 10 --out r/
//   kderodeo features ex2 --groups 1,2
//   kderodeo plan ex2 --epsilon-star 0.05 --out plan/
//   kderodeo fit manifest --manifest frogs.json --out model.json
//   kderodeo predict --model model.json --input queries.csv --out preds.csv
//   kderodeo gen ex1 --out data/
//
// Exit codes: 0 success, 1 runtime failure, 2 bad arguments or schema.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kderodeo/kderodeo.hpp"

namespace fs = std::filesystem;
using namespace kderodeo;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Options {
  std::string experiment;
  double c0 = 1.0;
  double beta = 0.9;
  double tau0 = -1.0;
  double cn = 1.0;
  std::size_t trials = 1;
  std::optional<std::size_t> train;
  std::optional<std::size_t> test;
  std::uint64_t seed = 42;
  std::string groups = "1,2,3,4,5";
  std::size_t group_count = 2;
  std::string ex3_combination = "lexicographic";
  std::string manifest;
  std::string out;
  std::size_t noise = 0;
  double epsilon_star = 0.1;
  std::size_t n0 = 50;
  double n_add_frac = 0.1;
  std::size_t max_rounds = 50;
  std::string priors = "uniform";
  unsigned threads = 0;
  bool standardize = false;
  std::string model;
  std::string input;
};

std::set<int> parse_groups(const std::string& text) {
  std::set<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = parse_double(item);
    if (!v || *v != static_cast<int>(*v)) throw UsageError("--groups: '" + item + "' is not an integer");
    out.insert(static_cast<int>(*v));
  }
  return out;
}

RodeoConfig rodeo_from(const Options& o) {
  RodeoConfig c;
  c.c0 = o.c0;
  c.shrink_factor = o.beta;
  c.tau0 = o.tau0;
  c.cn_multiplier = o.cn;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

std::optional<DatasetManifest> manifest_from(const Options& o) {
  if (o.manifest.empty()) return std::nullopt;
  try {
    return load_manifest(o.manifest);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(o.manifest + ": " + e.what());
  }
}

/// Resolves the experiment flags into a spec, filling per-design defaults.
ExperimentSpec spec_from(const Options& o) {
  ExperimentSpec s;
  try {
    s.kind = experiment_kind_from_string(o.experiment);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  s.rodeo = rodeo_from(o);
  try {
    s.priors = priors_from_string(o.priors);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  s.noise = o.noise;
  s.standardize = o.standardize;
  switch (s.kind) {
    case ExperimentKind::ex1:
      s.n_train = o.train.value_or(150);
      s.n_test = o.test.value_or(100);
      if (s.n_train + s.n_test > kEx1PoolSize)
        throw UsageError("ex1: --train + --test must not exceed " + std::to_string(kEx1PoolSize));
      break;
    case ExperimentKind::ex2:
      s.n_train = o.train.value_or(200);
      s.n_test = o.test.value_or(kEx2DefaultTest);
      s.groups = parse_groups(o.groups);
      if (s.groups.size() < 2) throw UsageError("ex2: --groups needs at least two groups");
      for (int g : s.groups)
        if (g < 1 || g > static_cast<int>(kEx2Groups)) throw UsageError("ex2: groups must lie in 1..5");
      break;
    case ExperimentKind::ex3:
      s.n_train = o.train.value_or(50);
      s.n_test = o.test.value_or(kEx2DefaultTest);
      if (o.group_count < 2 || o.group_count > kEx2Groups) throw UsageError("ex3: --group-count must be 2..5");
      s.group_count = o.group_count;
      s.ex3_combination =
          o.ex3_combination == "table" ? Ex3Combination::table_first : Ex3Combination::lexicographic_first;
      break;
    case ExperimentKind::manifest:
      s.manifest = manifest_from(o);
      if (!s.manifest) throw UsageError("manifest experiment requires --manifest");
      if (o.train) s.manifest->split.per_class_train = *o.train;
      if (o.test) s.manifest->split.per_class_test = *o.test;
      if (o.noise == 0) s.noise = s.manifest->noise_augment;
      s.standardize = o.standardize || s.manifest->standardize;
      break;
  }
  if (s.n_train < kMinClassSize && s.kind != ExperimentKind::manifest)
    throw UsageError("--train must be at least " + std::to_string(kMinClassSize));
  if (s.n_test == 0 && s.kind != ExperimentKind::manifest) throw UsageError("--test must be positive");
  return s;
}

void print_config(const std::string& command, const Options& o, const ExperimentSpec* spec) {
  nlohmann::json j;
  j["command"] = command;
  j["seed"] = o.seed;
  j["threads"] = resolve_threads(o.threads);
  j["trials"] = o.trials;
  if (spec != nullptr) {
    j["experiment"] = to_string(spec->kind);
    j["n_train"] = spec->kind == ExperimentKind::manifest ? spec->manifest->split.per_class_train : spec->n_train;
    j["n_test"] = spec->kind == ExperimentKind::manifest ? spec->manifest->split.per_class_test : spec->n_test;
    if (spec->kind == ExperimentKind::ex2) j["groups"] = spec->groups;
    if (spec->kind == ExperimentKind::ex3) {
      j["group_count"] = spec->group_count;
      j["groups"] = ex3_groups(spec->group_count, spec->ex3_combination);
    }
    if (spec->manifest) j["manifest"] = manifest_to_json(*spec->manifest);
    j["noise"] = spec->noise;
    j["standardize"] = spec->standardize;
    j["rodeo"] = rodeo_config_to_json(spec->rodeo);
    j["priors"] = to_string(spec->priors);
  }
  std::cout << "config " << j.dump() << '\n';
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string metric_line(const std::string& name, const MetricSummary& m) {
  return name + " " + fmt(m.mean) + (m.std ? " (" + fmt(*m.std) + ")" : std::string());
}

int cmd_bench(const Options& o) {
  if (o.trials == 0) throw UsageError("--trials must be >= 1");
  const auto spec = spec_from(o);
  print_config("bench", o, &spec);
  const auto agg = run_experiment(spec, o.trials, o.seed, o.threads);
  std::cout << "experiment " << agg.experiment << " trials " << agg.trials.size() << '\n';
  std::cout << metric_line("accuracy", agg.accuracy) << '\n';
  std::cout << metric_line("precision", agg.precision) << '\n';
  std::cout << metric_line("specificity", agg.specificity) << '\n';
  double secs = 0.0;
  for (const auto& t : agg.trials) secs += t.wall_seconds;
  std::cout << "mean_wall_seconds " << fmt(secs / static_cast<double>(agg.trials.size()), 3) << '\n';
  if (!o.out.empty())
    for (const auto& f : emit_reports(agg, o.out)) std::cout << "wrote " << f.string() << '\n';
  return 0;
}

int cmd_features(const Options& o) {
  if (o.trials == 0) throw UsageError("--trials must be >= 1");
  const auto spec = spec_from(o);
  print_config("features", o, &spec);
  const auto agg = run_experiment(spec, o.trials, o.seed, o.threads);

  nlohmann::json report = nlohmann::json::array();
  for (std::size_t y = 0; y < agg.class_count; ++y) {
    const auto relevant = select_features(agg.mean_z_scores[y], spec.rodeo.tau0);
    std::vector<std::size_t> one_based;
    for (auto j : relevant) one_based.push_back(j + 1);
    const std::string name = y < agg.label_names.size() ? agg.label_names[y] : std::to_string(y + 1);
    report.push_back({{"class", name},
                      {"label", y + 1},
                      {"mean_bandwidths", agg.mean_bandwidths[y]},
                      {"z_scores", agg.mean_z_scores[y]},
                      {"relevant", one_based}});
    std::cout << name << " relevant";
    for (auto j : one_based) std::cout << ' ' << j;
    std::cout << '\n';
  }
  if (o.out.empty()) {
    std::cout << report.dump(2) << '\n';
    return 0;
  }
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw std::runtime_error("cannot create " + o.out + ": " + ec.message());
  const fs::path dir(o.out);
  write_matrix_csv(dir / "feature_zscores.csv", agg.mean_z_scores, agg.label_names, 6);
  write_matrix_csv(dir / "feature_bandwidths.csv", agg.mean_bandwidths, agg.label_names, 6);
  write_json_file(dir / "features.json", report);
  for (const auto& f : emit_reports(agg, o.out)) std::cout << "wrote " << f.string() << '\n';
  for (const char* f : {"feature_zscores.csv", "feature_bandwidths.csv", "features.json"})
    std::cout << "wrote " << (dir / f).string() << '\n';
  return 0;
}

int cmd_plan(const Options& o) {
  PlannerConfig pc;
  pc.n0 = o.train.value_or(o.n0);
  pc.n_test = o.test.value_or(50);
  pc.epsilon_star = o.epsilon_star;
  pc.n_add_frac = o.n_add_frac;
  pc.max_rounds = o.max_rounds;
  pc.threads = o.threads;
  try {
    pc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto rodeo = rodeo_from(o);

  std::unique_ptr<SampleSource> source;
  nlohmann::json cfg{{"command", "plan"},       {"seed", o.seed},         {"threads", resolve_threads(o.threads)},
                     {"n0", pc.n0},             {"n_test", pc.n_test},    {"epsilon_star", pc.epsilon_star},
                     {"n_add_frac", pc.n_add_frac}, {"max_rounds", pc.max_rounds}, {"rodeo", rodeo_config_to_json(rodeo)},
                     {"priors", "proportional"}};
  if (o.experiment == "ex2") {
    const auto groups = parse_groups(o.groups);
    if (groups.size() < 2) throw UsageError("ex2: --groups needs at least two groups");
    for (int g : groups)
      if (g < 1 || g > static_cast<int>(kEx2Groups)) throw UsageError("ex2: groups must lie in 1..5");
    cfg["experiment"] = "ex2";
    cfg["groups"] = groups;
    source = std::make_unique<Ex2Source>(o.seed, groups);
  } else if (o.experiment == "manifest") {
    const auto m = manifest_from(o);
    if (!m) throw UsageError("manifest experiment requires --manifest");
    cfg["experiment"] = "manifest";
    cfg["manifest"] = manifest_to_json(*m);
    source = std::make_unique<FrameSource>(load_csv(*m), o.seed);
  } else {
    throw UsageError("plan supports ex2 or manifest, got '" + o.experiment + "'");
  }
  std::cout << "config " << cfg.dump() << '\n';

  const auto trace = run_planner(*source, pc, rodeo);
  for (const auto& s : trace.rounds) {
    std::cout << "round " << s.round << " N " << s.total << " epsilon " << format_double(s.epsilon, 6)
              << " accuracy " << fmt(s.accuracy) << " sizes";
    for (auto n : s.sizes) std::cout << ' ' << n;
    std::cout << '\n';
  }
  std::cout << "status " << to_string(trace.status) << '\n';
  std::cout << "final_sizes";
  for (auto n : trace.rounds.back().sizes) std::cout << ' ' << n;
  std::cout << '\n';
  if (!o.out.empty()) {
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec) throw std::runtime_error("cannot create " + o.out + ": " + ec.message());
    write_trace_jsonl(fs::path(o.out) / "trace.jsonl", trace);
    std::cout << "wrote " << (fs::path(o.out) / "trace.jsonl").string() << '\n';
  }
  return 0;
}

SplitData single_split(const ExperimentSpec& spec, std::uint64_t seed) {
  if (spec.kind == ExperimentKind::manifest) {
    const auto frame = load_csv(*spec.manifest);
    return make_trial_data(spec, seed, &frame);
  }
  return make_trial_data(spec, seed);
}

int cmd_fit(const Options& o) {
  if (o.out.empty()) throw UsageError("fit requires --out model.json");
  const auto spec = spec_from(o);
  print_config("fit", o, &spec);
  auto raw_spec = spec;
  raw_spec.standardize = false;
  auto data = single_split(raw_spec, o.seed);
  SavedModel m;
  m.config = spec.rodeo;
  m.priors = spec.priors;
  m.label_names = data.label_names;
  if (spec.standardize) {
    // Training rows are stored transformed; predict applies the same map to raw queries.
    m.standardization = Standardizer::fit(data.train);
    data = standardize(data, *m.standardization);
  }
  m.train = data.train;
  (void)Classifier::fit(m.train, m.config, m.priors);
  save_model(o.out, m);
  std::cout << "wrote " << o.out << " (c = " << m.train.class_count() << ", d = " << m.train.dimension()
            << ", n = " << m.train.total_size() << ")\n";
  return 0;
}

int cmd_predict(const Options& o) {
  if (o.model.empty()) throw UsageError("predict requires --model");
  if (o.input.empty()) throw UsageError("predict requires --input");
  const auto m = load_model(o.model);
  std::ifstream in(o.input);
  if (!in) throw std::runtime_error("cannot open " + o.input);
  Matrix queries = read_query_csv(in, m.train.dimension());
  if (m.standardization) queries = m.standardization->apply(queries);
  const auto clf = Classifier::fit(m.train, m.config, m.priors);

  nlohmann::json cfg{{"command", "predict"}, {"model", o.model}, {"input", o.input},
                     {"threads", resolve_threads(o.threads)}, {"d", m.train.dimension()},
                     {"c", m.train.class_count()}, {"rodeo", rodeo_config_to_json(m.config)},
                     {"priors", to_string(m.priors)}};
  std::cerr << "config " << cfg.dump() << '\n';

  const auto posts = clf.predict_batch(queries, o.threads);
  std::ofstream file;
  if (!o.out.empty()) {
    file.open(o.out, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + o.out);
  }
  std::ostream& out = o.out.empty() ? std::cout : file;
  out << "predicted";
  for (std::size_t y = 0; y < m.train.class_count(); ++y) out << ",p" << (y + 1);
  out << '\n';
  for (const auto& p : posts) {
    out << p.predicted;
    for (double v : p.posteriors) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed");
  return 0;
}

int cmd_gen(const Options& o) {
  if (o.out.empty()) throw UsageError("gen requires --out directory");
  const auto spec = spec_from(o);
  print_config("gen", o, &spec);
  const auto data = single_split(spec, o.seed);
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw std::runtime_error("cannot create " + o.out + ": " + ec.message());
  {
    std::ofstream f(fs::path(o.out) / "train.csv", std::ios::binary);
    write_labeled_csv(f, data.train);
    if (!f) throw std::runtime_error("write failed: " + (fs::path(o.out) / "train.csv").string());
  }
  {
    std::ofstream f(fs::path(o.out) / "test.csv", std::ios::binary);
    write_labeled_csv(f, data.test.features, data.test.labels);
    if (!f) throw std::runtime_error("write failed: " + (fs::path(o.out) / "test.csv").string());
  }
  std::cout << "wrote " << (fs::path(o.out) / "train.csv").string() << '\n';
  std::cout << "wrote " << (fs::path(o.out) / "test.csv").string() << '\n';
  return 0;
}

void add_rodeo_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--c0", o.c0, "initial bandwidth scale, h0 = c0 / ln ln n")->capture_default_str();
  cmd->add_option("--beta", o.beta, "bandwidth shrink factor in (0,1)")->capture_default_str();
  cmd->add_option("--tau0", o.tau0, "z-score cutpoint for relevant features")->capture_default_str();
  cmd->add_option("--cn", o.cn, "cn multiplier, cn = m * ln n")->capture_default_str();
  cmd->add_option("--threads", o.threads, "worker threads (0 = all)")->capture_default_str();
}

void add_experiment_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("experiment", o.experiment, "ex1 | ex2 | ex3 | manifest")->required();
  cmd->add_option("--trials", o.trials, "seeded trials")->capture_default_str();
  cmd->add_option("--train", o.train, "training rows per class");
  cmd->add_option("--test", o.test, "test rows per class");
  cmd->add_option("--seed", o.seed, "master seed")->capture_default_str();
  cmd->add_option("--groups", o.groups, "ex2 group subset, e.g. 3,5")->capture_default_str();
  cmd->add_option("--group-count", o.group_count, "ex3 number of groups")->capture_default_str();
  cmd->add_option("--ex3-combination", o.ex3_combination, "lexicographic | table")
      ->check(CLI::IsMember({"lexicographic", "table"}))
      ->capture_default_str();
  cmd->add_option("--manifest", o.manifest, "dataset manifest JSON");
  cmd->add_option("--out", o.out, "output location");
  cmd->add_option("--noise", o.noise, "standard-normal noise columns to append")->capture_default_str();
  cmd->add_option("--priors", o.priors, "uniform | proportional")
      ->check(CLI::IsMember({"uniform", "proportional"}))
      ->capture_default_str();
  cmd->add_flag("--standardize", o.standardize, "z-transform features using training statistics");
  add_rodeo_flags(cmd, o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rodeo kernel density classifier"};
  app.require_subcommand(1);
  Options o;

  auto* bench = app.add_subcommand("bench", "run seeded classification trials and write reports");
  add_experiment_flags(bench, o);
  auto* features = app.add_subcommand("features", "per-class z-scores and relevant feature sets");
  add_experiment_flags(features, o);
  auto* fit = app.add_subcommand("fit", "save a model built from one training split");
  add_experiment_flags(fit, o);
  auto* gen = app.add_subcommand("gen", "export one train/test split as CSV");
  add_experiment_flags(gen, o);

  auto* plan = app.add_subcommand("plan", "iterative per-class sample size planning");
  plan->add_option("experiment", o.experiment, "ex2 | manifest")->required();
  plan->add_option("--seed", o.seed, "master seed")->capture_default_str();
  plan->add_option("--groups", o.groups, "ex2 group subset")->capture_default_str();
  plan->add_option("--manifest", o.manifest, "dataset manifest JSON");
  plan->add_option("--out", o.out, "output directory for trace.jsonl");
  plan->add_option("--n0", o.n0, "initial rows per class")->capture_default_str();
  plan->add_option("--train", o.train, "alias of --n0");
  plan->add_option("--test", o.test, "held-out rows per class (default 50)");
  plan->add_option("--epsilon-star", o.epsilon_star, "target excess-risk bound")->capture_default_str();
  plan->add_option("--n-add-frac", o.n_add_frac, "growth fraction per round")->capture_default_str();
  plan->add_option("--max-rounds", o.max_rounds, "round limit")->capture_default_str();
  add_rodeo_flags(plan, o);

  auto* predict = app.add_subcommand("predict", "posterior probabilities for query rows");
  predict->add_option("--model", o.model, "model JSON from fit")->required();
  predict->add_option("--input", o.input, "query CSV with header")->required();
  predict->add_option("--out", o.out, "predictions CSV (default stdout)");
  predict->add_option("--threads", o.threads, "worker threads (0 = all)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*bench) return cmd_bench(o);
    if (*features) return cmd_features(o);
    if (*fit) return cmd_fit(o);
    if (*gen) return cmd_gen(o);
    if (*plan) return cmd_plan(o);
    if (*predict) return cmd_predict(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
