/*
 * Copyright 2026 The gsnas Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "gsnas/experiment.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <functional>
#include <set>
#include <sstream>

#include "gsnas/io.h"
#include "gsnas/random.h"
#include "gsnas/stats.h"
#include "json.hpp"

namespace gsnas {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string JoinIssues(const std::vector<std::string>& issues) {
  std::string text = "invalid config:";
  for (const std::string& i : issues) text += "\n  " + i;
  return text;
}

// Reads the fields of one JSON object, collecting problems instead of
// stopping at the first one.
class Section {
 public:
  Section(const json& parent, const std::string& key,
          std::vector<std::string>* issues)
      : path_(key), issues_(issues) {
    if (!parent.contains(key)) return;
    if (!parent[key].is_object()) {
      Issue("", "must be an object");
      return;
    }
    obj_ = &parent[key];
  }

  Section(const json& root, std::vector<std::string>* issues)
      : obj_(&root), issues_(issues) {}

  ~Section() {
    if (obj_ == nullptr) return;
    for (auto it = obj_->begin(); it != obj_->end(); ++it) {
      if (!known_.count(it.key())) Issue(it.key(), "unknown key");
    }
  }

  void Known(const char* key) { known_.insert(key); }

  void Int(const char* key, int* out) {
    const json* v = Find(key);
    if (v == nullptr) return;
    if (!v->is_number_integer()) return Issue(key, "must be an integer");
    const auto x = v->get<long long>();
    if (x < -(1LL << 31) || x >= (1LL << 31)) return Issue(key, "out of range");
    *out = static_cast<int>(x);
  }

  void U64(const char* key, std::uint64_t* out) {
    const json* v = Find(key);
    if (v == nullptr) return;
    if (!v->is_number_unsigned()) {
      return Issue(key, "must be a non-negative integer");
    }
    *out = v->get<std::uint64_t>();
  }

  void Double(const char* key, double* out) {
    const json* v = Find(key);
    if (v == nullptr) return;
    if (!v->is_number()) return Issue(key, "must be a number");
    *out = v->get<double>();
  }

  template <typename T>
  void Enum(const char* key, T* out, T (*parse)(const std::string&)) {
    const json* v = Find(key);
    if (v == nullptr) return;
    if (!v->is_string()) return Issue(key, "must be a string");
    try {
      *out = parse(v->get<std::string>());
    } catch (const std::exception& e) {
      Issue(key, e.what());
    }
  }

  template <typename T>
  void EnumList(const char* key, std::vector<T>* out,
                T (*parse)(const std::string&)) {
    const json* v = Find(key);
    if (v == nullptr) return;
    if (!v->is_array()) return Issue(key, "must be an array of strings");
    std::vector<T> values;
    for (const json& item : *v) {
      if (!item.is_string()) return Issue(key, "must be an array of strings");
      try {
        values.push_back(parse(item.get<std::string>()));
      } catch (const std::exception& e) {
        return Issue(key, e.what());
      }
    }
    *out = std::move(values);
  }

  void BoolList(const char* key, std::vector<bool>* out) {
    const json* v = Find(key);
    if (v == nullptr) return;
    if (!v->is_array()) return Issue(key, "must be an array of booleans");
    std::vector<bool> values;
    for (const json& item : *v) {
      if (!item.is_boolean()) {
        return Issue(key, "must be an array of booleans");
      }
      values.push_back(item.get<bool>());
    }
    *out = std::move(values);
  }

 private:
  const json* Find(const char* key) {
    known_.insert(key);
    if (obj_ == nullptr || !obj_->contains(key)) return nullptr;
    return &(*obj_)[key];
  }

  void Issue(const std::string& key, const std::string& problem) {
    std::string field = path_;
    if (!key.empty()) field += (field.empty() ? "" : ".") + key;
    issues_->push_back(field + ": " + problem);
  }

  const json* obj_ = nullptr;
  std::string path_;
  std::vector<std::string>* issues_;
  std::set<std::string> known_;
};

LossKind ParseLoss(const std::string& s) { return ParseLossKind(s); }

std::string NowUtc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ordered_json SeedsJson(const Seeds& s) {
  return {{"root", s.root},
          {"dataset", Hex64(s.dataset)},
          {"train", Hex64(s.train)},
          {"bench_ids", Hex64(s.bench_ids)},
          {"metric_batch", Hex64(s.metric_batch)},
          {"metric_init", Hex64(s.metric_init)},
          {"select", Hex64(s.select)},
          {"verify", Hex64(s.verify)}};
}

fs::path ManifestPath(const fs::path& dir, const std::string& command) {
  return dir / (command + ".manifest.json");
}

fs::path FailedPath(const fs::path& dir, const std::string& command) {
  return dir / (command + ".FAILED");
}

bool UpToDate(const ExperimentConfig& config, const fs::path& dir,
              const std::string& command) {
  const fs::path manifest = ManifestPath(dir, command);
  if (!fs::exists(manifest)) return false;
  try {
    const json m = json::parse(ReadFile(manifest));
    if (m.at("config_hash") != ConfigHash(config) ||
        m.at("version") != kToolkitVersion) {
      return false;
    }
    for (const json& a : m.at("artifacts")) {
      if (!fs::exists(dir / a.get<std::string>())) return false;
    }
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

// Runs `body` with the skip, manifest and failure-marker protocol.
CommandResult RunCommand(const std::string& command,
                         const ExperimentConfig& config,
                         const RunOptions& options,
                         const std::function<CommandResult()>& body) {
  const std::vector<std::string> issues = ValidateConfig(config);
  if (!issues.empty()) throw ConfigError(issues);
  fs::create_directories(options.out_dir);
  if (!options.force && UpToDate(config, options.out_dir, command)) {
    CommandResult skipped;
    skipped.skipped = true;
    skipped.summary = command + ": outputs up to date (use --force to rerun)";
    return skipped;
  }
  fs::remove(ManifestPath(options.out_dir, command));
  CommandResult result;
  try {
    result = body();
  } catch (const std::exception& e) {
    WriteFileAtomic(FailedPath(options.out_dir, command),
                    std::string(e.what()) + "\n");
    throw;
  }
  ordered_json manifest = {
      {"command", command},
      {"version", kToolkitVersion},
      {"config_hash", ConfigHash(config)},
      {"seeds", SeedsJson(DeriveSeeds(config.seed))},
      {"artifacts", result.artifacts},
      {"config", ordered_json::parse(ConfigToJson(config))},
      {"created_utc", NowUtc()}};
  WriteFileAtomic(ManifestPath(options.out_dir, command),
                  manifest.dump(2) + "\n");
  fs::remove(FailedPath(options.out_dir, command));
  return result;
}

const char* kBenchCsv = "bench.csv";

BenchTable LoadBench(const ExperimentConfig& config, const fs::path& dir,
                     const Dataset& data) {
  const fs::path csv = dir / kBenchCsv;
  if (!fs::exists(csv)) {
    throw std::runtime_error(csv.string() +
                             " not found; run `gsnas bench build` first");
  }
  BenchTable bench = BenchTable::Load(csv);
  if (bench.dataset_fingerprint() != data.Fingerprint() ||
      bench.train_fingerprint() !=
          TrainFingerprint(ResolvedTrain(config), config.space)) {
    throw std::runtime_error(csv.string() +
                             " was built with a different dataset or train "
                             "config; rerun `gsnas bench build --force`");
  }
  if (bench.Ids() != BenchIds(config)) {
    throw std::runtime_error(csv.string() +
                             " holds a different architecture sample; rerun "
                             "`gsnas bench build --force`");
  }
  return bench;
}

MetricSpec MakeMetricSpec(const ExperimentConfig& config, MetricKind kind) {
  MetricSpec spec;
  spec.metric = kind;
  spec.loss = config.metric.loss;
  spec.zero_tol = config.metric.zero_tol;
  spec.num_inits = config.metric.num_inits;
  spec.space = config.space;
  spec.num_classes = config.dataset.num_classes;
  return spec;
}

Batch MetricBatch(const ExperimentConfig& config, const Dataset& data) {
  return data.TrainSample(static_cast<std::size_t>(config.metric.batch_size),
                          DeriveSeeds(config.seed).metric_batch);
}

std::vector<CellArch> Decode(const std::vector<int>& ids) {
  std::vector<CellArch> archs;
  for (int id : ids) archs.push_back(DecodeArch(id));
  return archs;
}

std::vector<MetricScore> ScoreIds(const ExperimentConfig& config,
                                  const Dataset& data, MetricKind kind,
                                  const std::vector<int>& ids, int workers) {
  return ScorePool(MakeMetricSpec(config, kind), Decode(ids),
                   MetricBatch(config, data), DeriveSeeds(config.seed).metric_init,
                   workers);
}

std::string Sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : std::runtime_error(JoinIssues(issues)), issues_(std::move(issues)) {}

ExperimentConfig ConfigFromJson(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("<file>: ") + e.what()});
  }
  if (!root.is_object()) throw ConfigError({"<file>: must be a JSON object"});
  ExperimentConfig c;
  std::vector<std::string> issues;
  {
    Section top(root, &issues);
    top.U64("seed", &c.seed);
    for (const char* key : {"dataset", "space", "train", "bench", "metric",
                            "select", "search", "verify"}) {
      top.Known(key);
    }
  }
  {
    Section s(root, "dataset", &issues);
    s.Enum("kind", &c.dataset.kind, &ParseDatasetKind);
    s.Int("num_samples", &c.dataset.num_samples);
    s.Int("dim", &c.dataset.dim);
    s.Int("num_classes", &c.dataset.num_classes);
    s.Double("noise", &c.dataset.noise);
    s.Double("spiral_turns", &c.dataset.spiral_turns);
  }
  {
    Section s(root, "space", &issues);
    s.Int("cell_width", &c.space.cell_width);
    s.Int("num_cells", &c.space.num_cells);
  }
  {
    Section s(root, "train", &issues);
    s.Double("lr", &c.train.lr);
    s.Double("momentum", &c.train.momentum);
    s.Int("epochs", &c.train.epochs);
    s.Int("batch_size", &c.train.batch_size);
    s.Double("weight_decay", &c.train.weight_decay);
  }
  {
    Section s(root, "bench", &issues);
    s.Int("num_archs", &c.bench.num_archs);
  }
  {
    Section s(root, "metric", &issues);
    s.EnumList("metrics", &c.metric.metrics, &ParseMetric);
    s.Int("batch_size", &c.metric.batch_size);
    s.Double("zero_tol", &c.metric.zero_tol);
    s.Int("num_inits", &c.metric.num_inits);
    s.Enum("loss", &c.metric.loss, &ParseLoss);
  }
  {
    Section s(root, "select", &issues);
    s.Int("n", &c.select.n);
    s.Int("runs", &c.select.runs);
  }
  {
    Section s(root, "search", &issues);
    SearchConfig& p = c.search.params;
    s.EnumList("algorithms", &c.search.algorithms, &ParseSearchAlgorithm);
    s.BoolList("assisted", &c.search.assisted);
    s.Int("runs", &c.search.runs);
    s.Double("budget", &p.budget);
    s.Int("pool_size", &p.pool_size);
    s.Int("population_size", &p.population_size);
    s.Int("sample_size", &p.sample_size);
    s.Double("lr", &p.lr);
    s.Double("baseline_decay", &p.baseline_decay);
    s.Int("b_min", &p.b_min);
    s.Int("b_max", &p.b_max);
    s.Int("eta", &p.eta);
  }
  {
    Section s(root, "verify", &issues);
    SweepOptions& o = c.verify.options;
    s.Int("instances", &c.verify.instances);
    s.Int("max_samples", &o.max_samples);
    int max_params = static_cast<int>(o.max_params);
    s.Int("max_params", &max_params);
    o.max_params = static_cast<std::size_t>(std::max(0, max_params));
    s.Int("holdout", &o.holdout);
    s.Int("max_steps", &o.max_steps);
    s.Double("tol", &o.tol);
    s.Int("probes", &o.probes);
    s.Double("delta", &o.delta);
  }
  for (std::string& issue : ValidateConfig(c)) {
    if (std::find(issues.begin(), issues.end(), issue) == issues.end()) {
      issues.push_back(std::move(issue));
    }
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return c;
}

std::string ConfigToJson(const ExperimentConfig& c) {
  ordered_json metrics = ordered_json::array();
  for (MetricKind k : c.metric.metrics) metrics.push_back(MetricName(k));
  ordered_json algorithms = ordered_json::array();
  for (SearchAlgorithm a : c.search.algorithms) {
    algorithms.push_back(SearchAlgorithmName(a));
  }
  ordered_json assisted = ordered_json::array();
  for (bool b : c.search.assisted) assisted.push_back(b);
  const SearchConfig& p = c.search.params;
  const SweepOptions& o = c.verify.options;
  const ordered_json j = {
      {"seed", c.seed},
      {"dataset",
       {{"kind", DatasetKindName(c.dataset.kind)},
        {"num_samples", c.dataset.num_samples},
        {"dim", c.dataset.dim},
        {"num_classes", c.dataset.num_classes},
        {"noise", c.dataset.noise},
        {"spiral_turns", c.dataset.spiral_turns}}},
      {"space",
       {{"cell_width", c.space.cell_width}, {"num_cells", c.space.num_cells}}},
      {"train",
       {{"lr", c.train.lr},
        {"momentum", c.train.momentum},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"weight_decay", c.train.weight_decay}}},
      {"bench", {{"num_archs", c.bench.num_archs}}},
      {"metric",
       {{"metrics", metrics},
        {"batch_size", c.metric.batch_size},
        {"zero_tol", c.metric.zero_tol},
        {"num_inits", c.metric.num_inits},
        {"loss", LossKindName(c.metric.loss)}}},
      {"select", {{"n", c.select.n}, {"runs", c.select.runs}}},
      {"search",
       {{"algorithms", algorithms},
        {"assisted", assisted},
        {"runs", c.search.runs},
        {"budget", p.budget},
        {"pool_size", p.pool_size},
        {"population_size", p.population_size},
        {"sample_size", p.sample_size},
        {"lr", p.lr},
        {"baseline_decay", p.baseline_decay},
        {"b_min", p.b_min},
        {"b_max", p.b_max},
        {"eta", p.eta}}},
      {"verify",
       {{"instances", c.verify.instances},
        {"max_samples", o.max_samples},
        {"max_params", o.max_params},
        {"holdout", o.holdout},
        {"max_steps", o.max_steps},
        {"tol", o.tol},
        {"probes", o.probes},
        {"delta", o.delta}}}};
  return j.dump(2) + "\n";
}

std::vector<std::string> ValidateConfig(const ExperimentConfig& c) {
  std::vector<std::string> issues;
  const auto check = [&](bool ok, const std::string& field,
                         const std::string& problem) {
    if (!ok) issues.push_back(field + ": " + problem);
  };
  const DatasetSpec& d = c.dataset;
  check(d.num_classes >= 2, "dataset.num_classes", "must be >= 2");
  check(d.num_samples >= 10 * d.num_classes, "dataset.num_samples",
        "must be >= 10 * num_classes");
  check(d.dim >= (d.kind == DatasetKind::kTwoSpirals ? 2 : 1), "dataset.dim",
        d.kind == DatasetKind::kTwoSpirals ? "must be >= 2 for two_spirals"
                                           : "must be >= 1");
  check(d.noise >= 0.0, "dataset.noise", "must be >= 0");
  check(d.spiral_turns > 0.0, "dataset.spiral_turns", "must be > 0");
  check(c.space.cell_width >= 1, "space.cell_width", "must be >= 1");
  check(c.space.num_cells >= 1, "space.num_cells", "must be >= 1");
  check(c.train.lr > 0.0, "train.lr", "must be > 0");
  check(c.train.momentum >= 0.0 && c.train.momentum < 1.0, "train.momentum",
        "must be in [0, 1)");
  check(c.train.epochs >= 1, "train.epochs", "must be >= 1");
  check(c.train.batch_size >= 1, "train.batch_size", "must be >= 1");
  check(c.train.weight_decay >= 0.0, "train.weight_decay", "must be >= 0");
  check(c.bench.num_archs >= 1 && c.bench.num_archs <= kSpaceSize,
        "bench.num_archs", "must be in [1, " + std::to_string(kSpaceSize) + "]");
  check(!c.metric.metrics.empty(), "metric.metrics", "must not be empty");
  // The training split holds 70% of the samples.
  check(c.metric.batch_size >= 2 &&
            c.metric.batch_size <= d.num_samples * 7 / 10,
        "metric.batch_size", "must be in [2, training split size]");
  check(c.metric.zero_tol >= 0.0, "metric.zero_tol", "must be >= 0");
  check(c.metric.num_inits >= 1, "metric.num_inits", "must be >= 1");
  check(c.select.n >= 1 && c.select.n <= c.bench.num_archs, "select.n",
        "must be in [1, bench.num_archs]");
  check(c.select.runs >= 1, "select.runs", "must be >= 1");
  const SearchConfig& p = c.search.params;
  check(!c.search.algorithms.empty(), "search.algorithms", "must not be empty");
  check(!c.search.assisted.empty(), "search.assisted", "must not be empty");
  check(c.search.runs >= 1, "search.runs", "must be >= 1");
  check(p.budget > 0.0, "search.budget", "must be > 0");
  check(p.pool_size >= 1, "search.pool_size", "must be >= 1");
  check(p.sample_size >= 1, "search.sample_size", "must be >= 1");
  check(p.population_size >= p.sample_size, "search.population_size",
        "must be >= sample_size");
  check(p.lr >= 0.0, "search.lr", "must be >= 0");
  check(p.baseline_decay >= 0.0 && p.baseline_decay < 1.0,
        "search.baseline_decay", "must be in [0, 1)");
  check(p.b_min >= 0, "search.b_min", "must be >= 0 (0 = automatic)");
  check(p.b_max >= 0 && p.b_max <= c.train.epochs, "search.b_max",
        "must be in [0, train.epochs] (0 = train.epochs)");
  check(p.b_min == 0 || p.b_max == 0 || p.b_min <= p.b_max, "search.b_min",
        "must be <= b_max");
  check(p.b_min == 0 || p.b_max > 0 || p.b_min <= c.train.epochs,
        "search.b_min", "must be <= train.epochs");
  check(p.eta >= 2, "search.eta", "must be >= 2");
  const SweepOptions& o = c.verify.options;
  check(c.verify.instances >= 0, "verify.instances", "must be >= 0");
  check(o.max_samples >= 2, "verify.max_samples", "must be >= 2");
  check(o.max_params >= 2, "verify.max_params", "must be >= 2");
  check(o.holdout >= 2, "verify.holdout", "must be >= 2");
  check(o.max_steps >= 1, "verify.max_steps", "must be >= 1");
  check(o.tol > 0.0, "verify.tol", "must be > 0");
  check(o.probes >= 1, "verify.probes", "must be >= 1");
  check(o.delta > 0.0 && o.delta < 1.0, "verify.delta", "must be in (0, 1)");
  return issues;
}

std::string ConfigHash(const ExperimentConfig& config) {
  return Hex64(Fnv1a64(ConfigToJson(config)));
}

std::uint64_t Seeds::SearchRun(SearchAlgorithm algorithm, int run) const {
  return DeriveSeed(root, "search/" + SearchAlgorithmName(algorithm) + "/" +
                              std::to_string(run));
}

Seeds DeriveSeeds(std::uint64_t root) {
  Seeds s;
  s.root = root;
  s.dataset = DeriveSeed(root, "dataset");
  s.train = DeriveSeed(root, "train");
  s.bench_ids = DeriveSeed(root, "bench/ids");
  s.metric_batch = DeriveSeed(root, "metric/batch");
  s.metric_init = DeriveSeed(root, "metric/init");
  s.select = DeriveSeed(root, "select");
  s.verify = DeriveSeed(root, "verify");
  return s;
}

DatasetSpec ResolvedDataset(const ExperimentConfig& config) {
  DatasetSpec d = config.dataset;
  d.seed = DeriveSeeds(config.seed).dataset;
  return d;
}

TrainConfig ResolvedTrain(const ExperimentConfig& config) {
  TrainConfig t = config.train;
  t.seed = DeriveSeeds(config.seed).train;
  return t;
}

std::vector<int> BenchIds(const ExperimentConfig& config) {
  Rng rng(DeriveSeeds(config.seed).bench_ids);
  std::set<int> ids;
  while (static_cast<int>(ids.size()) < config.bench.num_archs) {
    ids.insert(RandomArch(rng).id());
  }
  return {ids.begin(), ids.end()};
}

CommandResult RunBenchCommand(const ExperimentConfig& config,
                              const RunOptions& options) {
  return RunCommand("bench", config, options, [&] {
    const fs::path csv = options.out_dir / kBenchCsv;
    if (options.force) {
      for (const fs::path& p : {csv, BenchTable::SidecarPath(csv),
                                BenchTable::CurvesPath(csv)}) {
        fs::remove(p);
      }
    }
    const Dataset data = MakeSyntheticDataset(ResolvedDataset(config));
    const std::vector<int> ids = BenchIds(config);
    const BenchTable bench = BuildBench(config.space, ids, data,
                                        ResolvedTrain(config), options.workers,
                                        csv);
    std::size_t diverged = 0;
    for (int id : bench.Ids()) diverged += bench.Find(id)->diverged;
    CommandResult r;
    r.artifacts = {kBenchCsv, BenchTable::SidecarPath(csv).filename().string(),
                   BenchTable::CurvesPath(csv).filename().string()};
    r.summary = "bench: " + std::to_string(bench.size()) + " architectures (" +
                std::to_string(diverged) + " diverged) -> " + csv.string();
    return r;
  });
}

CommandResult RunScoreCommand(const ExperimentConfig& config,
                              const RunOptions& options) {
  return RunCommand("score", config, options, [&] {
    const Dataset data = MakeSyntheticDataset(ResolvedDataset(config));
    const std::vector<int> ids = BenchIds(config);
    std::string csv = "arch_id,metric,value,seed,batch_size,regularized,error\n";
    std::size_t failed = 0;
    for (MetricKind kind : config.metric.metrics) {
      for (const MetricScore& s :
           ScoreIds(config, data, kind, ids, options.workers)) {
        failed += !s.ok();
        csv += std::to_string(s.arch_id) + "," + s.metric + "," +
               FormatDouble(s.value) + "," + Hex64(s.seed) + "," +
               std::to_string(s.batch_size) + "," +
               (s.regularized ? "1" : "0") + "," + Sanitize(s.error) + "\n";
      }
    }
    WriteFileAtomic(options.out_dir / "scores.csv", csv);
    CommandResult r;
    r.artifacts = {"scores.csv"};
    r.summary = "score: " + std::to_string(ids.size()) + " architectures x " +
                std::to_string(config.metric.metrics.size()) + " metrics (" +
                std::to_string(failed) + " failed)";
    return r;
  });
}

CommandResult RunCorrelateCommand(const ExperimentConfig& config,
                                  const RunOptions& options) {
  return RunCommand("correlate", config, options, [&] {
    const Dataset data = MakeSyntheticDataset(ResolvedDataset(config));
    const BenchTable bench = LoadBench(config, options.out_dir, data);
    std::string csv = CorrelationCsvHeader();
    std::ostringstream summary;
    summary << "correlate:";
    for (MetricKind kind : config.metric.metrics) {
      const std::vector<MetricScore> scores =
          ScoreIds(config, data, kind, bench.Ids(), options.workers);
      const CorrelationReport report = Correlate(bench, scores);
      csv += CorrelationCsvRow(report);
      summary << "\n  " << report.metric << ": spearman "
              << FormatDouble(report.spearman_rho) << ", kendall "
              << FormatDouble(report.kendall_tau) << " (n=" << report.n << ")";
    }
    WriteFileAtomic(options.out_dir / "correlation.csv", csv);
    CommandResult r;
    r.artifacts = {"correlation.csv"};
    r.summary = summary.str();
    return r;
  });
}

CommandResult RunSelectCommand(const ExperimentConfig& config,
                               const RunOptions& options) {
  return RunCommand("select", config, options, [&] {
    const Dataset data = MakeSyntheticDataset(ResolvedDataset(config));
    const BenchTable bench = LoadBench(config, options.out_dir, data);
    std::string csv = SelectionCsvHeader();
    std::ostringstream summary;
    summary << "select (N=" << config.select.n << ", "
            << config.select.runs << " runs):";
    for (MetricKind kind : config.metric.metrics) {
      const std::vector<MetricScore> scores =
          ScoreIds(config, data, kind, bench.Ids(), options.workers);
      const SelectionReport report =
          BestOfNSelection(bench, scores, config.select.n, config.select.runs,
                           DeriveSeeds(config.seed).select);
      csv += SelectionCsvRows(report);
      summary << "\n  " << report.metric << ": test "
              << FormatDouble(report.selected.test_mean) << " (random "
              << FormatDouble(report.random.test_mean) << ", optimal "
              << FormatDouble(report.optimal.test_mean) << ")";
    }
    WriteFileAtomic(options.out_dir / "selection.csv", csv);
    CommandResult r;
    r.artifacts = {"selection.csv"};
    r.summary = summary.str();
    return r;
  });
}

CommandResult RunSearchCommand(const ExperimentConfig& config,
                               const RunOptions& options) {
  return RunCommand("search", config, options, [&] {
    const Dataset data = MakeSyntheticDataset(ResolvedDataset(config));
    const TrainConfig train = ResolvedTrain(config);
    BenchTable bench = LoadBench(config, options.out_dir, data);
    // Architectures trained on demand persist here between invocations.
    const fs::path cache = options.out_dir / "cache" / "search_bench.csv";
    if (fs::exists(cache) && fs::exists(BenchTable::SidecarPath(cache))) {
      BenchTable cached = BenchTable::Load(cache);
      if (cached.dataset_fingerprint() == bench.dataset_fingerprint() &&
          cached.train_fingerprint() == bench.train_fingerprint()) {
        for (int id : cached.Ids()) {
          if (!bench.Contains(id)) bench.Insert(*cached.Find(id));
        }
      }
    }
    const Seeds seeds = DeriveSeeds(config.seed);
    BenchEvaluator evaluator(std::move(bench), data, config.space, train,
                             MakeMetricSpec(config, MetricKind::kGradSign),
                             MetricBatch(config, data), seeds.metric_init);
    fs::create_directories(options.out_dir / "traces");
    CommandResult r;
    std::string results =
        "algorithm,assisted,run,arch_id,val_acc,test_acc,partial,events,"
        "cum_budget\n";
    std::vector<SearchSummary> summaries;
    for (SearchAlgorithm algorithm : config.search.algorithms) {
      for (bool assisted : config.search.assisted) {
        SearchConfig params = config.search.params;
        params.algorithm = algorithm;
        params.assisted = assisted;
        const std::string name = SearchAlgorithmName(algorithm);
        const std::string variant = (assisted ? "g_" : "") + name;
        std::vector<SearchTrace> traces;
        for (int run = 0; run < config.search.runs; ++run) {
          SearchTrace t =
              RunSearch(params, evaluator, seeds.SearchRun(algorithm, run));
          char file[64];
          std::snprintf(file, sizeof file, "traces/%s_%03d.csv",
                        variant.c_str(), run);
          WriteFileAtomic(options.out_dir / file,
                          TraceCsvHeader() + TraceCsv(t));
          r.artifacts.push_back(file);
          results += name + "," + (assisted ? "1" : "0") + "," +
                     std::to_string(run) + "," + std::to_string(t.final_arch) +
                     "," + FormatDouble(t.final_val) + "," +
                     FormatDouble(t.final_test) + "," +
                     (t.partial ? "1" : "0") + "," +
                     std::to_string(t.events.size()) + "," +
                     FormatDouble(t.events.empty()
                                      ? 0.0
                                      : t.events.back().cum_budget) +
                     "\n";
          traces.push_back(std::move(t));
        }
        summaries.push_back(Summarize(variant, assisted, traces));
      }
    }
    fs::create_directories(cache.parent_path());
    evaluator.bench().Save(cache);
    WriteFileAtomic(options.out_dir / "search_results.csv", results);
    WriteFileAtomic(options.out_dir / "search_summary.json",
                    SummaryJson(summaries));
    r.artifacts.push_back("search_results.csv");
    r.artifacts.push_back("search_summary.json");
    std::ostringstream summary;
    summary << "search (" << config.search.runs << " runs each):";
    for (const SearchSummary& s : summaries) {
      summary << "\n  " << s.algorithm << ": val "
              << FormatDouble(s.val_mean) << " +- " << FormatDouble(s.val_std)
              << ", test " << FormatDouble(s.test_mean);
    }
    summary << "\n  trained on demand: " << evaluator.trained();
    r.summary = summary.str();
    return r;
  });
}

CommandResult RunVerifyCommand(const ExperimentConfig& config,
                               const RunOptions& options) {
  return RunCommand("verify", config, options, [&] {
    const std::vector<InstanceResult> results =
        VerifySweep(config.verify.instances, DeriveSeeds(config.seed).verify,
                    config.verify.options, options.workers);
    std::string csv = VerifyCsvHeader();
    int converged = 0, holds = 0, pop = 0;
    for (const InstanceResult& res : results) {
      csv += VerifyCsvRow(res);
      if (!res.converged) continue;
      ++converged;
      holds += res.bounds.holds_n3;
      pop += res.bounds.pop_holds;
    }
    WriteFileAtomic(options.out_dir / "verify.csv", csv);
    CommandResult r;
    r.artifacts = {"verify.csv"};
    r.summary = "verify: " + std::to_string(results.size()) + " instances, " +
                std::to_string(converged) + " converged; n^3 bound holds on " +
                std::to_string(holds) + ", population bound on " +
                std::to_string(pop);
    return r;
  });
}

}  // namespace gsnas
