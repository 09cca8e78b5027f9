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

#include "gsnas/trainer.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "gsnas/io.h"
#include "gsnas/random.h"
#include "json.hpp"

namespace gsnas {
namespace {

// Blob centres sit on a circle of this radius in the first two dims.
constexpr double kBlobRadius = 3.0;

// Reference device for simulated costs.
constexpr double kReferenceMacsPerSecond = 1.0e8;
constexpr double kTrainingOverheadSeconds = 0.5;

void ShuffleInPlace(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[UniformIndex(rng, i)]);
  }
}

std::uint64_t HashDoubles(std::span<const double> xs, std::uint64_t h) {
  for (double x : xs) {
    char bytes[sizeof(double)];
    std::memcpy(bytes, &x, sizeof(double));
    h = Fnv1a64(std::string_view(bytes, sizeof(bytes)), h);
  }
  return h;
}

template <typename Int>
std::uint64_t HashInts(std::span<const Int> xs, std::uint64_t h) {
  for (Int x : xs) {
    const std::int64_t wide = static_cast<std::int64_t>(x);
    char bytes[sizeof(wide)];
    std::memcpy(bytes, &wide, sizeof(wide));
    h = Fnv1a64(std::string_view(bytes, sizeof(bytes)), h);
  }
  return h;
}

}  // namespace

std::string DatasetKindName(DatasetKind kind) {
  return kind == DatasetKind::kGaussianBlobs ? "gaussian_blobs" : "two_spirals";
}

DatasetKind ParseDatasetKind(const std::string& name) {
  if (name == "gaussian_blobs") return DatasetKind::kGaussianBlobs;
  if (name == "two_spirals") return DatasetKind::kTwoSpirals;
  throw std::invalid_argument("unknown dataset kind '" + name + "'");
}

Batch Dataset::Subset(std::span<const std::size_t> rows) const {
  Batch all{inputs, labels};
  return all.Select(rows);
}

Batch Dataset::TrainSample(std::size_t count, std::uint64_t seed) const {
  if (count < 1 || count > train.size()) {
    throw std::invalid_argument("sample of " + std::to_string(count) +
                                " rows from a training split of " +
                                std::to_string(train.size()));
  }
  std::vector<std::size_t> rows = train;
  Rng rng(seed);
  ShuffleInPlace(rows, rng);
  rows.resize(count);
  return Subset(rows);
}

std::string Dataset::Fingerprint() const {
  std::uint64_t h = Fnv1a64(DatasetKindName(spec.kind));
  h = HashDoubles(inputs.data(), h);
  h = HashInts<int>(labels, h);
  h = HashInts<std::size_t>(train, h);
  h = HashInts<std::size_t>(val, h);
  h = HashInts<std::size_t>(test, h);
  return Hex64(h);
}

Dataset MakeSyntheticDataset(const DatasetSpec& spec) {
  if (spec.num_classes < 2) {
    throw std::invalid_argument("need at least two classes");
  }
  if (spec.num_samples < 10 * spec.num_classes) {
    throw std::invalid_argument(
        "num_samples must be at least 10 per class for a balanced split");
  }
  if (!(spec.spiral_turns > 0.0)) {
    throw std::invalid_argument("spiral_turns must be > 0");
  }
  if (spec.dim < 1 || (spec.kind == DatasetKind::kTwoSpirals && spec.dim < 2)) {
    throw std::invalid_argument("dataset dimension too small for its kind");
  }
  if (spec.noise < 0.0) throw std::invalid_argument("noise must be >= 0");

  Rng rng(DeriveSeed(spec.seed, "dataset/points"));
  const std::size_t n = spec.num_samples;
  const std::size_t d = spec.dim;
  const int k = spec.num_classes;
  std::vector<double> x(n * d, 0.0);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % k);
    y[i] = c;
    double* p = x.data() + i * d;
    const double phase = 2.0 * std::numbers::pi * c / k;
    if (spec.kind == DatasetKind::kTwoSpirals) {
      const double t = Uniform01(rng);
      const double angle = phase + 2.0 * std::numbers::pi * spec.spiral_turns * t;
      p[0] = t * std::cos(angle);
      p[1] = t * std::sin(angle);
    } else if (d == 1) {
      p[0] = kBlobRadius * c;
    } else {
      p[0] = kBlobRadius * std::cos(phase);
      p[1] = kBlobRadius * std::sin(phase);
    }
    for (std::size_t j = 0; j < d; ++j) p[j] += spec.noise * StandardNormal(rng);
  }

  Dataset data;
  data.spec = spec;
  data.inputs = Tensor({n, d}, std::move(x));
  data.labels = std::move(y);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng split_rng(DeriveSeed(spec.seed, "dataset/split"));
  ShuffleInPlace(order, split_rng);
  const std::size_t n_train = n * 70 / 100;
  const std::size_t n_val = n * 15 / 100;
  data.train.assign(order.begin(), order.begin() + n_train);
  data.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  data.test.assign(order.begin() + n_train + n_val, order.end());
  return data;
}

std::string TrainFingerprint(const TrainConfig& config,
                             const SearchSpaceSpec& space) {
  std::ostringstream s;
  s << "lr=" << FormatDouble(config.lr)
    << ";momentum=" << FormatDouble(config.momentum)
    << ";epochs=" << config.epochs << ";batch=" << config.batch_size
    << ";wd=" << FormatDouble(config.weight_decay) << ";seed=" << config.seed
    << ";width=" << space.cell_width << ";cells=" << space.num_cells;
  return Hex64(Fnv1a64(s.str()));
}

EpochRecord TrainedResult::AtBudget(int epochs) const {
  const int limit = std::min<int>(epochs, static_cast<int>(curve.size()));
  if (limit <= 0) return EpochRecord{train_loss, val_acc, test_acc};
  int best = 0;
  for (int e = 1; e < limit; ++e) {
    if (curve[e].val_acc > curve[best].val_acc) best = e;
  }
  return curve[best];
}

double Accuracy(const Network& net, const ParamVector& theta,
                const Batch& batch) {
  const ForwardTape tape = RunForward(net, theta, batch.inputs);
  const auto& ids = std::get<std::vector<int>>(batch.labels);
  const std::size_t o = net.output_dim();
  std::span<const double> out = tape.output();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < tape.batch; ++i) {
    const double* row = out.data() + i * o;
    std::size_t best = 0;
    bool finite = std::isfinite(row[0]);
    for (std::size_t k = 1; k < o; ++k) {
      finite = finite && std::isfinite(row[k]);
      if (row[k] > row[best]) best = k;
    }
    if (finite && static_cast<int>(best) == ids[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(tape.batch);
}

double SimulatedTrainingCost(const Network& net, const Dataset& data,
                             int epochs) {
  const double macs = static_cast<double>(net.forward_macs());
  const double per_epoch =
      (3.0 * macs * data.train.size() +
       macs * (data.val.size() + data.test.size())) /
      kReferenceMacsPerSecond;
  return kTrainingOverheadSeconds + epochs * per_epoch;
}

double SimulatedScoringCost(const Network& net, std::size_t batch_size) {
  return 3.0 * static_cast<double>(net.forward_macs()) * batch_size /
         kReferenceMacsPerSecond;
}

TrainedResult Train(const Network& net, ParamVector theta0,
                    const Dataset& data, const TrainConfig& config) {
  if (!(config.lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (config.batch_size < 1) {
    throw std::invalid_argument("batch_size must be >= 1");
  }
  const auto start = std::chrono::steady_clock::now();
  const Batch val = data.Subset(data.val);
  const Batch test = data.Subset(data.test);

  const ParamVector init = theta0;
  ParamVector theta = std::move(theta0);
  std::vector<double> velocity(theta.size(), 0.0);
  std::vector<std::size_t> order = data.train;
  Rng rng(DeriveSeed(config.seed, "train/shuffle"));

  TrainedResult result;
  const std::size_t bs = config.batch_size;
  for (int epoch = 0; epoch < config.epochs && !result.diverged; ++epoch) {
    ShuffleInPlace(order, rng);
    double loss_sum = 0.0;
    for (std::size_t first = 0; first < order.size(); first += bs) {
      const std::size_t last = std::min(order.size(), first + bs);
      const Batch mb = data.Subset(
          std::span<const std::size_t>(order).subspan(first, last - first));
      const LossAndGradient lg =
          MeanLossGradient(net, theta, mb, LossKind::kCrossEntropy);
      if (!std::isfinite(lg.loss)) {
        result.diverged = true;
        break;
      }
      loss_sum += lg.loss * static_cast<double>(last - first);
      bool finite = true;
      for (std::size_t k = 0; k < theta.size(); ++k) {
        const double g = lg.gradient[k] + config.weight_decay * theta[k];
        velocity[k] = config.momentum * velocity[k] + g;
        theta[k] -= config.lr * velocity[k];
        finite = finite && std::isfinite(theta[k]);
      }
      if (!finite) {
        result.diverged = true;
        break;
      }
    }
    if (result.diverged) break;
    EpochRecord rec;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_acc = Accuracy(net, theta, val);
    rec.test_acc = Accuracy(net, theta, test);
    result.curve.push_back(rec);
  }

  if (result.curve.empty()) {
    // Diverged in the first epoch: report the untrained network.
    const Batch train = data.Subset(data.train);
    result.train_loss = MeanLoss(net, init, train, LossKind::kCrossEntropy);
    result.val_acc = Accuracy(net, init, val);
    result.test_acc = Accuracy(net, init, test);
  } else {
    const int epochs_run = static_cast<int>(result.curve.size());
    const EpochRecord best = result.AtBudget(epochs_run);
    for (int e = 0; e < epochs_run; ++e) {
      if (result.curve[e].val_acc == best.val_acc) {
        result.best_epoch = e;
        break;
      }
    }
    result.train_loss = result.curve.back().train_loss;
    result.val_acc = best.val_acc;
    result.test_acc = best.test_acc;
  }
  result.cost_seconds = SimulatedTrainingCost(
      net, data, std::max<int>(1, static_cast<int>(result.curve.size())));
  result.wall_seconds = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
  return result;
}

TrainedResult TrainArch(const CellArch& arch, const SearchSpaceSpec& space,
                        const Dataset& data, const TrainConfig& config) {
  const ExecutableArch exec =
      Materialize(arch, space, data.spec.dim, data.spec.num_classes);
  TrainedResult r =
      Train(exec.network, InitParams(exec.network, config.seed), data, config);
  r.arch_id = arch.id();
  return r;
}

void BenchTable::Insert(TrainedResult result) {
  const int id = result.arch_id;
  entries_.insert_or_assign(id, std::move(result));
}

const TrainedResult* BenchTable::Find(int arch_id) const {
  auto it = entries_.find(arch_id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<int> BenchTable::Ids() const {
  std::vector<int> ids;
  ids.reserve(entries_.size());
  for (const auto& [id, _] : entries_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::filesystem::path BenchTable::SidecarPath(
    const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  return p.replace_extension(".json");
}

std::filesystem::path BenchTable::CurvesPath(
    const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  return p.replace_extension(".curves.csv");
}

std::string BenchCsvHeader() {
  return "arch_id,train_loss,val_acc,test_acc,cost_seconds,diverged\n";
}

std::string BenchCsvRow(const TrainedResult& r) {
  return std::to_string(r.arch_id) + "," + FormatDouble(r.train_loss) + "," +
         FormatDouble(r.val_acc) + "," + FormatDouble(r.test_acc) + "," +
         FormatDouble(r.cost_seconds) + "," + (r.diverged ? "1" : "0") + "\n";
}

namespace {

std::string CurvesCsvHeader() {
  return "arch_id,epoch,train_loss,val_acc,test_acc\n";
}

std::string CurveRows(const TrainedResult& r) {
  std::string out;
  for (std::size_t e = 0; e < r.curve.size(); ++e) {
    out += std::to_string(r.arch_id) + "," + std::to_string(e + 1) + "," +
           FormatDouble(r.curve[e].train_loss) + "," +
           FormatDouble(r.curve[e].val_acc) + "," +
           FormatDouble(r.curve[e].test_acc) + "\n";
  }
  return out;
}

std::string SidecarJson(const BenchTable& t) {
  nlohmann::json j;
  j["dataset_fingerprint"] = t.dataset_fingerprint();
  j["train_fingerprint"] = t.train_fingerprint();
  j["entries"] = t.size();
  return j.dump(2) + "\n";
}

}  // namespace

void BenchTable::Save(const std::filesystem::path& csv) const {
  std::string rows = BenchCsvHeader();
  std::string curves = CurvesCsvHeader();
  for (int id : Ids()) {
    rows += BenchCsvRow(entries_.at(id));
    curves += CurveRows(entries_.at(id));
  }
  WriteFileAtomic(SidecarPath(csv), SidecarJson(*this));
  WriteFileAtomic(CurvesPath(csv), curves);
  WriteFileAtomic(csv, rows);
}

BenchTable BenchTable::Load(const std::filesystem::path& csv) {
  const auto meta = nlohmann::json::parse(ReadFile(SidecarPath(csv)));
  BenchTable table(meta.at("dataset_fingerprint").get<std::string>(),
                   meta.at("train_fingerprint").get<std::string>());
  const CsvTable rows = ReadCsv(csv);
  const std::size_t c_id = rows.Column("arch_id");
  const std::size_t c_loss = rows.Column("train_loss");
  const std::size_t c_val = rows.Column("val_acc");
  const std::size_t c_test = rows.Column("test_acc");
  const std::size_t c_cost = rows.Column("cost_seconds");
  const std::size_t c_div = rows.Column("diverged");
  for (const auto& row : rows.rows) {
    TrainedResult r;
    r.arch_id = static_cast<int>(ParseInt(row[c_id]));
    r.train_loss = ParseDouble(row[c_loss]);
    r.val_acc = ParseDouble(row[c_val]);
    r.test_acc = ParseDouble(row[c_test]);
    r.cost_seconds = ParseDouble(row[c_cost]);
    r.diverged = row[c_div] == "1";
    table.Insert(std::move(r));
  }
  if (std::filesystem::exists(CurvesPath(csv))) {
    const CsvTable curves = ReadCsv(CurvesPath(csv));
    const std::size_t k_id = curves.Column("arch_id");
    const std::size_t k_epoch = curves.Column("epoch");
    const std::size_t k_loss = curves.Column("train_loss");
    const std::size_t k_val = curves.Column("val_acc");
    const std::size_t k_test = curves.Column("test_acc");
    for (const auto& row : curves.rows) {
      auto it = table.entries_.find(static_cast<int>(ParseInt(row[k_id])));
      if (it == table.entries_.end()) continue;
      const std::size_t epoch = ParseInt(row[k_epoch]);
      auto& curve = it->second.curve;
      // Only contiguous prefixes are kept; rows of a torn append are ignored.
      if (epoch != curve.size() + 1) continue;
      curve.push_back({ParseDouble(row[k_loss]), ParseDouble(row[k_val]),
                       ParseDouble(row[k_test])});
    }
    for (auto& [id, r] : table.entries_) {
      for (std::size_t e = 0; e < r.curve.size(); ++e) {
        if (r.curve[e].val_acc == r.val_acc && r.curve[e].test_acc == r.test_acc) {
          r.best_epoch = static_cast<int>(e);
          break;
        }
      }
    }
  }
  return table;
}

BenchTable BuildBench(const SearchSpaceSpec& space, std::span<const int> ids,
                      const Dataset& data, const TrainConfig& config,
                      int workers,
                      const std::optional<std::filesystem::path>& persist_csv) {
  if (ids.empty()) throw std::invalid_argument("no architectures to train");
  BenchTable table(data.Fingerprint(), TrainFingerprint(config, space));

  std::ofstream rows_out;
  std::ofstream curves_out;
  if (persist_csv) {
    const auto& csv = *persist_csv;
    if (std::filesystem::exists(csv) &&
        std::filesystem::exists(BenchTable::SidecarPath(csv))) {
      BenchTable previous = BenchTable::Load(csv);
      if (previous.dataset_fingerprint() != table.dataset_fingerprint() ||
          previous.train_fingerprint() != table.train_fingerprint()) {
        throw std::runtime_error(
            "existing bench at " + csv.string() +
            " was built with a different dataset or training config");
      }
      table = std::move(previous);
    } else {
      WriteFileAtomic(csv, BenchCsvHeader());
      WriteFileAtomic(BenchTable::CurvesPath(csv), CurvesCsvHeader());
    }
    WriteFileAtomic(BenchTable::SidecarPath(csv), SidecarJson(table));
    rows_out.open(csv, std::ios::app);
    curves_out.open(BenchTable::CurvesPath(csv), std::ios::app);
  }

  std::vector<int> todo;
  for (int id : ids) {
    if (!table.Contains(id) &&
        std::find(todo.begin(), todo.end(), id) == todo.end()) {
      todo.push_back(id);
    }
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      TrainedResult r = TrainArch(DecodeArch(todo[i]), space, data, config);
      std::lock_guard<std::mutex> lock(mu);
      if (persist_csv) {
        rows_out << BenchCsvRow(r) << std::flush;
        curves_out << CurveRows(r) << std::flush;
      }
      table.Insert(std::move(r));
    }
  };
  const int n_threads = std::max(1, workers);
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  if (persist_csv) {
    rows_out.close();
    curves_out.close();
    table.Save(*persist_csv);
  }
  return table;
}

}  // namespace gsnas
