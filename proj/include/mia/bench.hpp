//
// Copyright 2026 The mia-bench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Experiment orchestration: configuration, the federated and coreset
// pipelines, sweeps, and report files.

#ifndef MIA_BENCH_HPP
#define MIA_BENCH_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mia/attacks.hpp"
#include "mia/coreset.hpp"
#include "mia/datakit.hpp"
#include "mia/fedsim.hpp"

namespace mia {

// Invalid configuration; the CLI maps it to exit code 1.
class ConfigError : public DomainError
{
public:
  using DomainError::DomainError;
};

// A pipeline stage failed; the message names the stage.
class StageError : public std::runtime_error
{
public:
  StageError(std::string stage, std::string const &what)
    : std::runtime_error(stage + ": " + what), stage_(std::move(stage))
  {
  }
  std::string const &stage() const { return stage_; }

private:
  std::string stage_;
};

enum class Approach
{
  Federated,
  Coreset,
  Both
};

struct CoresetSettings
{
  Index size = 100;
  double center_fraction = 0.9;
  bool centers_only = false;
  bool full_data = false;                  // every training record, weight 1
  std::vector<NodeBudget> per_node;        // explicit split; overrides center_fraction
  std::vector<Index> k_grid;               // empty: 1, 2, 4, ... up to the node's center budget
  bool transmit_weights = false;
  KmeansConfig kmeans{};
};

struct ExperimentConfig
{
  std::string name = "experiment";
  std::optional<std::filesystem::path> csv;
  SynthSpec synth{};
  Index train_size = 200;
  Index test_size = 200;
  int num_nodes = 2;
  std::vector<Index> hidden{32};
  Activation activation = Activation::Tanh;
  Approach approach = Approach::Both;
  int fl_epochs = 50;
  double fl_learning_rate = 0.5;
  int snapshot_count = 5;
  TrainConfig central{100, 0.5, 0, 1}; // coreset-trained target; seed is per run
  CoresetSettings coreset{};
  AttackConfig attack{};
  bool attack_concatenation = true;
  bool attack_hierarchical = true;
  MembershipSizes membership{50, 50, 50, 50};
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path output_dir = "out";
  bool include_raw_baseline = false;
  bool dump_coreset = false;
  int workers = 1;

  // Sweep section.
  std::string sweep_axis = "epochs";
  std::vector<long> sweep_values;
  bool sweep_with_attacks = false;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(nlohmann::json const &j);
  static ExperimentConfig load(std::filesystem::path const &path);

  // FNV-1a over the canonical JSON serialization.
  std::string hash() const;

  // Size and range checks that need no data.
  void validate() const;
};

Approach parse_approach(std::string const &s);
std::string to_string(Approach a);

// Loads or generates the dataset and checks every size against it.
Dataset load_dataset(ExperimentConfig const &cfg);
void validate_against(ExperimentConfig const &cfg, Dataset const &data);

MlpSpec target_spec(ExperimentConfig const &cfg, Index feature_dim, int num_classes);

// Stage seeds derived from the run seed.
std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t stage);

struct CoresetBuild
{
  GlobalCoreset coreset;
  BudgetAllocation allocation;
  std::vector<CostProfile> profiles;
};

// Cost profiles, budget allocation, local coresets, merge.
CoresetBuild build_distributed_coreset(std::span<Dataset const> shards, CoresetSettings const &settings,
                                       std::uint64_t seed);

// Weighted gradient descent from Mlp::random(spec) seeded with init_seed.
Mlp<double> train_centralized(WeightedSet<double> const &data, MlpSpec const &spec, TrainConfig cfg,
                              std::uint64_t init_seed);

struct ReportRow
{
  std::string approach; // federated | coreset | raw
  std::string seed;     // run seed, or "median"
  std::string parameter;
  double accuracy = 0;
  std::optional<double> leakage;
  std::optional<double> leakage_concatenation;
  std::optional<double> leakage_hierarchical;
  std::int64_t cost = 0;
  Index exposed_samples = 0;
  double wall_clock_s = 0;
  std::string config_hash;
  std::string notes;
};

struct TradeoffReport
{
  std::string name;
  std::string config_hash;
  std::vector<ReportRow> rows;
};

using RowSink = std::function<void(ReportRow const &)>;

// One row per (seed, approach) followed by a median row per approach.
// on_row sees every per-seed row as soon as it is complete.
TradeoffReport run_experiment(ExperimentConfig const &cfg, RowSink const &on_row = {});

struct CurvePoint
{
  long value = 0;
  std::string seed;
  double accuracy = 0;
  std::optional<double> leakage;
};

struct CurveTable
{
  std::string axis;
  std::vector<CurvePoint> points; // per seed, then medians
};

CurveTable sweep(ExperimentConfig const &cfg, std::string const &axis, std::vector<long> const &values);

enum class ReportFormat
{
  Csv,
  Json
};

ReportFormat parse_format(std::string const &s);

// Writes report.csv or report.json into dir; returns the path.
std::filesystem::path emit_report(TradeoffReport const &report, ReportFormat format, std::filesystem::path const &dir);
std::filesystem::path emit_curve(CurveTable const &curve, std::filesystem::path const &dir);

std::string report_csv(TradeoffReport const &report);
nlohmann::json report_json(TradeoffReport const &report);
TradeoffReport read_report_json(std::filesystem::path const &path);
TradeoffReport read_report_csv(std::filesystem::path const &path);

double median(std::vector<double> v);

// Spearman rank correlation with average ranks for ties.
double spearman(std::vector<double> const &x, std::vector<double> const &y);

} // namespace mia

#endif // MIA_BENCH_HPP
