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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mia/bench.hpp"

namespace mia {
namespace {

namespace fs = std::filesystem;

ExperimentConfig quick_config()
{
  ExperimentConfig c;
  c.name = "quick";
  c.synth = {400, 20, 4, 0.15, 3};
  c.train_size = 100;
  c.test_size = 100;
  c.hidden = {16};
  c.fl_epochs = 10;
  c.snapshot_count = 2;
  c.central = {20, 0.5, 0, 1};
  c.coreset.size = 30;
  c.coreset.center_fraction = 0.8;
  c.attack.encoder_width = 8;
  c.attack.combiner_hidden = {16, 8};
  c.attack.epochs = 5;
  c.membership = {20, 20, 20, 20};
  c.output_dir = fs::temp_directory_path() / "mia_bench_quick";
  return c;
}

std::string slurp(fs::path const &p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

TEST(Config, JsonRoundTrip)
{
  ExperimentConfig c = quick_config();
  c.coreset.per_node = {{10, 5}, {10, 5}};
  c.coreset.k_grid = {1, 3};
  c.attack.gradient_encoder = EncoderKind::ColumnConv;
  c.attack_concatenation = false;
  c.seeds = {4, 9};
  c.sweep_values = {5, 10};
  auto const j = c.to_json();
  auto const back = ExperimentConfig::from_json(j);
  EXPECT_EQ(back.to_json(), j);
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_FALSE(back.attack_concatenation);
  EXPECT_EQ(back.coreset.per_node[1], (NodeBudget{10, 5}));
}

TEST(Config, PartialJsonKeepsDefaults)
{
  auto c = ExperimentConfig::from_json(nlohmann::json::parse(R"({"name": "x", "federated": {"epochs": 7}})"));
  EXPECT_EQ(c.fl_epochs, 7);
  EXPECT_EQ(c.snapshot_count, ExperimentConfig{}.snapshot_count);
  EXPECT_EQ(c.name, "x");
}

TEST(Config, UnknownKeysAndBadValuesAreRejected)
{
  using nlohmann::json;
  EXPECT_THROW(ExperimentConfig::from_json(json::parse(R"({"nmae": "x"})")), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json(json::parse(R"({"federated": {"epoch": 3}})")), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json(json::parse(R"({"approach": "both_ways"})")), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json(json::parse(R"({"federated": {"epochs": "ten"}})")), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json(json::parse(R"({"attack": {"architectures": ["pyramid"]}})")), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json(json::parse(R"({"coreset": {"per_node": [[1, 2, 3]]}})")), ConfigError);
}

TEST(Config, ValidationCatchesInconsistentSizes)
{
  auto expect_invalid = [](auto mutate) {
    ExperimentConfig c = quick_config();
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  EXPECT_NO_THROW(quick_config().validate());
  expect_invalid([](ExperimentConfig &c) { c.membership.leaked_members = 90; });
  expect_invalid([](ExperimentConfig &c) { c.membership.eval_nonmembers = 0; });
  expect_invalid([](ExperimentConfig &c) { c.snapshot_count = 11; });
  expect_invalid([](ExperimentConfig &c) { c.coreset.size = 101; });
  expect_invalid([](ExperimentConfig &c) { c.coreset.centers_only = true; });
  expect_invalid([](ExperimentConfig &c) { c.coreset.per_node = {{10, 5}}; });
  expect_invalid([](ExperimentConfig &c) { c.seeds.clear(); });
  expect_invalid([](ExperimentConfig &c) { c.synth.flip_rate = 0.7; });
  expect_invalid([](ExperimentConfig &c) { c.attack_concatenation = c.attack_hierarchical = false; });

  ExperimentConfig c = quick_config();
  c.test_size = 350;
  EXPECT_THROW(validate_against(c, load_dataset(c)), ConfigError);
}

TEST(Config, LoadResolvesCsvRelativeToConfig)
{
  auto const dir = fs::temp_directory_path() / "mia_cfg_dir";
  fs::create_directories(dir);
  std::ofstream(dir / "c.json") << R"({"dataset": {"csv": "data.csv"}})";
  auto c = ExperimentConfig::load(dir / "c.json");
  ASSERT_TRUE(c.csv.has_value());
  EXPECT_EQ(*c.csv, dir / "data.csv");
  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_THROW(ExperimentConfig::load(dir / "broken.json"), ConfigError);
  EXPECT_THROW(ExperimentConfig::load(dir / "missing.json"), ConfigError);
}

TEST(Config, HashChangesWithEveryField)
{
  std::vector<std::function<void(ExperimentConfig &)>> mutations{
      [](auto &c) { c.name = "other"; },
      [](auto &c) { c.csv = "x.csv"; },
      [](auto &c) { c.synth.num_records += 1; },
      [](auto &c) { c.synth.feature_dim += 1; },
      [](auto &c) { c.synth.num_classes += 1; },
      [](auto &c) { c.synth.flip_rate += 0.01; },
      [](auto &c) { c.synth.seed += 1; },
      [](auto &c) { c.train_size += 1; },
      [](auto &c) { c.test_size += 1; },
      [](auto &c) { c.num_nodes += 1; },
      [](auto &c) { c.hidden.push_back(4); },
      [](auto &c) { c.activation = Activation::Relu; },
      [](auto &c) { c.approach = Approach::Coreset; },
      [](auto &c) { c.fl_epochs += 1; },
      [](auto &c) { c.fl_learning_rate *= 2; },
      [](auto &c) { c.snapshot_count += 1; },
      [](auto &c) { c.central.epochs += 1; },
      [](auto &c) { c.central.learning_rate *= 2; },
      [](auto &c) { c.central.batch_size = 8; },
      [](auto &c) { c.coreset.size += 1; },
      [](auto &c) { c.coreset.center_fraction = 0.5; },
      [](auto &c) { c.coreset.centers_only = true; },
      [](auto &c) { c.coreset.full_data = true; },
      [](auto &c) { c.coreset.per_node = {{1, 1}}; },
      [](auto &c) { c.coreset.k_grid = {1}; },
      [](auto &c) { c.coreset.transmit_weights = true; },
      [](auto &c) { c.coreset.kmeans.max_iters += 1; },
      [](auto &c) { c.coreset.kmeans.tol *= 2; },
      [](auto &c) { c.coreset.kmeans.restarts += 1; },
      [](auto &c) { c.attack.encoder_width += 1; },
      [](auto &c) { c.attack.combiner_hidden.push_back(2); },
      [](auto &c) { c.attack.gradient_encoder = EncoderKind::ColumnConv; },
      [](auto &c) { c.attack.conv_filters += 1; },
      [](auto &c) { c.attack.epochs += 1; },
      [](auto &c) { c.attack.learning_rate *= 2; },
      [](auto &c) { c.attack.batch_size += 1; },
      [](auto &c) { c.attack.standardize = false; },
      [](auto &c) { c.attack_concatenation = false; },
      [](auto &c) { c.attack_hierarchical = false; },
      [](auto &c) { c.membership.leaked_members += 1; },
      [](auto &c) { c.membership.leaked_nonmembers += 1; },
      [](auto &c) { c.membership.eval_members += 1; },
      [](auto &c) { c.membership.eval_nonmembers += 1; },
      [](auto &c) { c.seeds.push_back(2); },
      [](auto &c) { c.output_dir = "elsewhere"; },
      [](auto &c) { c.include_raw_baseline = true; },
      [](auto &c) { c.dump_coreset = true; },
      [](auto &c) { c.workers += 1; },
      [](auto &c) { c.sweep_axis = "coreset_size"; },
      [](auto &c) { c.sweep_values = {3}; },
      [](auto &c) { c.sweep_with_attacks = true; },
  };
  ExperimentConfig const base = quick_config();
  EXPECT_EQ(base.hash(), quick_config().hash());
  std::set<std::string> seen{base.hash()};
  for (std::size_t i = 0; i < mutations.size(); ++i) {
    ExperimentConfig c = base;
    mutations[i](c);
    EXPECT_NE(c.hash(), base.hash()) << "mutation " << i;
    seen.insert(c.hash());
  }
  EXPECT_EQ(seen.size(), mutations.size() + 1);
}

TEST(Seeds, StagesAreIndependent)
{
  std::set<std::uint64_t> s;
  for (std::uint64_t stage = 0; stage < 300; ++stage) { s.insert(derive_seed(7, stage)); }
  EXPECT_EQ(s.size(), 300u);
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
  EXPECT_NE(derive_seed(7, 3), derive_seed(8, 3));
}

TEST(Stats, MedianAndSpearman)
{
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_THROW(median({}), DomainError);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
  // Ties take average ranks: y ranks (1.5, 1.5, 3, 4).
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {5, 5, 6, 7}), 4.5 / std::sqrt(5.0 * 4.5), 1e-12);
  EXPECT_EQ(spearman({1, 2, 3}, {2, 2, 2}), 0.0);
}

ReportRow sample_row(std::string approach)
{
  ReportRow r;
  r.approach = std::move(approach);
  r.seed = "3";
  r.parameter = "size=30,centers_only";
  r.accuracy = 0.1 + 0.2;
  r.leakage = 0.55;
  r.leakage_concatenation = 0.55;
  r.cost = 19958136;
  r.exposed_samples = 12;
  r.wall_clock_s = 1.25;
  r.config_hash = "00ff00ff00ff00ff";
  r.notes = "centers only; \"quoted\", with comma";
  return r;
}

void expect_same_rows(TradeoffReport const &a, TradeoffReport const &b, bool with_wall_clock = true)
{
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    auto const &x = a.rows[i];
    auto const &y = b.rows[i];
    EXPECT_EQ(x.approach, y.approach);
    EXPECT_EQ(x.seed, y.seed);
    EXPECT_EQ(x.parameter, y.parameter);
    EXPECT_EQ(x.accuracy, y.accuracy);
    EXPECT_EQ(x.leakage, y.leakage);
    EXPECT_EQ(x.leakage_concatenation, y.leakage_concatenation);
    EXPECT_EQ(x.leakage_hierarchical, y.leakage_hierarchical);
    EXPECT_EQ(x.cost, y.cost);
    EXPECT_EQ(x.exposed_samples, y.exposed_samples);
    if (with_wall_clock) { EXPECT_EQ(x.wall_clock_s, y.wall_clock_s); }
    EXPECT_EQ(x.config_hash, y.config_hash);
    EXPECT_EQ(x.notes, y.notes);
  }
}

TEST(Report, CsvAndJsonRoundTrip)
{
  TradeoffReport rep{"demo", "00ff00ff00ff00ff", {sample_row("coreset"), sample_row("federated")}};
  rep.rows[1].leakage_concatenation.reset();
  auto const dir = fs::temp_directory_path() / "mia_report_rt";
  fs::remove_all(dir);
  expect_same_rows(rep, read_report_csv(emit_report(rep, ReportFormat::Csv, dir)));
  auto const back = read_report_json(emit_report(rep, ReportFormat::Json, dir));
  EXPECT_EQ(back.name, "demo");
  expect_same_rows(rep, back);
}

TEST(Report, ByteStable)
{
  TradeoffReport rep{"demo", "00ff00ff00ff00ff", {sample_row("coreset")}};
  auto const a = fs::temp_directory_path() / "mia_report_a";
  auto const b = fs::temp_directory_path() / "mia_report_b";
  for (auto f : {ReportFormat::Csv, ReportFormat::Json}) {
    EXPECT_EQ(slurp(emit_report(rep, f, a)), slurp(emit_report(rep, f, b)));
  }
  EXPECT_EQ(slurp(a / "report.csv").substr(0, 9), "approach,");
}

TEST(Report, RejectsMalformedInput)
{
  auto const dir = fs::temp_directory_path() / "mia_report_bad";
  fs::create_directories(dir);
  std::ofstream(dir / "bad.csv") << "approach,seed\n";
  EXPECT_THROW(read_report_csv(dir / "bad.csv"), ParseError);
  std::ofstream(dir / "bad.json") << R"({"name": "x"})";
  EXPECT_THROW(read_report_json(dir / "bad.json"), ParseError);
  EXPECT_THROW(emit_report(TradeoffReport{}, ReportFormat::Csv, dir), DomainError);
}

TEST(Experiment, BothApproachesThreeSeeds)
{
  ExperimentConfig c = quick_config();
  c.seeds = {1, 2, 3};
  std::vector<ReportRow> streamed;
  auto rep = run_experiment(c, [&](ReportRow const &r) { streamed.push_back(r); });
  ASSERT_EQ(rep.rows.size(), 8u);
  EXPECT_EQ(streamed.size(), 6u);
  int fed = 0, core = 0;
  for (auto const &r : rep.rows) {
    EXPECT_GE(r.accuracy, 0.0);
    EXPECT_LE(r.accuracy, 1.0);
    ASSERT_TRUE(r.leakage.has_value());
    EXPECT_GE(*r.leakage, 0.0);
    EXPECT_LE(*r.leakage, 1.0);
    EXPECT_GT(r.cost, 0);
    EXPECT_EQ(r.config_hash, c.hash());
    EXPECT_FALSE(r.notes.empty());
    if (r.approach == "federated") {
      ++fed;
      EXPECT_EQ(r.cost, fl_communication_cost(MlpSpec{{20, 16, 4}}, 10, 2));
      EXPECT_NE(r.notes.find("substitutes a CNN"), std::string::npos);
    } else {
      ++core;
      EXPECT_EQ(r.approach, "coreset");
      EXPECT_EQ(r.cost, 30 * 21);
      ASSERT_TRUE(r.leakage_concatenation && r.leakage_hierarchical);
      EXPECT_EQ(*r.leakage, std::max(*r.leakage_concatenation, *r.leakage_hierarchical));
      EXPECT_EQ(r.exposed_samples > 0, true);
    }
  }
  EXPECT_EQ(fed, 4);
  EXPECT_EQ(core, 4);
  EXPECT_EQ(rep.rows[6].seed, "median");
  EXPECT_EQ(rep.rows[7].seed, "median");
}

TEST(Experiment, DeterministicAcrossRunsAndWorkers)
{
  ExperimentConfig c = quick_config();
  c.seeds = {5, 6};
  auto const a = run_experiment(c);
  auto const b = run_experiment(c);
  expect_same_rows(a, b, false);
  c.workers = 2;
  auto const p = run_experiment(c);
  ASSERT_EQ(p.rows.size(), a.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(p.rows[i].accuracy, a.rows[i].accuracy);
    EXPECT_EQ(p.rows[i].leakage, a.rows[i].leakage);
  }
}

TEST(Experiment, CostIgnoresRecordValues)
{
  ExperimentConfig c = quick_config();
  c.attack.epochs = 1;
  auto const a = run_experiment(c);
  c.synth.seed = 99;
  c.synth.flip_rate = 0.4;
  auto const b = run_experiment(c);
  for (std::size_t i = 0; i < a.rows.size(); ++i) { EXPECT_EQ(a.rows[i].cost, b.rows[i].cost); }
}

TEST(Experiment, LocationsShapedFederatedCost)
{
  ExperimentConfig c;
  c.synth = {120, 446, 30, 0.1, 1};
  c.train_size = 60;
  c.test_size = 60;
  c.hidden = {256, 128};
  c.approach = Approach::Federated;
  c.fl_epochs = 33;
  c.fl_learning_rate = 0.1;
  c.snapshot_count = 1;
  c.attack.encoder_width = 4;
  c.attack.combiner_hidden = {4};
  c.attack.epochs = 1;
  c.membership = {10, 10, 10, 10};
  auto const rep = run_experiment(c);
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(rep.rows[0].cost, 19958136);
}

TEST(Experiment, CentersOnly)
{
  ExperimentConfig c = quick_config();
  c.approach = Approach::Coreset;
  c.coreset.centers_only = true;
  c.coreset.center_fraction = 1.0;
  auto const rep = run_experiment(c);
  for (auto const &r : rep.rows) {
    EXPECT_NE(r.notes.find("centers only"), std::string::npos);
    EXPECT_EQ(r.exposed_samples, 0);
    EXPECT_NE(r.parameter.find("centers_only"), std::string::npos);
  }
}

TEST(Experiment, FullDataCoresetMatchesRawTraining)
{
  ExperimentConfig c = quick_config();
  c.approach = Approach::Coreset;
  c.coreset.full_data = true;
  c.include_raw_baseline = true;
  auto const rep = run_experiment(c);
  ASSERT_EQ(rep.rows.size(), 4u);
  EXPECT_EQ(rep.rows[0].approach, "coreset");
  EXPECT_EQ(rep.rows[1].approach, "raw");
  EXPECT_EQ(rep.rows[0].leakage, 1.0);
  EXPECT_EQ(rep.rows[0].accuracy, rep.rows[1].accuracy);
  EXPECT_EQ(rep.rows[0].exposed_samples, 100);
  EXPECT_EQ(rep.rows[0].cost, rep.rows[1].cost);
}

TEST(Experiment, StageErrorsNameTheStage)
{
  ExperimentConfig c = quick_config();
  c.csv = fs::temp_directory_path() / "mia_no_such_dataset.csv";
  try {
    run_experiment(c);
    FAIL() << "expected StageError";
  } catch (StageError const &e) {
    EXPECT_EQ(e.stage(), "dataset");
  }
}

TEST(Sweep, SingleValueGivesOnePoint)
{
  ExperimentConfig c = quick_config();
  auto const t = sweep(c, "epochs", {5});
  ASSERT_EQ(t.points.size(), 2u);
  EXPECT_EQ(t.points[0].seed, "1");
  EXPECT_EQ(t.points[1].seed, "median");
  EXPECT_EQ(t.points[0].accuracy, t.points[1].accuracy);
  EXPECT_FALSE(t.points[0].leakage.has_value());
  auto const path = emit_curve(t, c.output_dir);
  EXPECT_EQ(path.filename(), "curve_epochs.csv");
}

TEST(Sweep, EpochsMatchSeparateRuns)
{
  ExperimentConfig c = quick_config();
  c.approach = Approach::Federated;
  auto const t = sweep(c, "epochs", {3, 10});
  auto const rep = run_experiment(c);
  EXPECT_EQ(t.points[1].accuracy, rep.rows[0].accuracy);
}

TEST(Sweep, CoresetSizeEndsAtRawAccuracy)
{
  ExperimentConfig c = quick_config();
  c.approach = Approach::Coreset;
  c.include_raw_baseline = true;
  auto const t = sweep(c, "coreset_size", {20, 100});
  auto const rep = run_experiment(c);
  EXPECT_EQ(t.points[1].value, 100);
  EXPECT_EQ(t.points[1].accuracy, rep.rows[1].accuracy);
}

TEST(Sweep, EpochTrendOverSeeds)
{
  ExperimentConfig c = quick_config();
  c.seeds = {1, 2, 3, 4, 5};
  c.fl_epochs = 60;
  auto const t = sweep(c, "epochs", {2, 60});
  double lo = -1, hi = -1;
  for (auto const &p : t.points) {
    if (p.seed != "median") { continue; }
    (p.value == 2 ? lo : hi) = p.accuracy;
  }
  EXPECT_GE(hi, lo);
}

TEST(Sweep, RejectsBadInput)
{
  ExperimentConfig c = quick_config();
  EXPECT_THROW(sweep(c, "depth", {1}), ConfigError);
  EXPECT_THROW(sweep(c, "epochs", {}), ConfigError);
  EXPECT_THROW(sweep(c, "epochs", {5, 3}), ConfigError);
  EXPECT_THROW(sweep(c, "coreset_size", {10, 101}), ConfigError);
}

} // namespace
} // namespace mia
