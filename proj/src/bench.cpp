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

#include "mia/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

namespace mia {

using nlohmann::json;

namespace {

std::string activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation parse_activation(std::string const &s)
{
  if (s == "tanh") { return Activation::Tanh; }
  if (s == "relu") { return Activation::Relu; }
  throw ConfigError("unknown activation '" + s + "'");
}

std::string encoder_name(EncoderKind k) { return k == EncoderKind::Dense ? "dense" : "conv"; }

EncoderKind parse_encoder(std::string const &s)
{
  if (s == "dense") { return EncoderKind::Dense; }
  if (s == "conv") { return EncoderKind::ColumnConv; }
  throw ConfigError("unknown gradient encoder '" + s + "'");
}

// Reads fields from one JSON object and rejects keys nobody asked for.
class Section
{
public:
  Section(json const &j, std::string path)
    : j_(j), path_(std::move(path))
  {
    if (!j_.is_object()) { throw ConfigError(path_ + " must be an object"); }
  }

  template <typename T> void get(char const *key, T &out)
  {
    seen_.insert(key);
    if (!j_.contains(key)) { return; }
    try {
      out = j_.at(key).get<T>();
    } catch (json::exception const &e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  bool has(char const *key) const { return j_.contains(key); }

  json const &sub(char const *key)
  {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const
  {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) { throw ConfigError("unknown key " + path_ + "." + it.key()); }
    }
  }

private:
  json const &j_;
  std::string path_;
  std::set<std::string> seen_;
};

} // namespace

Approach parse_approach(std::string const &s)
{
  if (s == "fed" || s == "federated") { return Approach::Federated; }
  if (s == "coreset") { return Approach::Coreset; }
  if (s == "both") { return Approach::Both; }
  throw ConfigError("unknown approach '" + s + "' (expected fed, coreset or both)");
}

std::string to_string(Approach a)
{
  switch (a) {
  case Approach::Federated: return "fed";
  case Approach::Coreset: return "coreset";
  case Approach::Both: return "both";
  }
  return "both";
}

json ExperimentConfig::to_json() const
{
  json j;
  j["name"] = name;
  if (csv) {
    j["dataset"] = {{"csv", csv->string()}};
  } else {
    j["dataset"] = {{"synthetic",
                     {{"num_records", synth.num_records},
                      {"feature_dim", synth.feature_dim},
                      {"num_classes", synth.num_classes},
                      {"flip_rate", synth.flip_rate},
                      {"seed", synth.seed}}}};
  }
  j["partition"] = {{"train_size", train_size}, {"test_size", test_size}, {"num_nodes", num_nodes}};
  j["target"] = {{"hidden", hidden}, {"activation", activation_name(activation)}};
  j["approach"] = to_string(approach);
  j["federated"] = {{"epochs", fl_epochs}, {"learning_rate", fl_learning_rate}, {"snapshots", snapshot_count}};
  j["central_training"] = {
      {"epochs", central.epochs}, {"learning_rate", central.learning_rate}, {"batch_size", central.batch_size}};
  json per_node = json::array();
  for (auto const &b : coreset.per_node) { per_node.push_back({b.centers, b.samples}); }
  j["coreset"] = {{"size", coreset.size},
                  {"center_fraction", coreset.center_fraction},
                  {"centers_only", coreset.centers_only},
                  {"full_data", coreset.full_data},
                  {"per_node", per_node},
                  {"k_grid", coreset.k_grid},
                  {"transmit_weights", coreset.transmit_weights},
                  {"kmeans_max_iters", coreset.kmeans.max_iters},
                  {"kmeans_tol", coreset.kmeans.tol},
                  {"kmeans_restarts", coreset.kmeans.restarts}};
  json archs = json::array();
  if (attack_concatenation) { archs.push_back("concatenation"); }
  if (attack_hierarchical) { archs.push_back("hierarchical"); }
  j["attack"] = {{"encoder_width", attack.encoder_width},
                 {"combiner_hidden", attack.combiner_hidden},
                 {"gradient_encoder", encoder_name(attack.gradient_encoder)},
                 {"conv_filters", attack.conv_filters},
                 {"epochs", attack.epochs},
                 {"learning_rate", attack.learning_rate},
                 {"batch_size", attack.batch_size},
                 {"standardize", attack.standardize},
                 {"architectures", archs}};
  j["membership"] = {{"leaked_members", membership.leaked_members},
                     {"leaked_nonmembers", membership.leaked_nonmembers},
                     {"eval_members", membership.eval_members},
                     {"eval_nonmembers", membership.eval_nonmembers}};
  j["seeds"] = seeds;
  j["output_dir"] = output_dir.string();
  j["include_raw_baseline"] = include_raw_baseline;
  j["dump_coreset"] = dump_coreset;
  j["workers"] = workers;
  j["sweep"] = {{"axis", sweep_axis}, {"values", sweep_values}, {"with_attacks", sweep_with_attacks}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(json const &j)
{
  ExperimentConfig c;
  Section top(j, "config");
  top.get("name", c.name);
  if (top.has("dataset")) {
    Section ds(top.sub("dataset"), "dataset");
    if (ds.has("csv")) {
      std::string p;
      ds.get("csv", p);
      c.csv = p;
    }
    if (ds.has("synthetic")) {
      if (c.csv) { throw ConfigError("dataset: give either csv or synthetic, not both"); }
      Section sy(ds.sub("synthetic"), "dataset.synthetic");
      sy.get("num_records", c.synth.num_records);
      sy.get("feature_dim", c.synth.feature_dim);
      sy.get("num_classes", c.synth.num_classes);
      sy.get("flip_rate", c.synth.flip_rate);
      sy.get("seed", c.synth.seed);
      sy.finish();
    }
    ds.finish();
  }
  if (top.has("partition")) {
    Section p(top.sub("partition"), "partition");
    p.get("train_size", c.train_size);
    p.get("test_size", c.test_size);
    p.get("num_nodes", c.num_nodes);
    p.finish();
  }
  if (top.has("target")) {
    Section t(top.sub("target"), "target");
    t.get("hidden", c.hidden);
    std::string act = activation_name(c.activation);
    t.get("activation", act);
    c.activation = parse_activation(act);
    t.finish();
  }
  std::string approach = to_string(c.approach);
  top.get("approach", approach);
  c.approach = parse_approach(approach);
  if (top.has("federated")) {
    Section f(top.sub("federated"), "federated");
    f.get("epochs", c.fl_epochs);
    f.get("learning_rate", c.fl_learning_rate);
    f.get("snapshots", c.snapshot_count);
    f.finish();
  }
  if (top.has("central_training")) {
    Section t(top.sub("central_training"), "central_training");
    t.get("epochs", c.central.epochs);
    t.get("learning_rate", c.central.learning_rate);
    t.get("batch_size", c.central.batch_size);
    t.finish();
  }
  if (top.has("coreset")) {
    Section s(top.sub("coreset"), "coreset");
    s.get("size", c.coreset.size);
    s.get("center_fraction", c.coreset.center_fraction);
    s.get("centers_only", c.coreset.centers_only);
    s.get("full_data", c.coreset.full_data);
    std::vector<std::vector<Index>> per_node;
    s.get("per_node", per_node);
    for (auto const &pn : per_node) {
      if (pn.size() != 2) { throw ConfigError("coreset.per_node entries must be [centers, samples]"); }
      c.coreset.per_node.push_back({pn[0], pn[1]});
    }
    s.get("k_grid", c.coreset.k_grid);
    s.get("transmit_weights", c.coreset.transmit_weights);
    s.get("kmeans_max_iters", c.coreset.kmeans.max_iters);
    s.get("kmeans_tol", c.coreset.kmeans.tol);
    s.get("kmeans_restarts", c.coreset.kmeans.restarts);
    s.finish();
  }
  if (top.has("attack")) {
    Section a(top.sub("attack"), "attack");
    a.get("encoder_width", c.attack.encoder_width);
    a.get("combiner_hidden", c.attack.combiner_hidden);
    std::string enc = encoder_name(c.attack.gradient_encoder);
    a.get("gradient_encoder", enc);
    c.attack.gradient_encoder = parse_encoder(enc);
    a.get("conv_filters", c.attack.conv_filters);
    a.get("epochs", c.attack.epochs);
    a.get("learning_rate", c.attack.learning_rate);
    a.get("batch_size", c.attack.batch_size);
    a.get("standardize", c.attack.standardize);
    if (a.has("architectures")) {
      std::vector<std::string> archs;
      a.get("architectures", archs);
      c.attack_concatenation = c.attack_hierarchical = false;
      for (auto const &s : archs) {
        if (s == "concatenation") {
          c.attack_concatenation = true;
        } else if (s == "hierarchical") {
          c.attack_hierarchical = true;
        } else {
          throw ConfigError("unknown attack architecture '" + s + "'");
        }
      }
    }
    a.finish();
  }
  if (top.has("membership")) {
    Section m(top.sub("membership"), "membership");
    m.get("leaked_members", c.membership.leaked_members);
    m.get("leaked_nonmembers", c.membership.leaked_nonmembers);
    m.get("eval_members", c.membership.eval_members);
    m.get("eval_nonmembers", c.membership.eval_nonmembers);
    m.finish();
  }
  top.get("seeds", c.seeds);
  std::string out = c.output_dir.string();
  top.get("output_dir", out);
  c.output_dir = out;
  top.get("include_raw_baseline", c.include_raw_baseline);
  top.get("dump_coreset", c.dump_coreset);
  top.get("workers", c.workers);
  if (top.has("sweep")) {
    Section s(top.sub("sweep"), "sweep");
    s.get("axis", c.sweep_axis);
    s.get("values", c.sweep_values);
    s.get("with_attacks", c.sweep_with_attacks);
    s.finish();
  }
  top.finish();
  return c;
}

ExperimentConfig ExperimentConfig::load(std::filesystem::path const &path)
{
  std::ifstream in(path);
  if (!in) { throw ConfigError("cannot open config " + path.string()); }
  json j;
  try {
    j = json::parse(in);
  } catch (json::parse_error const &e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  auto c = from_json(j);
  if (c.csv && c.csv->is_relative()) { c.csv = path.parent_path() / *c.csv; }
  return c;
}

std::string ExperimentConfig::hash() const
{
  std::string const s = to_json().dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ExperimentConfig::validate() const
{
  auto check = [](bool ok, std::string const &msg) {
    if (!ok) { throw ConfigError(msg); }
  };
  if (!csv) {
    try {
      synth.validate();
    } catch (DomainError const &e) {
      throw ConfigError(e.what());
    }
  }
  check(num_nodes >= 1, "partition.num_nodes must be at least 1");
  check(train_size >= num_nodes, "partition.train_size must give every node a record");
  check(test_size >= 1, "partition.test_size must be positive");
  for (auto h : hidden) { check(h >= 1, "target.hidden widths must be positive"); }
  check(!seeds.empty(), "seeds must not be empty");
  check(workers >= 1, "workers must be at least 1");
  check(membership.leaked_members >= 1 && membership.leaked_nonmembers >= 1, "membership: leaked sets must be nonempty");
  check(membership.eval_members >= 1 && membership.eval_nonmembers >= 1, "membership: evaluation sets must be nonempty");
  check(membership.leaked_members + membership.eval_members <= train_size,
        "membership: |S_train| + |S'_train| exceeds partition.train_size");
  check(membership.leaked_nonmembers + membership.eval_nonmembers <= test_size,
        "membership: |S_test| + |S'_test| exceeds partition.test_size");
  check(central.epochs >= 0 && central.learning_rate > 0, "central_training: invalid epochs or learning rate");
  check(attack.epochs >= 0 && attack.learning_rate > 0 && attack.encoder_width >= 1, "attack: invalid settings");
  if (approach != Approach::Coreset) {
    check(!hidden.empty(), "target.hidden: the federated attack needs at least one hidden layer");
    check(fl_epochs >= 1 && fl_learning_rate > 0, "federated: invalid epochs or learning rate");
    check(snapshot_count >= 1 && snapshot_count <= fl_epochs, "federated.snapshots must lie in [1, epochs]");
  }
  if (approach != Approach::Federated) {
    check(attack_concatenation || attack_hierarchical, "attack.architectures must not be empty");
    if (!coreset.full_data) {
      check(coreset.size >= num_nodes && coreset.size <= train_size, "coreset.size must lie in [num_nodes, train_size]");
      check(coreset.center_fraction > 0 && coreset.center_fraction <= 1, "coreset.center_fraction must lie in (0, 1]");
      Index samples = static_cast<Index>(std::llround(static_cast<double>(coreset.size) * (1.0 - coreset.center_fraction)));
      if (!coreset.per_node.empty()) {
        check(static_cast<int>(coreset.per_node.size()) == num_nodes, "coreset.per_node needs one entry per node");
        Index total = 0;
        samples = 0;
        for (auto const &b : coreset.per_node) {
          total += b.centers + b.samples;
          samples += b.samples;
        }
        check(total == coreset.size, "coreset.per_node must sum to coreset.size");
      }
      if (coreset.centers_only) { check(samples == 0, "coreset.centers_only conflicts with a nonzero sample budget"); }
      check(samples <= membership.leaked_members, "coreset: sample budget exceeds membership.leaked_members");
    }
  }
}

Dataset load_dataset(ExperimentConfig const &cfg)
{
  return cfg.csv ? load_csv(*cfg.csv) : generate_synthetic(cfg.synth);
}

void validate_against(ExperimentConfig const &cfg, Dataset const &data)
{
  cfg.validate();
  if (cfg.train_size + cfg.test_size > data.size()) {
    throw ConfigError("partition: train_size + test_size = " + std::to_string(cfg.train_size + cfg.test_size) +
                      " exceeds the " + std::to_string(data.size()) + " records available");
  }
  if (cfg.approach != Approach::Federated && !cfg.coreset.full_data) {
    Index const smallest = cfg.train_size / cfg.num_nodes;
    for (auto const &b : cfg.coreset.per_node) {
      if (b.centers > smallest || b.samples > smallest) { throw ConfigError("coreset.per_node exceeds a node's size"); }
    }
  }
}

MlpSpec target_spec(ExperimentConfig const &cfg, Index feature_dim, int num_classes)
{
  MlpSpec s;
  s.layer_widths.push_back(feature_dim);
  s.layer_widths.insert(s.layer_widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  s.layer_widths.push_back(num_classes);
  s.hidden_activation = cfg.activation;
  return s;
}

std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t stage)
{
  // splitmix64
  std::uint64_t z = run_seed + 0x9e3779b97f4a7c15ULL * (stage + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

enum Stage : std::uint64_t
{
  kPartitionSeed = 1,
  kInitSeed,
  kCoresetSeed,
  kSplitSeed,
  kAttackSeed,
  kCentralSeed
};

template <typename F> auto staged(char const *stage, F &&f) -> decltype(f())
{
  try {
    return f();
  } catch (StageError const &) {
    throw;
  } catch (std::exception const &e) {
    throw StageError(stage, e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

CoresetBuild build_distributed_coreset(std::span<Dataset const> shards, CoresetSettings const &settings,
                                       std::uint64_t seed)
{
  CoresetBuild b;
  std::vector<LocalCoreset> locals;
  std::vector<Index> sizes;
  for (auto const &s : shards) { sizes.push_back(s.size()); }
  if (settings.full_data) {
    for (std::size_t n = 0; n < shards.size(); ++n) { locals.push_back(full_data_coreset(shards[n], static_cast<int>(n))); }
    b.coreset = merge(locals);
    return b;
  }
  double const fraction = settings.centers_only ? 1.0 : settings.center_fraction;
  Index const center_pool = static_cast<Index>(std::llround(static_cast<double>(settings.size) * fraction));
  Index const per_node_cap = (center_pool + static_cast<Index>(shards.size()) - 1) / static_cast<Index>(shards.size());
  for (std::size_t n = 0; n < shards.size(); ++n) {
    std::vector<Index> grid = settings.k_grid;
    if (grid.empty()) { grid = default_k_grid(std::clamp<Index>(per_node_cap, 1, shards[n].size())); }
    std::erase_if(grid, [&](Index k) { return k > shards[n].size(); });
    if (grid.empty()) { grid.push_back(1); }
    KmeansConfig kc = settings.kmeans;
    kc.seed = derive_seed(seed, 100 + n);
    b.profiles.push_back(local_cost_profile(shards[n], grid, kc));
  }
  if (!settings.per_node.empty()) {
    b.allocation = allocate_budget(settings.per_node, sizes, settings.size);
  } else {
    b.allocation = allocate_budget(b.profiles, sizes, settings.size, fraction);
  }
  for (std::size_t n = 0; n < shards.size(); ++n) {
    auto const &nb = b.allocation.nodes[n];
    locals.push_back(build_local_coreset(shards[n], static_cast<int>(n), nb.centers, nb.samples,
                                         derive_seed(seed, 200 + n), settings.kmeans));
  }
  b.coreset = merge(locals);
  return b;
}

Mlp<double> train_centralized(WeightedSet<double> const &data, MlpSpec const &spec, TrainConfig cfg,
                              std::uint64_t init_seed)
{
  Rng rng(init_seed);
  return train(Mlp<double>::random(spec, rng), data, cfg);
}

namespace {

std::string fl_notes(ExperimentConfig const &cfg)
{
  std::string n = "target hyperparameters are configuration defaults";
  if (cfg.attack.gradient_encoder == EncoderKind::Dense) {
    n += "; gradient encoder is fully connected over the flattened last-layer gradient (substitutes a CNN)";
  } else {
    n += "; gradient encoder is a column-wise 1-D convolution";
  }
  return n;
}

struct FederatedOutcome
{
  double accuracy = 0;
  std::optional<double> leakage;
  std::int64_t cost = 0;
};

FederatedOutcome federated_pipeline(ExperimentConfig const &cfg, Partition const &part, Dataset const &train_all,
                                    MlpSpec const &spec, int epochs, std::uint64_t seed, bool with_attack)
{
  FederationConfig fc;
  fc.epochs = epochs;
  fc.learning_rate = cfg.fl_learning_rate;
  fc.seed = derive_seed(seed, kInitSeed);
  auto const snaps = snapshot_epoch_selection(epochs, std::min(cfg.snapshot_count, epochs));
  fc.snapshot_epochs = snaps;
  auto const transcript = staged("federated training", [&] { return federated_train(part.shards, spec, fc); });
  FederatedOutcome out;
  out.cost = transcript.scalars_transmitted;
  out.accuracy = test_accuracy(transcript.final_model, part.test.features, part.test.labels);
  if (!with_attack) { return out; }
  out.leakage = staged("federated attack", [&] {
    auto const split = make_membership_split(train_all, part.test, cfg.membership, {}, derive_seed(seed, kSplitSeed));
    auto const sets = build_attack_sets(split, train_all, part.test, [&](RowVector const &x, int y) {
      return extract_fl_features(transcript, snaps, x.transpose(), y).flatten();
    });
    auto const layout = fl_feature_layout(spec, static_cast<int>(snaps.size()), cfg.attack.gradient_encoder);
    auto const model = train_fl_attack(sets.train, layout, cfg.attack, derive_seed(seed, kAttackSeed));
    return attack_accuracy(model, sets.eval);
  });
  return out;
}

// Rescales weights to mean 1 so the step size matches raw-data training;
// relative weights are unchanged.
WeightedSet<double> mean_one_weights(WeightedSet<double> ws)
{
  double total = 0;
  for (double w : ws.weights) { total += w; }
  if (ws.weights.empty() || !(total > 0)) { return ws; }
  double const scale = static_cast<double>(ws.weights.size()) / total;
  for (double &w : ws.weights) { w *= scale; }
  return ws;
}

struct CoresetOutcome
{
  double accuracy = 0;
  std::optional<double> leakage, concatenation, hierarchical;
  std::int64_t cost = 0;
  Index exposed = 0;
  bool full_exposure = false;
  double deficiency = 0;
};

CoresetOutcome coreset_pipeline(ExperimentConfig const &cfg, CoresetSettings const &settings, Partition const &part,
                                Dataset const &train_all, MlpSpec const &spec, std::uint64_t seed, bool with_attack,
                                std::filesystem::path const *dump)
{
  auto const build = staged("coreset construction",
                            [&] { return build_distributed_coreset(part.shards, settings, derive_seed(seed, kCoresetSeed)); });
  auto const &gc = build.coreset;
  if (dump) { write_coreset_csv(gc, *dump); }
  CoresetOutcome out;
  out.exposed = static_cast<Index>(gc.exposed_samples.size());
  for (double d : gc.node_weight_deficiency) { out.deficiency += d; }
  out.cost = coreset_communication_cost(gc.size(), coreset_record_width(train_all.feature_dim(), settings.transmit_weights));
  auto const target = staged("coreset target training", [&] {
    TrainConfig tc = cfg.central;
    tc.seed = derive_seed(seed, kCentralSeed);
    return train_centralized(mean_one_weights(gc.training_set()), spec, tc, derive_seed(seed, kInitSeed));
  });
  out.accuracy = test_accuracy(target, part.test.features, part.test.labels);
  if (!with_attack) { return out; }

  std::unordered_set<RecordId> const exposed(gc.exposed_samples.begin(), gc.exposed_samples.end());
  out.full_exposure = std::all_of(train_all.ids.begin(), train_all.ids.end(), [&](RecordId id) { return exposed.count(id) > 0; });
  staged("coreset attack", [&] {
    if (out.full_exposure) {
      // Every training record is in the coreset: membership is read off directly.
      auto const split = make_membership_split(train_all, part.test, cfg.membership, {}, derive_seed(seed, kSplitSeed));
      auto const sets = build_attack_sets(split, train_all, part.test, [](RowVector const &x, int) { return x; });
      out.leakage = out.concatenation = out.hierarchical = exposure_lookup_accuracy(sets.eval, gc.exposed_samples);
      return 0;
    }
    auto const split =
        make_membership_split(train_all, part.test, cfg.membership, gc.exposed_samples, derive_seed(seed, kSplitSeed));
    auto const sets = build_attack_sets(split, train_all, part.test, [&](RowVector const &x, int) {
      return RowVector(extract_coreset_features(gc, x.transpose()).transpose());
    });
    auto const blocks = gc.node_block_sizes();
    if (cfg.attack_concatenation) {
      auto const m = train_coreset_attack(sets.train, AttackArchitecture::CoresetConcatenation, blocks, cfg.attack,
                                          derive_seed(seed, kAttackSeed));
      out.concatenation = attack_accuracy(m, sets.eval);
    }
    if (cfg.attack_hierarchical) {
      auto const m = train_coreset_attack(sets.train, AttackArchitecture::CoresetHierarchical, blocks, cfg.attack,
                                          derive_seed(seed, kAttackSeed));
      out.hierarchical = attack_accuracy(m, sets.eval);
    }
    out.leakage = std::max(out.concatenation.value_or(0.0), out.hierarchical.value_or(0.0));
    return 0;
  });
  return out;
}

std::string coreset_notes(CoresetSettings const &s, CoresetOutcome const &o)
{
  std::string n = "target hyperparameters are configuration defaults";
  if (s.full_data) {
    n += "; full-data coreset, leakage by exposed-sample lookup";
  } else {
    n += "; center labels decoded from label-augmented clustering; weights rescaled to mean 1 for training";
    if (s.centers_only) { n += "; centers only"; }
    if (o.full_exposure) { n += "; every training record exposed, leakage by exposed-sample lookup"; }
    if (o.deficiency > 0) {
      std::ostringstream os;
      os << "; clipped center weight deficiency " << o.deficiency;
      n += os.str();
    }
  }
  return n;
}

std::string coreset_parameter(CoresetSettings const &s, Index size)
{
  return "size=" + std::to_string(size) + (s.centers_only ? ",centers_only" : "") + (s.full_data ? ",full_data" : "");
}

std::vector<ReportRow> run_seed(ExperimentConfig const &cfg, Dataset const &data, std::uint64_t seed,
                                std::string const &hash)
{
  std::vector<ReportRow> rows;
  auto const part = staged("partition", [&] {
    return partition(data, cfg.train_size, cfg.test_size, cfg.num_nodes, derive_seed(seed, kPartitionSeed));
  });
  auto const train_all = part.train();
  auto const spec = target_spec(cfg, data.feature_dim(), data.num_classes);
  auto const seed_str = std::to_string(seed);

  if (cfg.approach != Approach::Coreset) {
    auto const t0 = std::chrono::steady_clock::now();
    auto const o = federated_pipeline(cfg, part, train_all, spec, cfg.fl_epochs, seed, true);
    ReportRow r;
    r.approach = "federated";
    r.seed = seed_str;
    r.parameter = "epochs=" + std::to_string(cfg.fl_epochs);
    r.accuracy = o.accuracy;
    r.leakage = o.leakage;
    r.cost = o.cost;
    r.wall_clock_s = seconds_since(t0);
    r.config_hash = hash;
    r.notes = fl_notes(cfg);
    rows.push_back(r);
  }
  if (cfg.approach != Approach::Federated) {
    auto const t0 = std::chrono::steady_clock::now();
    CoresetSettings settings = cfg.coreset;
    std::filesystem::path dump;
    if (cfg.dump_coreset) {
      std::filesystem::create_directories(cfg.output_dir);
      dump = cfg.output_dir / ("coreset_dump_seed" + seed_str + ".csv");
    }
    auto const o = coreset_pipeline(cfg, settings, part, train_all, spec, seed, true, cfg.dump_coreset ? &dump : nullptr);
    ReportRow r;
    r.approach = "coreset";
    r.seed = seed_str;
    r.parameter = coreset_parameter(settings, settings.full_data ? cfg.train_size : settings.size);
    r.accuracy = o.accuracy;
    r.leakage = o.leakage;
    r.leakage_concatenation = o.concatenation;
    r.leakage_hierarchical = o.hierarchical;
    r.cost = o.cost;
    r.exposed_samples = o.exposed;
    r.wall_clock_s = seconds_since(t0);
    r.config_hash = hash;
    r.notes = coreset_notes(settings, o);
    rows.push_back(r);
  }
  if (cfg.include_raw_baseline) {
    auto const t0 = std::chrono::steady_clock::now();
    TrainConfig tc = cfg.central;
    tc.seed = derive_seed(seed, kCentralSeed);
    auto const model = staged("raw training", [&] {
      return train_centralized(train_all.as_weighted(), spec, tc, derive_seed(seed, kInitSeed));
    });
    ReportRow r;
    r.approach = "raw";
    r.seed = seed_str;
    r.parameter = "size=" + std::to_string(cfg.train_size);
    r.accuracy = test_accuracy(model, part.test.features, part.test.labels);
    r.cost = coreset_communication_cost(cfg.train_size, coreset_record_width(data.feature_dim()));
    r.exposed_samples = cfg.train_size;
    r.wall_clock_s = seconds_since(t0);
    r.config_hash = hash;
    r.notes = "centralized training on the raw training data";
    rows.push_back(r);
  }
  return rows;
}

std::optional<double> median_opt(std::vector<std::optional<double>> const &v)
{
  std::vector<double> xs;
  for (auto const &x : v) {
    if (x) { xs.push_back(*x); }
  }
  if (xs.empty()) { return std::nullopt; }
  return median(xs);
}

// Runs fn(seed) for every seed, at most `workers` at a time; results come
// back in seed order.
template <typename T, typename F>
std::vector<T> for_each_seed(std::vector<std::uint64_t> const &seeds, int workers, F const &fn,
                             std::function<void(T const &)> const &done = {})
{
  std::vector<T> out;
  for (std::size_t start = 0; start < seeds.size(); start += static_cast<std::size_t>(workers)) {
    std::size_t const end = std::min(seeds.size(), start + static_cast<std::size_t>(workers));
    if (workers == 1) {
      out.push_back(fn(seeds[start]));
      if (done) { done(out.back()); }
      continue;
    }
    std::vector<std::future<T>> fut;
    for (std::size_t i = start; i < end; ++i) { fut.push_back(std::async(std::launch::async, fn, seeds[i])); }
    for (auto &f : fut) {
      out.push_back(f.get());
      if (done) { done(out.back()); }
    }
  }
  return out;
}

} // namespace

double median(std::vector<double> v)
{
  require(!v.empty(), "median of an empty list");
  std::sort(v.begin(), v.end());
  std::size_t const n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double spearman(std::vector<double> const &x, std::vector<double> const &y)
{
  require(x.size() == y.size() && x.size() >= 2, "spearman: need two equally long lists of length >= 2");
  auto ranks = [](std::vector<double> const &v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) { ++j; }
      double const avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) { r[idx[k]] = avg; }
      i = j + 1;
    }
    return r;
  };
  auto const rx = ranks(x), ry = ranks(y);
  double const mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
  double const my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) { return 0.0; }
  return sxy / std::sqrt(sxx * syy);
}

TradeoffReport run_experiment(ExperimentConfig const &cfg, RowSink const &on_row)
{
  cfg.validate();
  auto const data = staged("dataset", [&] { return load_dataset(cfg); });
  validate_against(cfg, data);
  TradeoffReport rep;
  rep.name = cfg.name;
  rep.config_hash = cfg.hash();
  std::function<void(std::vector<ReportRow> const &)> sink;
  if (on_row) {
    sink = [&](std::vector<ReportRow> const &rows) {
      for (auto const &r : rows) { on_row(r); }
    };
  }
  auto const per_seed = for_each_seed<std::vector<ReportRow>>(
      cfg.seeds, cfg.workers, [&](std::uint64_t s) { return run_seed(cfg, data, s, rep.config_hash); }, sink);
  for (auto const &rows : per_seed) { rep.rows.insert(rep.rows.end(), rows.begin(), rows.end()); }

  std::vector<std::string> approaches;
  for (auto const &r : rep.rows) {
    if (std::find(approaches.begin(), approaches.end(), r.approach) == approaches.end()) { approaches.push_back(r.approach); }
  }
  for (auto const &a : approaches) {
    std::vector<ReportRow const *> rs;
    for (auto const &r : rep.rows) {
      if (r.approach == a) { rs.push_back(&r); }
    }
    ReportRow m = *rs.front();
    m.seed = "median";
    std::vector<double> acc, wall, exposed;
    std::vector<std::optional<double>> leak, lc, lh;
    for (auto const *r : rs) {
      acc.push_back(r->accuracy);
      wall.push_back(r->wall_clock_s);
      exposed.push_back(static_cast<double>(r->exposed_samples));
      leak.push_back(r->leakage);
      lc.push_back(r->leakage_concatenation);
      lh.push_back(r->leakage_hierarchical);
    }
    m.accuracy = median(acc);
    m.wall_clock_s = median(wall);
    m.exposed_samples = static_cast<Index>(std::llround(median(exposed)));
    m.leakage = median_opt(leak);
    m.leakage_concatenation = median_opt(lc);
    m.leakage_hierarchical = median_opt(lh);
    rep.rows.push_back(m);
  }
  return rep;
}

CurveTable sweep(ExperimentConfig const &cfg, std::string const &axis, std::vector<long> const &values)
{
  cfg.validate();
  if (axis != "epochs" && axis != "coreset_size") { throw ConfigError("sweep axis must be epochs or coreset_size"); }
  if (values.empty()) { throw ConfigError("sweep needs at least one value"); }
  if (!std::is_sorted(values.begin(), values.end())) { throw ConfigError("sweep values must be sorted ascending"); }
  if (values.front() < 1) { throw ConfigError("sweep values must be positive"); }
  auto const data = staged("dataset", [&] { return load_dataset(cfg); });
  validate_against(cfg, data);
  if (axis == "coreset_size" && values.back() > cfg.train_size) {
    throw ConfigError("coreset_size sweep values must not exceed partition.train_size");
  }
  if (axis == "epochs" && cfg.hidden.empty() && cfg.sweep_with_attacks) {
    throw ConfigError("target.hidden: the federated attack needs at least one hidden layer");
  }

  auto run = [&](std::uint64_t seed) {
    std::vector<CurvePoint> pts;
    auto const part = staged("partition", [&] {
      return partition(data, cfg.train_size, cfg.test_size, cfg.num_nodes, derive_seed(seed, kPartitionSeed));
    });
    auto const train_all = part.train();
    auto const spec = target_spec(cfg, data.feature_dim(), data.num_classes);
    auto const seed_str = std::to_string(seed);
    if (axis == "epochs") {
      if (!cfg.sweep_with_attacks) {
        // Training is prefix-deterministic, so one run to the largest epoch
        // count serves every value.
        FederationConfig fc;
        fc.epochs = static_cast<int>(values.back());
        fc.learning_rate = cfg.fl_learning_rate;
        fc.seed = derive_seed(seed, kInitSeed);
        fc.snapshot_epochs.assign(values.begin(), values.end());
        auto const t = staged("federated training", [&] { return federated_train(part.shards, spec, fc); });
        for (long v : values) {
          pts.push_back({v, seed_str, test_accuracy(t.snapshot_at(static_cast<int>(v)).model, part.test.features, part.test.labels), {}});
        }
      } else {
        for (long v : values) {
          auto const o = federated_pipeline(cfg, part, train_all, spec, static_cast<int>(v), seed, true);
          pts.push_back({v, seed_str, o.accuracy, o.leakage});
        }
      }
    } else {
      for (long v : values) {
        CoresetSettings s = cfg.coreset;
        s.per_node.clear();
        s.size = v;
        s.full_data = v == cfg.train_size;
        auto const o = coreset_pipeline(cfg, s, part, train_all, spec, seed, cfg.sweep_with_attacks, nullptr);
        pts.push_back({v, seed_str, o.accuracy, o.leakage});
      }
    }
    return pts;
  };
  auto const per_seed = for_each_seed<std::vector<CurvePoint>>(cfg.seeds, cfg.workers, run);

  CurveTable table;
  table.axis = axis;
  for (auto const &pts : per_seed) { table.points.insert(table.points.end(), pts.begin(), pts.end()); }
  for (long v : values) {
    std::vector<double> acc;
    std::vector<std::optional<double>> leak;
    for (auto const &pts : per_seed) {
      for (auto const &p : pts) {
        if (p.value == v) {
          acc.push_back(p.accuracy);
          leak.push_back(p.leakage);
        }
      }
    }
    table.points.push_back({v, "median", median(acc), median_opt(leak)});
  }
  return table;
}

ReportFormat parse_format(std::string const &s)
{
  if (s == "csv") { return ReportFormat::Csv; }
  if (s == "json") { return ReportFormat::Json; }
  throw ConfigError("unknown format '" + s + "' (expected csv or json)");
}

namespace {

std::string fmt_double(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_opt(std::optional<double> const &v) { return v ? fmt_double(*v) : std::string(); }

std::string csv_escape(std::string const &s)
{
  if (s.find_first_of(",\"\n") == std::string::npos) { return s; }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') { out += '"'; }
    out += c;
  }
  return out + "\"";
}

constexpr char const *kCsvHeader = "approach,seed,parameter,accuracy,leakage,leakage_concatenation,leakage_hierarchical,"
                                   "cost,exposed_samples,wall_clock_s,config_hash,notes";

std::vector<std::string> parse_csv_line(std::string const &line)
{
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char const c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

} // namespace

std::string report_csv(TradeoffReport const &report)
{
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (auto const &r : report.rows) {
    os << csv_escape(r.approach) << ',' << csv_escape(r.seed) << ',' << csv_escape(r.parameter) << ','
       << fmt_double(r.accuracy) << ',' << fmt_opt(r.leakage) << ',' << fmt_opt(r.leakage_concatenation) << ','
       << fmt_opt(r.leakage_hierarchical) << ',' << r.cost << ',' << r.exposed_samples << ','
       << fmt_double(r.wall_clock_s) << ',' << r.config_hash << ',' << csv_escape(r.notes) << '\n';
  }
  return os.str();
}

json report_json(TradeoffReport const &report)
{
  json rows = json::array();
  auto opt = [](std::optional<double> const &v) { return v ? json(*v) : json(nullptr); };
  for (auto const &r : report.rows) {
    rows.push_back({{"approach", r.approach},
                    {"seed", r.seed},
                    {"parameter", r.parameter},
                    {"accuracy", r.accuracy},
                    {"leakage", opt(r.leakage)},
                    {"leakage_concatenation", opt(r.leakage_concatenation)},
                    {"leakage_hierarchical", opt(r.leakage_hierarchical)},
                    {"cost", r.cost},
                    {"exposed_samples", r.exposed_samples},
                    {"wall_clock_s", r.wall_clock_s},
                    {"config_hash", r.config_hash},
                    {"notes", r.notes}});
  }
  return {{"schema_version", 1}, {"name", report.name}, {"config_hash", report.config_hash}, {"rows", rows}};
}

std::filesystem::path emit_report(TradeoffReport const &report, ReportFormat format, std::filesystem::path const &dir)
{
  require(!report.rows.empty(), "emit_report: no rows");
  std::filesystem::create_directories(dir);
  auto const path = dir / (format == ReportFormat::Csv ? "report.csv" : "report.json");
  std::ofstream out(path, std::ios::binary);
  if (!out) { throw std::runtime_error("cannot write " + path.string()); }
  if (format == ReportFormat::Csv) {
    out << report_csv(report);
  } else {
    out << report_json(report).dump(2) << '\n';
  }
  if (!out) { throw std::runtime_error("write failed: " + path.string()); }
  return path;
}

std::filesystem::path emit_curve(CurveTable const &curve, std::filesystem::path const &dir)
{
  std::filesystem::create_directories(dir);
  auto const path = dir / ("curve_" + curve.axis + ".csv");
  std::ofstream out(path, std::ios::binary);
  if (!out) { throw std::runtime_error("cannot write " + path.string()); }
  out << curve.axis << ",seed,accuracy,leakage\n";
  for (auto const &p : curve.points) {
    out << p.value << ',' << p.seed << ',' << fmt_double(p.accuracy) << ',' << fmt_opt(p.leakage) << '\n';
  }
  return path;
}

TradeoffReport read_report_json(std::filesystem::path const &path)
{
  std::ifstream in(path);
  if (!in) { throw ParseError("cannot open " + path.string()); }
  json j;
  try {
    j = json::parse(in);
  } catch (json::parse_error const &e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  TradeoffReport rep;
  auto opt = [](json const &v) { return v.is_null() ? std::optional<double>{} : std::optional<double>{v.get<double>()}; };
  try {
    rep.name = j.at("name").get<std::string>();
    rep.config_hash = j.at("config_hash").get<std::string>();
    for (auto const &r : j.at("rows")) {
      ReportRow row;
      row.approach = r.at("approach").get<std::string>();
      row.seed = r.at("seed").get<std::string>();
      row.parameter = r.at("parameter").get<std::string>();
      row.accuracy = r.at("accuracy").get<double>();
      row.leakage = opt(r.at("leakage"));
      row.leakage_concatenation = opt(r.at("leakage_concatenation"));
      row.leakage_hierarchical = opt(r.at("leakage_hierarchical"));
      row.cost = r.at("cost").get<std::int64_t>();
      row.exposed_samples = r.at("exposed_samples").get<Index>();
      row.wall_clock_s = r.at("wall_clock_s").get<double>();
      row.config_hash = r.at("config_hash").get<std::string>();
      row.notes = r.at("notes").get<std::string>();
      rep.rows.push_back(std::move(row));
    }
  } catch (json::exception const &e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return rep;
}

TradeoffReport read_report_csv(std::filesystem::path const &path)
{
  std::ifstream in(path);
  if (!in) { throw ParseError("cannot open " + path.string()); }
  std::string line;
  std::getline(in, line);
  if (line != kCsvHeader) { throw ParseError("unexpected report header", 1); }
  TradeoffReport rep;
  long lineno = 1;
  auto num = [&](std::string const &s) { return s.empty() ? std::optional<double>{} : std::optional<double>{std::stod(s)}; };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) { continue; }
    auto f = parse_csv_line(line);
    if (f.size() != 12) { throw ParseError("expected 12 fields", lineno); }
    ReportRow r;
    r.approach = f[0];
    r.seed = f[1];
    r.parameter = f[2];
    r.accuracy = std::stod(f[3]);
    r.leakage = num(f[4]);
    r.leakage_concatenation = num(f[5]);
    r.leakage_hierarchical = num(f[6]);
    r.cost = std::stoll(f[7]);
    r.exposed_samples = std::stoll(f[8]);
    r.wall_clock_s = std::stod(f[9]);
    r.config_hash = f[10];
    r.notes = f[11];
    if (rep.config_hash.empty()) { rep.config_hash = r.config_hash; }
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

} // namespace mia
