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

#include "mia/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

namespace mia {

Index AttackSet::count(int label) const
{
  return static_cast<Index>(std::count(membership.begin(), membership.end(), label));
}

namespace {

void append_rows(AttackSet &set, std::vector<RecordId> const &ids, Dataset const &source,
                 std::unordered_map<RecordId, Index> const &index, int membership, Featurizer const &featurizer,
                 std::vector<RowVector> &rows)
{
  for (auto id : ids) {
    auto it = index.find(id);
    require(it != index.end(), "attack sets: record id not found in its source dataset");
    rows.push_back(featurizer(source.features.row(it->second), source.labels[static_cast<std::size_t>(it->second)]));
    set.membership.push_back(membership);
    set.ids.push_back(id);
  }
}

AttackSet assemble(MembershipSplit const &, std::vector<RecordId> const &members, std::vector<RecordId> const &nonmembers,
                   Dataset const &train, Dataset const &test, Featurizer const &featurizer)
{
  AttackSet set;
  std::vector<RowVector> rows;
  append_rows(set, members, train, train.row_index(), kIn, featurizer, rows);
  append_rows(set, nonmembers, test, test.row_index(), kOut, featurizer, rows);
  Index const width = rows.front().size();
  set.features.resize(static_cast<Index>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].size() == width, "attack sets: featurizer returned vectors of different lengths");
    set.features.row(static_cast<Index>(i)) = rows[i];
  }
  return set;
}

} // namespace

AttackSets build_attack_sets(MembershipSplit const &split, Dataset const &train, Dataset const &test,
                             Featurizer const &featurizer)
{
  split.validate(train.ids, test.ids);
  require(!split.leaked_members.empty() && !split.leaked_nonmembers.empty(),
          "attack sets: the attack training set needs both IN and OUT records");
  require(!split.eval_members.empty() && !split.eval_nonmembers.empty(),
          "attack sets: the evaluation set needs both IN and OUT records");
  return {assemble(split, split.leaked_members, split.leaked_nonmembers, train, test, featurizer),
          assemble(split, split.eval_members, split.eval_nonmembers, train, test, featurizer)};
}

RowVector FlAttackFeatures::flatten() const
{
  Index width = 0;
  for (auto const &s : snapshots) {
    width += s.last_layer_gradient.size() + s.last_hidden.size() + s.output.size() + s.label_one_hot.size() + 1;
  }
  RowVector out(width);
  Index at = 0;
  auto put = [&](Vector const &v) {
    out.segment(at, v.size()) = v.transpose();
    at += v.size();
  };
  for (auto const &s : snapshots) {
    put(s.last_layer_gradient);
    put(s.last_hidden);
    put(s.output);
    put(s.label_one_hot);
    out(at++) = s.loss;
  }
  return out;
}

FlAttackFeatures extract_fl_features(TrainingTranscript const &transcript, std::span<int const> epochs,
                                     Vector const &record, int label)
{
  require(!epochs.empty(), "fl features: no snapshot epochs requested");
  FlAttackFeatures f;
  for (int epoch : epochs) {
    auto const &model = transcript.snapshot_at(epoch).model;
    require(model.depth() >= 2, "fl features: target model needs a hidden layer");
    auto const trace = forward(model, record, label);
    auto const grads = backward(model, record, label);
    auto const &G = grads.layers.back();
    FlSnapshotFeatures s;
    s.epoch = epoch;
    s.last_layer_gradient = Eigen::Map<Vector const>(G.data(), G.size());
    s.last_hidden = trace.activations.back();
    s.output = trace.output;
    s.label_one_hot = one_hot(label, static_cast<int>(model.spec().output_width()));
    s.loss = *trace.loss;
    f.snapshots.push_back(std::move(s));
  }
  return f;
}

std::vector<InputBlock> fl_feature_layout(MlpSpec const &target, int num_snapshots, EncoderKind gradient_encoder)
{
  require(target.depth() >= 2, "fl layout: target model needs a hidden layer");
  require(num_snapshots >= 1, "fl layout: need at least one snapshot");
  auto const &w = target.layer_widths;
  Index const hidden = w[w.size() - 2];
  Index const classes = target.output_width();
  std::vector<InputBlock> blocks;
  Index at = 0;
  for (int s = 0; s < num_snapshots; ++s) {
    InputBlock g{at, (hidden + 1) * classes, gradient_encoder, gradient_encoder == EncoderKind::ColumnConv ? hidden + 1 : 0};
    blocks.push_back(g);
    at += g.width;
    for (Index width : {hidden, classes, classes, Index{1}}) {
      blocks.push_back({at, width, EncoderKind::Dense, 0});
      at += width;
    }
  }
  return blocks;
}

Vector extract_coreset_features(GlobalCoreset const &coreset, Vector const &record)
{
  require(coreset.num_centers() > 0, "coreset features: no centers");
  require(record.size() == coreset.centers.cols(), "coreset features: record width does not match centers");
  return (coreset.centers.rowwise() - record.transpose()).rowwise().norm();
}

std::string to_string(AttackArchitecture a)
{
  switch (a) {
  case AttackArchitecture::FlHierarchical: return "fl_hierarchical";
  case AttackArchitecture::CoresetConcatenation: return "coreset_concatenation";
  case AttackArchitecture::CoresetHierarchical: return "coreset_hierarchical";
  }
  return "unknown";
}

Standardizer Standardizer::fit(Matrix const &X)
{
  require(X.rows() > 0, "standardizer: empty input");
  Standardizer s;
  s.mean = X.colwise().mean();
  s.scale = ((X.rowwise() - s.mean).array().square().colwise().sum() / static_cast<double>(X.rows())).sqrt().matrix();
  for (Index j = 0; j < s.scale.size(); ++j) {
    if (!(s.scale(j) > 1e-12)) { s.scale(j) = 1.0; }
  }
  return s;
}

Matrix Standardizer::apply(Matrix const &X) const
{
  require(X.cols() == mean.size(), "standardizer: width mismatch");
  return ((X.rowwise() - mean).array().rowwise() / scale.array()).matrix();
}

std::vector<int> AttackModel::predict(Matrix const &features) const
{
  Matrix const P = network.forward(standardize ? standardizer.apply(features) : features);
  std::vector<int> out(static_cast<std::size_t>(P.rows()));
  for (Index r = 0; r < P.rows(); ++r) { out[static_cast<std::size_t>(r)] = P(r, kIn) >= P(r, kOut) ? kIn : kOut; }
  return out;
}

namespace {

void check_training_set(AttackSet const &train)
{
  require(train.size() > 0, "attack training: empty training set");
  require(static_cast<Index>(train.membership.size()) == train.size(), "attack training: label count mismatch");
  require(train.count(kIn) > 0 && train.count(kOut) > 0, "attack training: both IN and OUT samples are required");
}

AttackModel fit_attack(AttackSet const &train, AttackArchitecture arch, std::vector<InputBlock> blocks,
                       AttackConfig const &cfg, std::uint64_t seed)
{
  AttackModel m;
  m.architecture = arch;
  m.standardize = cfg.standardize;
  if (cfg.standardize) { m.standardizer = Standardizer::fit(train.features); }
  BlockNetworkSpec spec;
  spec.input_width = train.features.cols();
  spec.blocks = std::move(blocks);
  spec.encoder_width = cfg.encoder_width;
  spec.conv_filters = cfg.conv_filters;
  spec.combiner_hidden = cfg.combiner_hidden;
  Rng rng(seed);
  m.network = BlockNetwork(spec, rng);
  TrainConfig tc{cfg.epochs, cfg.learning_rate, cfg.batch_size, seed + 1};
  m.network.fit(cfg.standardize ? m.standardizer.apply(train.features) : train.features, train.membership, tc);
  return m;
}

} // namespace

AttackModel train_fl_attack(AttackSet const &train, std::vector<InputBlock> layout, AttackConfig const &cfg,
                            std::uint64_t seed)
{
  check_training_set(train);
  require(!layout.empty(), "fl attack: empty feature layout");
  Index covered = 0;
  for (auto const &b : layout) { covered = std::max(covered, b.offset + b.width); }
  require(covered == train.features.cols(), "fl attack: layout does not cover the feature vector");
  return fit_attack(train, AttackArchitecture::FlHierarchical, std::move(layout), cfg, seed);
}

AttackModel train_coreset_attack(AttackSet const &train, AttackArchitecture architecture,
                                 std::span<Index const> block_sizes, AttackConfig const &cfg, std::uint64_t seed)
{
  check_training_set(train);
  require(architecture != AttackArchitecture::FlHierarchical, "coreset attack: not a coreset architecture");
  std::vector<InputBlock> blocks;
  if (architecture == AttackArchitecture::CoresetHierarchical) {
    require(!block_sizes.empty(), "coreset attack: hierarchical architecture needs node boundaries");
    Index at = 0;
    for (Index w : block_sizes) {
      require(w >= 1, "coreset attack: empty node block");
      blocks.push_back({at, w, EncoderKind::Dense, 0});
      at += w;
    }
    require(at == train.features.cols(), "coreset attack: node boundaries do not match the distance vector length");
  }
  return fit_attack(train, architecture, std::move(blocks), cfg, seed);
}

double attack_accuracy(AttackModel const &model, AttackSet const &eval)
{
  require(eval.size() > 0, "attack accuracy: empty evaluation set");
  auto const pred = model.predict(eval.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) { hits += pred[i] == eval.membership[i] ? 1 : 0; }
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double exposure_lookup_accuracy(AttackSet const &eval, std::span<RecordId const> exposed)
{
  require(eval.size() > 0, "exposure lookup: empty evaluation set");
  std::unordered_set<RecordId> const known(exposed.begin(), exposed.end());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < eval.ids.size(); ++i) {
    int const guess = known.count(eval.ids[i]) ? kIn : kOut;
    hits += guess == eval.membership[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(eval.ids.size());
}

void write_attack_csv(AttackSet const &set, std::filesystem::path const &path)
{
  std::ofstream out(path);
  if (!out) { throw std::runtime_error("cannot write " + path.string()); }
  out.precision(17);
  for (Index r = 0; r < set.size(); ++r) {
    out << set.membership[static_cast<std::size_t>(r)];
    for (Index c = 0; c < set.features.cols(); ++c) { out << ',' << set.features(r, c); }
    out << '\n';
  }
}

} // namespace mia
