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

#include "mia/fedsim.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <numeric>

namespace mia {

void FederationConfig::validate() const
{
  require(epochs >= 1, "federation: epochs must be positive");
  require(learning_rate > 0, "federation: learning rate must be positive");
  for (int e : snapshot_epochs) { require(e >= 1 && e <= epochs, "federation: snapshot epoch outside [1, epochs]"); }
}

Snapshot const &TrainingTranscript::snapshot_at(int epoch) const
{
  auto it = std::find_if(snapshots.begin(), snapshots.end(), [&](Snapshot const &s) { return s.epoch == epoch; });
  if (it == snapshots.end()) { throw DomainError("transcript has no snapshot for epoch " + std::to_string(epoch)); }
  return *it;
}

TrainingTranscript federated_train(std::span<Dataset const> shards, Mlp<double> initial, FederationConfig const &cfg)
{
  cfg.validate();
  require(!shards.empty(), "federation: no nodes");
  MlpSpec const spec = initial.spec();
  double total = 0;
  for (auto const &s : shards) {
    require(s.size() > 0, "federation: empty node dataset");
    require(s.feature_dim() == spec.input_width(), "federation: node feature width does not match model input");
    total += static_cast<double>(s.size());
  }
  std::vector<WeightedSet<double>> local;
  std::vector<std::vector<Index>> rows;
  for (auto const &s : shards) {
    local.push_back(s.as_weighted());
    local.back().validate(spec.input_width(), spec.output_width());
    rows.emplace_back(static_cast<std::size_t>(s.size()));
    std::iota(rows.back().begin(), rows.back().end(), Index{0});
  }

  std::vector<int> keep = cfg.snapshot_epochs;
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());

  TrainingTranscript t;
  Mlp<double> global = std::move(initial);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Mlp<double> next(spec);
    for (std::size_t n = 0; n < shards.size(); ++n) {
      auto g = batch_gradient(global, local[n], std::span<Index const>(rows[n]));
      auto node_model = gd_step(global, g, cfg.learning_rate);
      double const share = static_cast<double>(shards[n].size()) / total;
      for (Index l = 0; l < next.depth(); ++l) { next.layer(l) += share * node_model.layer(l); }
    }
    global = std::move(next);
    if (!global.all_finite()) { throw NumericError("federation: non-finite parameters at epoch " + std::to_string(epoch)); }
    if (std::binary_search(keep.begin(), keep.end(), epoch)) { t.snapshots.push_back({epoch, global}); }
  }
  t.final_model = std::move(global);
  t.scalars_transmitted = fl_communication_cost(spec, cfg.epochs, static_cast<int>(shards.size()));
  return t;
}

TrainingTranscript federated_train(std::span<Dataset const> shards, MlpSpec const &spec, FederationConfig const &cfg)
{
  Rng rng(cfg.seed);
  return federated_train(shards, Mlp<double>::random(spec, rng), cfg);
}

std::vector<int> snapshot_epoch_selection(int epochs, int count)
{
  require(count > 0, "snapshot selection: count must be positive");
  require(count <= epochs, "snapshot selection: count exceeds epochs");
  std::vector<int> out;
  for (int i = 1; i <= count; ++i) {
    // round-half-up of i * epochs / count in integer arithmetic
    std::int64_t const num = 2LL * i * epochs + count;
    int const e = static_cast<int>(num / (2LL * count));
    if (out.empty() || out.back() != e) { out.push_back(e); }
  }
  return out;
}

std::int64_t fl_communication_cost(MlpSpec const &spec, int epochs, int num_nodes)
{
  require(epochs >= 0 && num_nodes >= 1, "fl cost: invalid epochs or node count");
  return spec.param_count() * epochs * 2 * num_nodes;
}

Index coreset_record_width(Index feature_dim, bool with_weights)
{
  require(feature_dim >= 1, "record width: feature dimension must be positive");
  return feature_dim + 1 + (with_weights ? 1 : 0);
}

std::int64_t coreset_communication_cost(Index coreset_size, Index record_width)
{
  require(coreset_size >= 1 && record_width >= 1, "coreset cost: size and width must be positive");
  return static_cast<std::int64_t>(coreset_size) * static_cast<std::int64_t>(record_width);
}

namespace {

constexpr std::array<char, 8> kMagic{'M', 'I', 'A', 'T', 'R', 'S', 'C', '\0'};

template <typename T> void put(std::ostream &o, T v) { o.write(reinterpret_cast<char const *>(&v), sizeof(T)); }

template <typename T> T get(std::istream &i)
{
  T v{};
  i.read(reinterpret_cast<char *>(&v), sizeof(T));
  if (!i) { throw ParseError("transcript: truncated file"); }
  return v;
}

void put_model(std::ostream &o, Mlp<double> const &m)
{
  for (auto const &W : m.layers()) { o.write(reinterpret_cast<char const *>(W.data()), static_cast<std::streamsize>(W.size() * sizeof(double))); }
}

Mlp<double> get_model(std::istream &i, MlpSpec const &spec)
{
  Mlp<double> m(spec);
  for (auto &W : m.layers()) {
    i.read(reinterpret_cast<char *>(W.data()), static_cast<std::streamsize>(W.size() * sizeof(double)));
    if (!i) { throw ParseError("transcript: truncated weights"); }
  }
  return m;
}

} // namespace

void save_transcript(TrainingTranscript const &t, std::filesystem::path const &path)
{
  std::ofstream o(path, std::ios::binary);
  if (!o) { throw std::runtime_error("cannot write " + path.string()); }
  auto const &spec = t.final_model.spec();
  o.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(o, kTranscriptVersion);
  put<std::uint32_t>(o, static_cast<std::uint32_t>(spec.layer_widths.size()));
  for (auto w : spec.layer_widths) { put<std::int64_t>(o, w); }
  put<std::uint8_t>(o, static_cast<std::uint8_t>(spec.hidden_activation));
  put<std::uint8_t>(o, static_cast<std::uint8_t>(spec.output));
  put<std::int64_t>(o, t.scalars_transmitted);
  put_model(o, t.final_model);
  put<std::uint32_t>(o, static_cast<std::uint32_t>(t.snapshots.size()));
  for (auto const &s : t.snapshots) {
    put<std::int32_t>(o, s.epoch);
    put_model(o, s.model);
  }
}

TrainingTranscript load_transcript(std::filesystem::path const &path)
{
  std::ifstream i(path, std::ios::binary);
  if (!i) { throw ParseError("cannot open " + path.string()); }
  std::array<char, 8> magic{};
  i.read(magic.data(), magic.size());
  if (!i || magic != kMagic) { throw ParseError("transcript: bad magic"); }
  auto const version = get<std::uint32_t>(i);
  if (version != kTranscriptVersion) { throw ParseError("transcript: unsupported version " + std::to_string(version)); }
  MlpSpec spec;
  auto const nw = get<std::uint32_t>(i);
  for (std::uint32_t k = 0; k < nw; ++k) { spec.layer_widths.push_back(get<std::int64_t>(i)); }
  spec.hidden_activation = static_cast<Activation>(get<std::uint8_t>(i));
  spec.output = static_cast<OutputKind>(get<std::uint8_t>(i));
  spec.validate();
  TrainingTranscript t;
  t.scalars_transmitted = get<std::int64_t>(i);
  t.final_model = get_model(i, spec);
  auto const ns = get<std::uint32_t>(i);
  for (std::uint32_t k = 0; k < ns; ++k) {
    int const epoch = get<std::int32_t>(i);
    t.snapshots.push_back({epoch, get_model(i, spec)});
  }
  return t;
}

} // namespace mia
