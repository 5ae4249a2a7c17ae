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

#ifndef MIA_FEDSIM_HPP
#define MIA_FEDSIM_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mia/datakit.hpp"
#include "mia/nn.hpp"

namespace mia {

struct FederationConfig
{
  int epochs = 100;
  double learning_rate = 0.1;
  std::uint64_t seed = 1;
  std::vector<int> snapshot_epochs; // global models kept for the attacker, in [1, epochs]

  void validate() const;
};

struct Snapshot
{
  int epoch = 0;
  Mlp<double> model;
};

struct TrainingTranscript
{
  Mlp<double> final_model;
  std::vector<Snapshot> snapshots;
  std::int64_t scalars_transmitted = 0;

  Snapshot const &snapshot_at(int epoch) const;
};

// Each epoch every node takes one full-batch gradient step from the current
// global model on its shard, then the server replaces the global model with
// the size-weighted average of the node models. Node order fixes the
// reduction order, so results do not depend on scheduling.
TrainingTranscript federated_train(std::span<Dataset const> shards, Mlp<double> initial, FederationConfig const &cfg);

// Same, starting from Mlp::random(spec) seeded with cfg.seed.
TrainingTranscript federated_train(std::span<Dataset const> shards, MlpSpec const &spec, FederationConfig const &cfg);

// round(i * epochs / count) for i = 1..count, deduplicated and ascending.
std::vector<int> snapshot_epoch_selection(int epochs, int count);

// Every node uploads and downloads the full parameter vector once per epoch.
std::int64_t fl_communication_cost(MlpSpec const &spec, int epochs, int num_nodes);

// Features plus the label, plus the weight when it is transmitted.
Index coreset_record_width(Index feature_dim, bool with_weights = false);

std::int64_t coreset_communication_cost(Index coreset_size, Index record_width);

// Little-endian binary dump: "MIATRSC" magic, format version, spec, cost,
// then final model and snapshots as raw doubles.
void save_transcript(TrainingTranscript const &t, std::filesystem::path const &path);
TrainingTranscript load_transcript(std::filesystem::path const &path);

inline constexpr std::uint32_t kTranscriptVersion = 1;

} // namespace mia

#endif // MIA_FEDSIM_HPP
