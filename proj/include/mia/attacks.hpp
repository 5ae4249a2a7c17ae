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

// Membership inference against the two sharing approaches. Attack samples
// are labelled IN (class 1) for members and OUT (class 0) for non-members.

#ifndef MIA_ATTACKS_HPP
#define MIA_ATTACKS_HPP

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mia/block_network.hpp"
#include "mia/coreset.hpp"
#include "mia/datakit.hpp"
#include "mia/fedsim.hpp"

namespace mia {

inline constexpr int kOut = 0;
inline constexpr int kIn = 1;

struct AttackSet
{
  Matrix features;
  std::vector<int> membership; // kIn / kOut
  std::vector<RecordId> ids;   // provenance of each row

  Index size() const { return features.rows(); }
  Index count(int label) const;
};

struct AttackSets
{
  AttackSet train;
  AttackSet eval;
};

// Maps a record and its class label to an attack feature vector.
using Featurizer = std::function<RowVector(RowVector const &record, int label)>;

// Train set from the leaked members (IN) and leaked non-members (OUT); eval
// set from the held-out pair. Records are looked up by id in train / test.
AttackSets build_attack_sets(MembershipSplit const &split, Dataset const &train, Dataset const &test,
                             Featurizer const &featurizer);

// White-box features from one snapshot of the target model.
struct FlSnapshotFeatures
{
  int epoch = 0;
  Vector last_layer_gradient; // (last hidden width + 1) x classes, column-major
  Vector last_hidden;
  Vector output;
  Vector label_one_hot;
  double loss = 0;
};

struct FlAttackFeatures
{
  std::vector<FlSnapshotFeatures> snapshots;

  // Per snapshot: gradient, activation, output, one-hot label, loss.
  RowVector flatten() const;
};

FlAttackFeatures extract_fl_features(TrainingTranscript const &transcript, std::span<int const> epochs,
                                     Vector const &record, int label);

// Block layout matching FlAttackFeatures::flatten, one block per component
// per snapshot.
std::vector<InputBlock> fl_feature_layout(MlpSpec const &target, int num_snapshots, EncoderKind gradient_encoder);

// Euclidean distances from the record to every center, ordered by node.
Vector extract_coreset_features(GlobalCoreset const &coreset, Vector const &record);

enum class AttackArchitecture
{
  FlHierarchical,
  CoresetConcatenation,
  CoresetHierarchical
};

std::string to_string(AttackArchitecture a);

struct AttackConfig
{
  Index encoder_width = 64;
  std::vector<Index> combiner_hidden{128, 64};
  EncoderKind gradient_encoder = EncoderKind::Dense;
  Index conv_filters = 4;
  int epochs = 80;
  double learning_rate = 0.05;
  Index batch_size = 32;
  bool standardize = true;
};

// Per-dimension z-score fitted on attack training features. Constant
// dimensions are centred but not scaled.
struct Standardizer
{
  RowVector mean;
  RowVector scale;

  static Standardizer fit(Matrix const &X);
  Matrix apply(Matrix const &X) const;
};

struct AttackModel
{
  AttackArchitecture architecture = AttackArchitecture::FlHierarchical;
  bool standardize = true;
  Standardizer standardizer;
  BlockNetwork network;

  // kIn / kOut per row; ties go to kIn.
  std::vector<int> predict(Matrix const &features) const;
};

AttackModel train_fl_attack(AttackSet const &train, std::vector<InputBlock> layout, AttackConfig const &cfg,
                            std::uint64_t seed);

// block_sizes gives the length of each node's distance block, in order.
AttackModel train_coreset_attack(AttackSet const &train, AttackArchitecture architecture,
                                 std::span<Index const> block_sizes, AttackConfig const &cfg, std::uint64_t seed);

// Fraction of eval samples classified correctly.
double attack_accuracy(AttackModel const &model, AttackSet const &eval);

// Accuracy of the rule "IN iff the record is an exposed coreset sample".
// Equals 1.0 whenever every training record is exposed.
double exposure_lookup_accuracy(AttackSet const &eval, std::span<RecordId const> exposed);

// membership,features per row.
void write_attack_csv(AttackSet const &set, std::filesystem::path const &path);

} // namespace mia

#endif // MIA_ATTACKS_HPP
