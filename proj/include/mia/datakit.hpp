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

#ifndef MIA_DATAKIT_HPP
#define MIA_DATAKIT_HPP

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mia/core.hpp"
#include "mia/nn.hpp"

namespace mia {

// Binary feature records with class labels. ids[i] is the identity of row i
// in the source dataset; subsets carry the ids of the rows they copied.
struct Dataset
{
  Matrix features;
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<RecordId> ids;
  std::string provenance;

  Index size() const { return features.rows(); }
  Index feature_dim() const { return features.cols(); }

  // Rows by position, not by id.
  Dataset subset(std::span<Index const> rows) const;
  WeightedSet<double> as_weighted() const;
  std::unordered_map<RecordId, Index> row_index() const;
  void validate() const;
};

Dataset concat(std::span<Dataset const> parts);

struct SynthSpec
{
  Index num_records = 1000;
  Index feature_dim = 64;
  int num_classes = 10;
  double flip_rate = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

Dataset load_csv(std::filesystem::path const &path);
void save_csv(Dataset const &data, std::filesystem::path const &path);

// One random binary prototype per class; each record flips every prototype
// bit independently with probability flip_rate. Record i has class i % C.
Dataset generate_synthetic(SynthSpec const &spec);

struct Partition
{
  std::vector<Dataset> shards; // D_train split across nodes
  Dataset test;                // D_test

  Dataset train() const { return concat(shards); }
};

Partition partition(Dataset const &data, Index train_size, Index test_size, int num_nodes, std::uint64_t seed);

struct MembershipSizes
{
  Index leaked_members = 0;     // |S_train|
  Index leaked_nonmembers = 0;  // |S_test|
  Index eval_members = 0;       // |S'_train|
  Index eval_nonmembers = 0;    // |S'_test|
};

// Record ids of the four adversary-facing subsets.
struct MembershipSplit
{
  std::vector<RecordId> leaked_members;
  std::vector<RecordId> leaked_nonmembers;
  std::vector<RecordId> eval_members;
  std::vector<RecordId> eval_nonmembers;

  // Checks S_train and S'_train are disjoint subsets of train_ids, and the
  // same for the nonmember sets against test_ids.
  void validate(std::span<RecordId const> train_ids, std::span<RecordId const> test_ids) const;
};

// Seeded disjoint draws. Every id in exposed is placed in the leaked member
// set and therefore never in the evaluation member set.
MembershipSplit make_membership_split(Dataset const &train, Dataset const &test, MembershipSizes const &sizes,
                                      std::span<RecordId const> exposed, std::uint64_t seed);

} // namespace mia

#endif // MIA_DATAKIT_HPP
