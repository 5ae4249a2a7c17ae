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

// Distributed coreset construction: per-node k-means cost profiles, a
// server-side split of the coreset budget, and per-node local coresets of
// weighted k-means centers plus records drawn by sensitivity sampling.

#ifndef MIA_CORESET_HPP
#define MIA_CORESET_HPP

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "mia/clustering.hpp"
#include "mia/datakit.hpp"

namespace mia {

// Scale of the label coordinate appended before clustering: ceil(sqrt(d)).
double label_scale(Index feature_dim);

// Features with one extra column holding label * label_scale(d).
Matrix augment_with_labels(Dataset const &data);

// Nearest multiple of the label scale, clamped to [0, num_classes - 1].
int decode_label(double augmented_coord, double scale, int num_classes);

struct CostProfile
{
  std::vector<std::pair<Index, double>> entries; // (k, k-means cost), grid order

  // Cost at the smallest k in the grid (k = 1 for the default grid).
  double base_cost() const;
};

// 1, 2, 4, ... plus max_k itself.
std::vector<Index> default_k_grid(Index max_k);

// One k-means run per grid value on the label-augmented node data.
CostProfile local_cost_profile(Dataset const &node, std::span<Index const> k_grid, KmeansConfig base = {});

struct NodeBudget
{
  Index centers = 0;
  Index samples = 0;
  bool operator==(NodeBudget const &) const = default;
};

struct BudgetAllocation
{
  std::vector<NodeBudget> nodes;

  Index total() const;
  Index total_centers() const;
  Index total_samples() const;
};

// Splits total_size into round(total_size * center_fraction) centers and the
// remaining samples, then divides each pool across nodes in proportion to
// their base k-means cost with largest-remainder rounding.
BudgetAllocation allocate_budget(std::span<CostProfile const> profiles, std::span<Index const> node_sizes,
                                 Index total_size, double center_fraction);

// Validates explicit per-node (centers, samples) pairs against the node sizes.
BudgetAllocation allocate_budget(std::vector<NodeBudget> explicit_split, std::span<Index const> node_sizes,
                                 Index total_size);

// Probability of drawing each point: proportional to its squared distance,
// uniform when every distance is zero.
std::vector<double> sampling_probabilities(Vector const &sq_dists);

struct CoresetCenter
{
  RowVector point; // raw feature space
  double weight = 0;
  int label = 0;
};

struct CoresetSample
{
  RecordId id = 0;
  RowVector point;
  int label = 0;
  double weight = 0;
};

struct LocalCoreset
{
  int node_id = 0;
  Index node_size = 0;
  std::vector<CoresetCenter> centers;
  std::vector<CoresetSample> samples;
  std::uint64_t seed = 0;
  double local_cost = 0;
  double weight_deficiency = 0; // total negative center weight clipped to zero

  double total_weight() const;
};

LocalCoreset build_local_coreset(Dataset const &node, int node_id, Index num_centers, Index num_samples,
                                 std::uint64_t seed, KmeansConfig base = {});

// Every record of the node as a weight-1 sample.
LocalCoreset full_data_coreset(Dataset const &node, int node_id);

struct GlobalCoreset
{
  Matrix centers;
  std::vector<double> center_weights;
  std::vector<int> center_labels;
  std::vector<std::pair<Index, Index>> node_center_ranges; // [begin, end) into centers, by node

  Matrix samples;
  std::vector<double> sample_weights;
  std::vector<int> sample_labels;
  std::vector<RecordId> sample_ids;

  std::vector<RecordId> exposed_samples; // unique, ascending
  std::vector<double> node_weight_sums;
  std::vector<double> node_weight_deficiency;

  Index num_centers() const { return centers.rows(); }
  Index num_samples() const { return samples.rows(); }
  Index size() const { return num_centers() + num_samples(); }
  Index feature_dim() const;

  // Centers first, then samples, each in node order.
  WeightedSet<double> training_set() const;

  // Sizes of the per-node center blocks.
  std::vector<Index> node_block_sizes() const;
};

GlobalCoreset merge(std::span<LocalCoreset const> locals);

// One row per weighted point: weight,label,features. Centers precede samples.
void write_coreset_csv(GlobalCoreset const &coreset, std::filesystem::path const &path);

} // namespace mia

#endif // MIA_CORESET_HPP
