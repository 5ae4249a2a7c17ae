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

#include "mia/coreset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

namespace mia {

double label_scale(Index feature_dim)
{
  return std::ceil(std::sqrt(static_cast<double>(feature_dim)));
}

Matrix augment_with_labels(Dataset const &data)
{
  double const tau = label_scale(data.feature_dim());
  Matrix aug(data.size(), data.feature_dim() + 1);
  aug.leftCols(data.feature_dim()) = data.features;
  for (Index r = 0; r < data.size(); ++r) { aug(r, data.feature_dim()) = tau * data.labels[static_cast<std::size_t>(r)]; }
  return aug;
}

int decode_label(double augmented_coord, double scale, int num_classes)
{
  long const l = std::lround(augmented_coord / scale);
  return static_cast<int>(std::clamp<long>(l, 0, num_classes - 1));
}

double CostProfile::base_cost() const
{
  require(!entries.empty(), "cost profile is empty");
  auto it = std::min_element(entries.begin(), entries.end(),
                             [](auto const &a, auto const &b) { return a.first < b.first; });
  return it->second;
}

std::vector<Index> default_k_grid(Index max_k)
{
  require(max_k >= 1, "k grid: max_k must be positive");
  std::vector<Index> g;
  for (Index k = 1; k < max_k; k *= 2) { g.push_back(k); }
  g.push_back(max_k);
  return g;
}

CostProfile local_cost_profile(Dataset const &node, std::span<Index const> k_grid, KmeansConfig base)
{
  require(node.size() > 0, "cost profile: empty node");
  require(!k_grid.empty(), "cost profile: empty k grid");
  Matrix const aug = augment_with_labels(node);
  CostProfile p;
  for (Index k : k_grid) {
    base.k = k;
    p.entries.emplace_back(k, kmeans(aug, base).cost);
  }
  return p;
}

Index BudgetAllocation::total() const { return total_centers() + total_samples(); }

Index BudgetAllocation::total_centers() const
{
  Index s = 0;
  for (auto const &n : nodes) { s += n.centers; }
  return s;
}

Index BudgetAllocation::total_samples() const
{
  Index s = 0;
  for (auto const &n : nodes) { s += n.samples; }
  return s;
}

namespace {

// Largest-remainder apportionment; leftover units go to the largest
// fractional parts, ties to the lowest node id.
std::vector<Index> apportion(Index pool, std::vector<double> const &shares)
{
  std::size_t const n = shares.size();
  double const total = std::accumulate(shares.begin(), shares.end(), 0.0);
  std::vector<Index> out(n, 0);
  std::vector<double> frac(n, 0.0);
  Index used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double const quota = static_cast<double>(pool) * shares[i] / total;
    out[i] = static_cast<Index>(std::floor(quota));
    frac[i] = quota - static_cast<double>(out[i]);
    used += out[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; used < pool; ++i, ++used) { ++out[order[i % n]]; }
  return out;
}

void check_feasible(BudgetAllocation const &a, std::span<Index const> node_sizes, Index total_size)
{
  require(a.nodes.size() == node_sizes.size(), "allocation: node count mismatch");
  require(a.total() == total_size, "allocation: per-node budgets do not sum to the coreset size");
  for (std::size_t i = 0; i < node_sizes.size(); ++i) {
    auto const &b = a.nodes[i];
    auto const tag = "allocation: node " + std::to_string(i);
    require(b.centers >= 0 && b.samples >= 0, tag + " has a negative budget");
    if (node_sizes[i] > 0) { require(b.centers >= 1, tag + " needs at least one center"); }
    require(b.centers <= node_sizes[i], tag + " has more centers than records");
    require(b.samples <= node_sizes[i], tag + " has more samples than records");
  }
}

} // namespace

BudgetAllocation allocate_budget(std::span<CostProfile const> profiles, std::span<Index const> node_sizes,
                                 Index total_size, double center_fraction)
{
  require(!node_sizes.empty(), "allocation: no nodes");
  require(profiles.size() == node_sizes.size(), "allocation: one cost profile per node required");
  require(center_fraction >= 0.0 && center_fraction <= 1.0, "allocation: center fraction must lie in [0, 1]");
  Index const data_size = std::accumulate(node_sizes.begin(), node_sizes.end(), Index{0});
  require(total_size >= 1 && total_size <= data_size, "allocation: coreset size must lie in [1, data size]");

  Index const center_pool = static_cast<Index>(std::llround(static_cast<double>(total_size) * center_fraction));
  Index const sample_pool = total_size - center_pool;

  std::vector<double> shares;
  for (auto const &p : profiles) { shares.push_back(std::max(0.0, p.base_cost())); }
  if (std::accumulate(shares.begin(), shares.end(), 0.0) <= 0.0) {
    shares.assign(node_sizes.begin(), node_sizes.end());
  }

  auto centers = apportion(center_pool, shares);
  auto samples = apportion(sample_pool, shares);

  // Every nonempty node keeps at least one center.
  for (std::size_t i = 0; i < centers.size(); ++i) {
    if (node_sizes[i] == 0 || centers[i] > 0) { continue; }
    auto donor = std::max_element(centers.begin(), centers.end()) - centers.begin();
    require(centers[static_cast<std::size_t>(donor)] > 1, "allocation: center pool smaller than the node count");
    --centers[static_cast<std::size_t>(donor)];
    ++centers[i];
  }

  BudgetAllocation a;
  for (std::size_t i = 0; i < centers.size(); ++i) { a.nodes.push_back({centers[i], samples[i]}); }
  check_feasible(a, node_sizes, total_size);
  return a;
}

BudgetAllocation allocate_budget(std::vector<NodeBudget> explicit_split, std::span<Index const> node_sizes,
                                 Index total_size)
{
  BudgetAllocation a{std::move(explicit_split)};
  check_feasible(a, node_sizes, total_size);
  return a;
}

std::vector<double> sampling_probabilities(Vector const &sq_dists)
{
  std::size_t const n = static_cast<std::size_t>(sq_dists.size());
  require(n > 0, "sampling probabilities: no points");
  double const total = sq_dists.sum();
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = total > 0 ? sq_dists(static_cast<Index>(i)) / total : 1.0 / static_cast<double>(n);
  }
  return p;
}

double LocalCoreset::total_weight() const
{
  double s = 0;
  for (auto const &c : centers) { s += c.weight; }
  for (auto const &x : samples) { s += x.weight; }
  return s;
}

LocalCoreset build_local_coreset(Dataset const &node, int node_id, Index num_centers, Index num_samples,
                                 std::uint64_t seed, KmeansConfig base)
{
  Index const n = node.size();
  require(n > 0, "local coreset: empty node");
  require(num_centers >= 1 && num_centers <= n, "local coreset: center count must lie in [1, node size]");
  require(num_samples >= 0 && num_samples <= n, "local coreset: sample count must lie in [0, node size]");

  Index const d = node.feature_dim();
  double const tau = label_scale(d);
  Matrix const aug = augment_with_labels(node);
  base.k = num_centers;
  base.seed = seed;
  auto const km = kmeans(aug, base);
  auto const nc = nearest_center_sq_dists(aug, km.centers);

  LocalCoreset lc;
  lc.node_id = node_id;
  lc.node_size = n;
  lc.seed = seed;
  lc.local_cost = nc.sq_dist.sum();

  std::vector<double> cluster_weight(static_cast<std::size_t>(num_centers), 0.0);
  for (auto c : nc.index) { cluster_weight[static_cast<std::size_t>(c)] += 1.0; }

  if (num_samples > 0) {
    auto const prob = sampling_probabilities(nc.sq_dist);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::discrete_distribution<Index> draw(prob.begin(), prob.end());
    for (Index s = 0; s < num_samples; ++s) {
      Index const r = draw(rng);
      double const u = 1.0 / (static_cast<double>(num_samples) * prob[static_cast<std::size_t>(r)]);
      lc.samples.push_back({node.ids[static_cast<std::size_t>(r)], node.features.row(r),
                            node.labels[static_cast<std::size_t>(r)], u});
      cluster_weight[static_cast<std::size_t>(nc.index[static_cast<std::size_t>(r)])] -= u;
    }
  }

  for (Index c = 0; c < num_centers; ++c) {
    double w = cluster_weight[static_cast<std::size_t>(c)];
    if (w < 0) {
      lc.weight_deficiency -= w;
      w = 0;
    }
    lc.centers.push_back({km.centers.row(c).head(d), w, decode_label(km.centers(c, d), tau, node.num_classes)});
  }
  return lc;
}

LocalCoreset full_data_coreset(Dataset const &node, int node_id)
{
  LocalCoreset lc;
  lc.node_id = node_id;
  lc.node_size = node.size();
  for (Index r = 0; r < node.size(); ++r) {
    lc.samples.push_back({node.ids[static_cast<std::size_t>(r)], node.features.row(r),
                          node.labels[static_cast<std::size_t>(r)], 1.0});
  }
  return lc;
}

Index GlobalCoreset::feature_dim() const
{
  return centers.rows() > 0 ? centers.cols() : samples.cols();
}

WeightedSet<double> GlobalCoreset::training_set() const
{
  WeightedSet<double> ws;
  ws.features.resize(size(), feature_dim());
  if (num_centers() > 0) { ws.features.topRows(num_centers()) = centers; }
  if (num_samples() > 0) { ws.features.bottomRows(num_samples()) = samples; }
  ws.labels = center_labels;
  ws.labels.insert(ws.labels.end(), sample_labels.begin(), sample_labels.end());
  ws.weights = center_weights;
  ws.weights.insert(ws.weights.end(), sample_weights.begin(), sample_weights.end());
  return ws;
}

std::vector<Index> GlobalCoreset::node_block_sizes() const
{
  std::vector<Index> s;
  for (auto const &[b, e] : node_center_ranges) { s.push_back(e - b); }
  return s;
}

GlobalCoreset merge(std::span<LocalCoreset const> locals)
{
  require(!locals.empty(), "merge: no local coresets");
  Index dim = -1;
  Index nc = 0, ns = 0;
  for (auto const &l : locals) {
    for (auto const &c : l.centers) {
      require(dim < 0 || c.point.size() == dim, "merge: dimension mismatch");
      dim = c.point.size();
    }
    for (auto const &s : l.samples) {
      require(dim < 0 || s.point.size() == dim, "merge: dimension mismatch");
      dim = s.point.size();
    }
    nc += static_cast<Index>(l.centers.size());
    ns += static_cast<Index>(l.samples.size());
  }
  require(dim > 0, "merge: local coresets are all empty");

  GlobalCoreset g;
  g.centers.resize(nc, dim);
  g.samples.resize(ns, dim);
  std::set<RecordId> exposed;
  Index ci = 0, si = 0;
  for (auto const &l : locals) {
    Index const begin = ci;
    for (auto const &c : l.centers) {
      g.centers.row(ci++) = c.point;
      g.center_weights.push_back(c.weight);
      g.center_labels.push_back(c.label);
    }
    g.node_center_ranges.emplace_back(begin, ci);
    for (auto const &s : l.samples) {
      g.samples.row(si++) = s.point;
      g.sample_weights.push_back(s.weight);
      g.sample_labels.push_back(s.label);
      g.sample_ids.push_back(s.id);
      exposed.insert(s.id);
    }
    g.node_weight_sums.push_back(l.total_weight());
    g.node_weight_deficiency.push_back(l.weight_deficiency);
  }
  g.exposed_samples.assign(exposed.begin(), exposed.end());
  return g;
}

void write_coreset_csv(GlobalCoreset const &coreset, std::filesystem::path const &path)
{
  std::ofstream out(path);
  if (!out) { throw std::runtime_error("cannot write " + path.string()); }
  out.precision(17);
  auto row = [&](double w, int label, auto const &x) {
    out << w << ',' << label;
    for (Index j = 0; j < x.size(); ++j) { out << ',' << x(j); }
    out << '\n';
  };
  for (Index i = 0; i < coreset.num_centers(); ++i) {
    row(coreset.center_weights[static_cast<std::size_t>(i)], coreset.center_labels[static_cast<std::size_t>(i)],
        coreset.centers.row(i));
  }
  for (Index i = 0; i < coreset.num_samples(); ++i) {
    row(coreset.sample_weights[static_cast<std::size_t>(i)], coreset.sample_labels[static_cast<std::size_t>(i)],
        coreset.samples.row(i));
  }
}

} // namespace mia
