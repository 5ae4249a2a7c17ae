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

#include "mia/datakit.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace mia {

Dataset Dataset::subset(std::span<Index const> rows) const
{
  Dataset out;
  out.features.resize(static_cast<Index>(rows.size()), feature_dim());
  out.labels.reserve(rows.size());
  out.ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Index const r = rows[i];
    require(r >= 0 && r < size(), "subset: row out of range");
    out.features.row(static_cast<Index>(i)) = features.row(r);
    out.labels.push_back(labels[static_cast<std::size_t>(r)]);
    out.ids.push_back(ids[static_cast<std::size_t>(r)]);
  }
  out.num_classes = num_classes;
  out.provenance = provenance;
  return out;
}

WeightedSet<double> Dataset::as_weighted() const
{
  return WeightedSet<double>{features, labels, {}};
}

std::unordered_map<RecordId, Index> Dataset::row_index() const
{
  std::unordered_map<RecordId, Index> m;
  m.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) { m.emplace(ids[i], static_cast<Index>(i)); }
  return m;
}

void Dataset::validate() const
{
  require(static_cast<Index>(labels.size()) == size(), "dataset: label count mismatch");
  require(static_cast<Index>(ids.size()) == size(), "dataset: id count mismatch");
  require(num_classes >= 1, "dataset: num_classes must be positive");
  for (int l : labels) { require(l >= 0 && l < num_classes, "dataset: label out of range"); }
  require(((features.array() == 0.0) || (features.array() == 1.0)).all(), "dataset: features must be binary");
}

Dataset concat(std::span<Dataset const> parts)
{
  require(!parts.empty(), "concat: no datasets");
  Index rows = 0;
  for (auto const &p : parts) {
    require(p.feature_dim() == parts.front().feature_dim(), "concat: feature dimension mismatch");
    rows += p.size();
  }
  Dataset out;
  out.features.resize(rows, parts.front().feature_dim());
  out.num_classes = 0;
  Index at = 0;
  for (auto const &p : parts) {
    out.features.middleRows(at, p.size()) = p.features;
    at += p.size();
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    out.ids.insert(out.ids.end(), p.ids.begin(), p.ids.end());
    out.num_classes = std::max(out.num_classes, p.num_classes);
  }
  out.provenance = parts.front().provenance;
  return out;
}

void SynthSpec::validate() const
{
  require(num_records >= 1 && feature_dim >= 1 && num_classes >= 1, "synth: sizes must be positive");
  require(num_records >= num_classes, "synth: need at least one record per class");
  require(flip_rate > 0.0 && flip_rate < 0.5, "synth: flip rate must lie in (0, 0.5)");
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto const comma = line.find(',', start);
    auto f = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) { f.remove_prefix(1); }
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) { f.remove_suffix(1); }
    out.push_back(f);
    if (comma == std::string_view::npos) { break; }
    start = comma + 1;
  }
  return out;
}

template <typename T> bool parse_number(std::string_view s, T &v)
{
  auto const *end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  return ec == std::errc() && ptr == end;
}

} // namespace

Dataset load_csv(std::filesystem::path const &path)
{
  std::ifstream in(path);
  if (!in) { throw ParseError("cannot open " + path.string()); }
  std::vector<int> labels;
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") { continue; }
    auto fields = split_fields(line);
    int label = 0;
    if (!parse_number(fields[0], label)) {
      if (rows.empty() && lineno == 1) { continue; } // header
      throw ParseError("label '" + std::string(fields[0]) + "' is not an integer", lineno);
    }
    if (label < 0) { throw ParseError("negative label", lineno); }
    if (fields.size() < 2) { throw ParseError("row has no features", lineno); }
    if (width == 0) {
      width = fields.size();
    } else if (fields.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " columns, found " + std::to_string(fields.size()), lineno);
    }
    std::vector<double> feats(fields.size() - 1);
    for (std::size_t j = 1; j < fields.size(); ++j) {
      double v = 0;
      if (!parse_number(fields[j], v)) {
        throw ParseError("column " + std::to_string(j + 1) + " is not numeric", lineno);
      }
      if (v != 0.0 && v != 1.0) {
        throw ParseError("column " + std::to_string(j + 1) + " is not binary (value " + std::string(fields[j]) + ")",
                         lineno);
      }
      feats[j - 1] = v;
    }
    labels.push_back(label);
    rows.push_back(std::move(feats));
  }
  if (rows.empty()) { throw ParseError("no records in " + path.string()); }

  Dataset d;
  d.features.resize(static_cast<Index>(rows.size()), static_cast<Index>(width - 1));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.features.row(static_cast<Index>(i)) = Eigen::Map<RowVector const>(rows[i].data(), static_cast<Index>(rows[i].size()));
  }
  d.labels = std::move(labels);
  d.num_classes = *std::max_element(d.labels.begin(), d.labels.end()) + 1;
  d.ids.resize(d.labels.size());
  std::iota(d.ids.begin(), d.ids.end(), RecordId{0});
  d.provenance = "csv:" + path.string();
  return d;
}

void save_csv(Dataset const &data, std::filesystem::path const &path)
{
  std::ofstream out(path);
  if (!out) { throw std::runtime_error("cannot write " + path.string()); }
  for (Index r = 0; r < data.size(); ++r) {
    out << data.labels[static_cast<std::size_t>(r)];
    for (Index c = 0; c < data.feature_dim(); ++c) { out << ',' << (data.features(r, c) != 0.0 ? '1' : '0'); }
    out << '\n';
  }
}

Dataset generate_synthetic(SynthSpec const &spec)
{
  spec.validate();
  Rng rng(spec.seed);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution flip(spec.flip_rate);
  Matrix prototypes(spec.num_classes, spec.feature_dim);
  for (Index c = 0; c < prototypes.rows(); ++c) {
    for (Index j = 0; j < prototypes.cols(); ++j) { prototypes(c, j) = coin(rng) ? 1.0 : 0.0; }
  }
  Dataset d;
  d.num_classes = spec.num_classes;
  d.features.resize(spec.num_records, spec.feature_dim);
  d.labels.resize(static_cast<std::size_t>(spec.num_records));
  d.ids.resize(static_cast<std::size_t>(spec.num_records));
  for (Index i = 0; i < spec.num_records; ++i) {
    int const c = static_cast<int>(i % spec.num_classes);
    d.labels[static_cast<std::size_t>(i)] = c;
    d.ids[static_cast<std::size_t>(i)] = i;
    for (Index j = 0; j < spec.feature_dim; ++j) {
      double const bit = prototypes(c, j);
      d.features(i, j) = flip(rng) ? 1.0 - bit : bit;
    }
  }
  std::ostringstream prov;
  prov << "synth:n=" << spec.num_records << ",d=" << spec.feature_dim << ",C=" << spec.num_classes
       << ",rho=" << spec.flip_rate << ",seed=" << spec.seed;
  d.provenance = prov.str();
  return d;
}

Partition partition(Dataset const &data, Index train_size, Index test_size, int num_nodes, std::uint64_t seed)
{
  require(num_nodes >= 1, "partition: need at least one node");
  require(train_size >= num_nodes, "partition: every node needs at least one training record");
  require(test_size >= 0, "partition: negative test size");
  require(train_size + test_size <= data.size(), "partition: train + test exceeds dataset size");
  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  Partition p;
  Index const base = train_size / num_nodes;
  Index const extra = train_size % num_nodes;
  Index at = 0;
  for (int n = 0; n < num_nodes; ++n) {
    Index const len = base + (n < extra ? 1 : 0);
    p.shards.push_back(data.subset(std::span<Index const>(order.data() + at, static_cast<std::size_t>(len))));
    at += len;
  }
  p.test = data.subset(std::span<Index const>(order.data() + at, static_cast<std::size_t>(test_size)));
  return p;
}

void MembershipSplit::validate(std::span<RecordId const> train_ids, std::span<RecordId const> test_ids) const
{
  auto check = [](std::vector<RecordId> const &leaked, std::vector<RecordId> const &eval, std::span<RecordId const> pool,
                  char const *what) {
    std::unordered_set<RecordId> const universe(pool.begin(), pool.end());
    std::unordered_set<RecordId> seen;
    for (auto id : leaked) {
      require(universe.count(id) == 1, std::string(what) + ": leaked id outside its source set");
      require(seen.insert(id).second, std::string(what) + ": duplicate id in leaked set");
    }
    for (auto id : eval) {
      require(universe.count(id) == 1, std::string(what) + ": evaluation id outside its source set");
      require(seen.insert(id).second, std::string(what) + ": leaked and evaluation sets overlap");
    }
  };
  check(leaked_members, eval_members, train_ids, "members");
  check(leaked_nonmembers, eval_nonmembers, test_ids, "nonmembers");
}

MembershipSplit make_membership_split(Dataset const &train, Dataset const &test, MembershipSizes const &sizes,
                                      std::span<RecordId const> exposed, std::uint64_t seed)
{
  require(sizes.leaked_members >= 0 && sizes.leaked_nonmembers >= 0 && sizes.eval_members >= 0 &&
              sizes.eval_nonmembers >= 0,
          "membership split: negative size");
  require(sizes.leaked_members + sizes.eval_members <= train.size(),
          "membership split: |S_train| + |S'_train| exceeds the training set");
  require(sizes.leaked_nonmembers + sizes.eval_nonmembers <= test.size(),
          "membership split: |S_test| + |S'_test| exceeds the testing set");

  std::unordered_set<RecordId> const train_ids(train.ids.begin(), train.ids.end());
  std::vector<RecordId> forced;
  std::unordered_set<RecordId> forced_set;
  for (auto id : exposed) {
    require(train_ids.count(id) == 1, "membership split: exposed record is not a training record");
    if (forced_set.insert(id).second) { forced.push_back(id); }
  }
  require(static_cast<Index>(forced.size()) <= sizes.leaked_members,
          "membership split: more exposed records than |S_train|");

  Rng rng(seed);
  MembershipSplit s;
  std::vector<RecordId> pool(train.ids);
  std::shuffle(pool.begin(), pool.end(), rng);
  s.leaked_members = forced;
  std::vector<RecordId> rest;
  for (auto id : pool) {
    if (forced_set.count(id)) { continue; }
    if (static_cast<Index>(s.leaked_members.size()) < sizes.leaked_members) {
      s.leaked_members.push_back(id);
    } else {
      rest.push_back(id);
    }
  }
  s.eval_members.assign(rest.begin(), rest.begin() + sizes.eval_members);

  std::vector<RecordId> tpool(test.ids);
  std::shuffle(tpool.begin(), tpool.end(), rng);
  s.leaked_nonmembers.assign(tpool.begin(), tpool.begin() + sizes.leaked_nonmembers);
  s.eval_nonmembers.assign(tpool.begin() + sizes.leaked_nonmembers,
                           tpool.begin() + sizes.leaked_nonmembers + sizes.eval_nonmembers);
  s.validate(train.ids, test.ids);
  return s;
}

} // namespace mia
