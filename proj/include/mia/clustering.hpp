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

// Lloyd's k-means with k-means++ seeding. Points are matrix rows.

#ifndef MIA_CLUSTERING_HPP
#define MIA_CLUSTERING_HPP

#include <limits>
#include <vector>

#include "mia/core.hpp"

namespace mia {

struct KmeansConfig
{
  Index k = 1;
  std::uint64_t seed = 1;
  int max_iters = 100;
  double tol = 1e-6; // relative cost improvement
  int restarts = 1;
};

template <typename Scalar = double> struct NearestCenters
{
  std::vector<Index> index;
  VectorX<Scalar> sq_dist;
};

template <typename Scalar = double> struct KmeansResult
{
  MatrixX<Scalar> centers;
  Scalar cost = 0;
  std::vector<Index> assignment;
  std::vector<Scalar> cost_history; // one entry per assignment step
};

// For each point the nearest center (ties to the lowest index) and its exact
// squared distance. A GEMM pass shortlists candidates; the winner is chosen
// on exact (p - c).squaredNorm() values.
template <typename Scalar>
NearestCenters<Scalar> nearest_center_sq_dists(MatrixX<Scalar> const &points, MatrixX<Scalar> const &centers)
{
  require(centers.rows() > 0, "nearest centers: empty center set");
  require(points.cols() == centers.cols(), "nearest centers: dimension mismatch");
  Index const n = points.rows();
  NearestCenters<Scalar> out;
  out.index.assign(static_cast<std::size_t>(n), 0);
  out.sq_dist.resize(n);
  if (n == 0) { return out; }

  VectorX<Scalar> const pn = points.rowwise().squaredNorm();
  VectorX<Scalar> const cn = centers.rowwise().squaredNorm();
  MatrixX<Scalar> approx = -Scalar(2) * points * centers.transpose();
  approx.rowwise() += cn.transpose();
  Scalar const cmax = cn.size() ? cn.maxCoeff() : Scalar(0);
  for (Index p = 0; p < n; ++p) {
    Scalar const lo = approx.row(p).minCoeff();
    Scalar const slack = Scalar(1e-9) * (pn(p) + cmax + Scalar(1));
    Index best = -1;
    Scalar best_d = std::numeric_limits<Scalar>::infinity();
    for (Index c = 0; c < centers.rows(); ++c) {
      if (approx(p, c) > lo + slack) { continue; }
      Scalar const d = (points.row(p) - centers.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    out.index[static_cast<std::size_t>(p)] = best;
    out.sq_dist(p) = best_d;
  }
  return out;
}

namespace detail {

// Summed in point order so every cost in this module agrees bit for bit.
template <typename Scalar> Scalar sequential_sum(VectorX<Scalar> const &v)
{
  Scalar s = 0;
  for (Index i = 0; i < v.size(); ++i) { s += v(i); }
  return s;
}

} // namespace detail

// Sum over points of the squared distance to the nearest center.
template <typename Scalar> Scalar kmeans_cost(MatrixX<Scalar> const &points, MatrixX<Scalar> const &centers)
{
  return detail::sequential_sum(nearest_center_sq_dists(points, centers).sq_dist);
}

namespace detail {

template <typename Scalar> MatrixX<Scalar> kmeanspp_seed(MatrixX<Scalar> const &points, Index k, Rng &rng)
{
  Index const n = points.rows();
  MatrixX<Scalar> centers(k, points.cols());
  std::uniform_int_distribution<Index> pick(0, n - 1);
  centers.row(0) = points.row(pick(rng));
  VectorX<Scalar> d2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (Index c = 1; c < k; ++c) {
    double const total = static_cast<double>(d2.sum());
    Index chosen = 0;
    if (total > 0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double const target = u(rng);
      double acc = 0;
      chosen = -1;
      for (Index i = 0; i < n; ++i) {
        if (d2(i) <= 0) { continue; }
        chosen = i;
        acc += static_cast<double>(d2(i));
        if (acc > target) { break; }
      }
    } else {
      chosen = pick(rng);
    }
    centers.row(c) = points.row(chosen);
    d2 = d2.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

template <typename Scalar> KmeansResult<Scalar> lloyd(MatrixX<Scalar> const &points, MatrixX<Scalar> centers, KmeansConfig const &cfg)
{
  Index const n = points.rows();
  Index const k = centers.rows();
  KmeansResult<Scalar> res;
  auto nc = nearest_center_sq_dists(points, centers);
  Scalar cost = sequential_sum(nc.sq_dist);
  res.cost_history.push_back(cost);
  for (int it = 0; it < cfg.max_iters && cost > 0; ++it) {
    MatrixX<Scalar> next = MatrixX<Scalar>::Zero(k, points.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index p = 0; p < n; ++p) {
      auto const c = nc.index[static_cast<std::size_t>(p)];
      next.row(c) += points.row(p);
      ++counts[static_cast<std::size_t>(c)];
    }
    VectorX<Scalar> d2 = nc.sq_dist;
    for (Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        next.row(c) /= static_cast<Scalar>(counts[static_cast<std::size_t>(c)]);
      } else {
        // Empty cluster: move it onto the worst-served point.
        Index far = 0;
        d2.maxCoeff(&far);
        if (d2(far) > 0) {
          next.row(c) = points.row(far);
          d2(far) = 0;
        } else {
          next.row(c) = centers.row(c);
        }
      }
    }
    auto nc_next = nearest_center_sq_dists(points, next);
    Scalar const next_cost = sequential_sum(nc_next.sq_dist);
    if (next_cost > cost) { break; }
    Scalar const improvement = (cost - next_cost) / cost;
    centers = std::move(next);
    nc = std::move(nc_next);
    cost = next_cost;
    res.cost_history.push_back(cost);
    if (improvement < static_cast<Scalar>(cfg.tol)) { break; }
  }
  res.centers = std::move(centers);
  res.cost = cost;
  res.assignment = std::move(nc.index);
  return res;
}

} // namespace detail

template <typename Scalar> KmeansResult<Scalar> kmeans(MatrixX<Scalar> const &points, KmeansConfig const &cfg)
{
  require(points.rows() > 0, "kmeans: empty input");
  require(cfg.k >= 1, "kmeans: k must be positive");
  require(cfg.k <= points.rows(), "kmeans: k exceeds the number of points");
  require(cfg.restarts >= 1, "kmeans: restarts must be positive");
  Rng rng(cfg.seed);
  KmeansResult<Scalar> best;
  for (int r = 0; r < cfg.restarts; ++r) {
    auto res = detail::lloyd(points, detail::kmeanspp_seed(points, cfg.k, rng), cfg);
    if (r == 0 || res.cost < best.cost) { best = std::move(res); }
  }
  return best;
}

} // namespace mia

#endif // MIA_CLUSTERING_HPP
