// Copyright 2026 The UCH Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Affinity structures built on the concatenated features.
//
// LLE: W (n x n, row-sparse) with W(i, j) the weight of neighbor j in the
// affine reconstruction of sample i. Rows sum to one.
//
// LPP: anchor graph S = Z * inv(Lambda) * Z^T with Z (n x m) row-stochastic
// sample-to-anchor affinities and Lambda = diag(Z^T 1). S is symmetric, PSD
// and row-stochastic; it is only ever held in factored form. The Laplacian is
// L = I - S. Note sum_ij S_ij |b_i - b_j|^2 = 2 Tr(B^T L B); the factor two
// is absorbed into rho.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "uch/core.hpp"
#include "uch/error.hpp"
#include "uch/log.hpp"
#include "uch/parallel.hpp"
#include "uch/random.hpp"

namespace uch {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using NeighborLists = std::vector<std::vector<Index>>;

// Beyond this size S is never densified.
inline constexpr Index kMaxDenseSimilarity = 2000;

namespace detail {

inline double squared_distance(const Matrix& a, Index i, const Matrix& b,
                               Index j) {
  double s = 0.0;
  for (Index c = 0; c < a.cols(); ++c) {
    const double d = a(i, c) - b(j, c);
    s += d * d;
  }
  return s;
}

// The `count` smallest (distance, index) pairs, ordered by distance then
// index.
inline std::vector<std::pair<double, Index>> smallest(
    std::vector<std::pair<double, Index>> candidates, Index count) {
  std::partial_sort(candidates.begin(), candidates.begin() + count,
                    candidates.end());
  candidates.resize(static_cast<std::size_t>(count));
  return candidates;
}

}  // namespace detail

/// For every row, the k other rows nearest in Euclidean distance; ties go to
/// the smaller index.
inline NeighborLists knn_indices(const Matrix& y, int k) {
  const Index n = y.rows();
  if (k < 1 || k >= n)
    throw UsageError("knn: need 1 <= k < n (k = " + std::to_string(k) +
                     ", n = " + std::to_string(n) + ")");
  NeighborLists out(static_cast<std::size_t>(n));
  parallel_for(n, [&](std::ptrdiff_t i) {
    std::vector<std::pair<double, Index>> cand;
    cand.reserve(static_cast<std::size_t>(n - 1));
    for (Index j = 0; j < n; ++j)
      if (j != i) cand.emplace_back(detail::squared_distance(y, i, y, j), j);
    auto best = detail::smallest(std::move(cand), k);
    auto& row = out[static_cast<std::size_t>(i)];
    row.reserve(best.size());
    for (const auto& [d, j] : best) row.push_back(j);
  });
  return out;
}

inline NeighborLists knn_indices(const ConcatenatedFeatures& y, int k) {
  return knn_indices(y.data, k);
}

/// Anchor-graph factors: S = Z * diag(1 / lambda_diag) * Z^T.
struct AnchorFactors {
  Matrix anchors;      // m x (d1 + d2)
  SparseMatrix z;      // n x m, rows sum to 1
  Vector lambda_diag;  // column sums of z, all > 0
};

class AffinityGraph {
 public:
  static AffinityGraph from_lle(SparseMatrix weights) {
    AffinityGraph g;
    g.variant_ = Variant::kLle;
    g.weights_ = std::move(weights);
    return g;
  }

  static AffinityGraph from_anchors(AnchorFactors factors) {
    AffinityGraph g;
    g.variant_ = Variant::kLpp;
    g.anchors_ = std::move(factors);
    return g;
  }

  Variant variant() const { return variant_; }

  Index size() const {
    return variant_ == Variant::kLle ? weights_.rows() : anchors_->z.rows();
  }

  const SparseMatrix& weights() const {
    if (variant_ != Variant::kLle)
      throw UsageError("reconstruction weights requested from an anchor graph");
    return weights_;
  }

  const AnchorFactors& anchor_factors() const {
    if (variant_ != Variant::kLpp)
      throw UsageError("anchor factors requested from an LLE graph");
    return *anchors_;
  }

  /// W * m (LLE) or S * m (LPP), without forming S.
  Matrix apply(const Matrix& m) const {
    if (variant_ == Variant::kLle) return weights_ * m;
    const auto& f = *anchors_;
    const Matrix projected = f.z.transpose() * m;
    return f.z * (f.lambda_diag.cwiseInverse().asDiagonal() * projected);
  }

  /// Dense W or S. S is refused beyond kMaxDenseSimilarity samples.
  Matrix dense() const {
    if (variant_ == Variant::kLle) return Matrix(weights_);
    if (size() > kMaxDenseSimilarity)
      throw UsageError("refusing to densify an anchor similarity with n > " +
                       std::to_string(kMaxDenseSimilarity));
    const auto& f = *anchors_;
    const Matrix z = Matrix(f.z);
    return z * f.lambda_diag.cwiseInverse().asDiagonal() * z.transpose();
  }

  /// Entries of row i of W or S as (column, weight), zero entries skipped.
  std::vector<std::pair<Index, double>> row(Index i) const {
    std::vector<std::pair<Index, double>> out;
    if (variant_ == Variant::kLle) {
      for (SparseMatrix::InnerIterator it(weights_, i); it; ++it)
        out.emplace_back(it.col(), it.value());
      return out;
    }
    const auto& f = *anchors_;
    Vector scaled = Vector::Zero(f.z.cols());
    for (SparseMatrix::InnerIterator it(f.z, i); it; ++it)
      scaled(it.col()) = it.value() / f.lambda_diag(it.col());
    const Vector s = f.z * scaled;
    for (Index j = 0; j < s.size(); ++j)
      if (s(j) != 0.0) out.emplace_back(j, s(j));
    return out;
  }

 private:
  AffinityGraph() = default;

  Variant variant_ = Variant::kLle;
  SparseMatrix weights_;
  std::optional<AnchorFactors> anchors_;
};

/// LLE reconstruction weights over the k nearest neighbors. The local Gram
/// matrix gets ridge * trace / k added to its diagonal (ridge alone when the
/// trace is zero).
inline AffinityGraph lle_weights(const Matrix& y, int k, double ridge) {
  if (ridge < 0.0) throw UsageError("lle: ridge must be >= 0");
  const NeighborLists nbrs = knn_indices(y, k);
  const Index n = y.rows();
  std::vector<Vector> rows(static_cast<std::size_t>(n));
  parallel_for(n, [&](std::ptrdiff_t i) {
    const auto& nb = nbrs[static_cast<std::size_t>(i)];
    Matrix diff(k, y.cols());
    for (int a = 0; a < k; ++a) diff.row(a) = y.row(i) - y.row(nb[a]);
    Matrix gram = diff * diff.transpose();
    const double trace = gram.trace();
    gram.diagonal().array() += trace > 0.0 ? ridge * trace / k : ridge;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14))
      throw NumericalError("local Gram matrix of sample " + std::to_string(i) +
                           " is singular; increase the ridge");
    const Vector w = llt.solve(Vector::Ones(k));
    const double total = w.sum();
    if (!std::isfinite(total) || total == 0.0)
      throw NumericalError("degenerate reconstruction weights for sample " +
                           std::to_string(i));
    rows[static_cast<std::size_t>(i)] = w / total;
  });
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n * k));
  for (Index i = 0; i < n; ++i)
    for (int a = 0; a < k; ++a)
      triplets.emplace_back(i, nbrs[static_cast<std::size_t>(i)][a],
                            rows[static_cast<std::size_t>(i)](a));
  SparseMatrix w(n, n);
  w.setFromTriplets(triplets.begin(), triplets.end());
  return AffinityGraph::from_lle(std::move(w));
}

inline AffinityGraph lle_weights(const ConcatenatedFeatures& y, int k,
                                 double ridge) {
  return lle_weights(y.data, k, ridge);
}

/// m anchor points. kKMeans: 25 Lloyd iterations started from m distinct
/// seeded samples; kRandom: the seeded samples themselves.
inline Matrix anchor_select(const Matrix& y, int m, std::uint64_t seed,
                            AnchorInit init = AnchorInit::kKMeans,
                            int iterations = 25) {
  const Index n = y.rows();
  if (m < 1 || m > n)
    throw UsageError("anchors: need 1 <= m <= n (m = " + std::to_string(m) +
                     ", n = " + std::to_string(n) + ")");
  Rng rng(seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  for (Index i = 0; i < m; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(pick(rng))]);
  }
  Matrix centers(m, y.cols());
  for (Index a = 0; a < m; ++a)
    centers.row(a) = y.row(order[static_cast<std::size_t>(a)]);
  if (init == AnchorInit::kRandom) return centers;

  std::vector<Index> assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < iterations; ++it) {
    bool changed = false;
    std::vector<Index> next(static_cast<std::size_t>(n));
    parallel_for(n, [&](std::ptrdiff_t i) {
      Index best = 0;
      double best_d = detail::squared_distance(y, i, centers, 0);
      for (Index a = 1; a < m; ++a) {
        const double d = detail::squared_distance(y, i, centers, a);
        if (d < best_d) {
          best_d = d;
          best = a;
        }
      }
      next[static_cast<std::size_t>(i)] = best;
    });
    for (Index i = 0; i < n; ++i)
      changed |= next[static_cast<std::size_t>(i)] !=
                 assign[static_cast<std::size_t>(i)];
    assign = std::move(next);
    if (!changed) break;
    Matrix sums = Matrix::Zero(m, y.cols());
    std::vector<Index> counts(static_cast<std::size_t>(m), 0);
    for (Index i = 0; i < n; ++i) {
      const Index a = assign[static_cast<std::size_t>(i)];
      sums.row(a) += y.row(i);
      ++counts[static_cast<std::size_t>(a)];
    }
    for (Index a = 0; a < m; ++a)
      if (counts[static_cast<std::size_t>(a)] > 0)
        centers.row(a) = sums.row(a) / static_cast<double>(counts[static_cast<std::size_t>(a)]);
  }
  return centers;
}

/// Sample-to-anchor softmax affinities over each sample's `support` nearest
/// anchors (squared Euclidean distances). bandwidth <= 0 selects the mean
/// kept distance. Anchors that end up with zero total mass are dropped.
inline AffinityGraph anchor_graph(const Matrix& y, Matrix anchors, int support,
                                  double bandwidth) {
  const Index n = y.rows();
  const Index m = anchors.rows();
  if (anchors.cols() != y.cols())
    throw DataError("anchor dimension does not match features");
  if (support < 1 || support > m)
    throw UsageError("anchor graph: need 1 <= s <= m (s = " +
                     std::to_string(support) + ", m = " + std::to_string(m) +
                     ")");
  std::vector<std::vector<std::pair<double, Index>>> kept(
      static_cast<std::size_t>(n));
  parallel_for(n, [&](std::ptrdiff_t i) {
    std::vector<std::pair<double, Index>> cand;
    cand.reserve(static_cast<std::size_t>(m));
    for (Index a = 0; a < m; ++a)
      cand.emplace_back(detail::squared_distance(y, i, anchors, a), a);
    kept[static_cast<std::size_t>(i)] = detail::smallest(std::move(cand), support);
  });

  double delta = bandwidth;
  if (!(delta > 0.0)) {
    double total = 0.0;
    for (const auto& row : kept)
      for (const auto& [d, a] : row) total += d;
    delta = total / static_cast<double>(n * support);
    if (!(delta > 0.0)) delta = 1.0;
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n * support));
  for (Index i = 0; i < n; ++i) {
    const auto& row = kept[static_cast<std::size_t>(i)];
    const double nearest = row.front().first;
    double norm = 0.0;
    for (const auto& [d, a] : row) norm += std::exp(-(d - nearest) / delta);
    for (const auto& [d, a] : row) {
      const double v = std::exp(-(d - nearest) / delta) / norm;
      if (v > 0.0) triplets.emplace_back(i, a, v);
    }
  }
  SparseMatrix z(n, m);
  z.setFromTriplets(triplets.begin(), triplets.end());
  Vector mass = Vector::Zero(m);
  for (Index i = 0; i < n; ++i)
    for (SparseMatrix::InnerIterator it(z, i); it; ++it)
      mass(it.col()) += it.value();

  std::vector<Index> live;
  for (Index a = 0; a < m; ++a)
    if (mass(a) > 0.0) live.push_back(a);
  if (static_cast<Index>(live.size()) < m) {
    log_warn("anchor graph: dropping " + std::to_string(m - live.size()) +
             " anchor(s) with zero mass");
    std::vector<Index> remap(static_cast<std::size_t>(m), -1);
    Matrix kept_anchors(static_cast<Index>(live.size()), anchors.cols());
    for (std::size_t k = 0; k < live.size(); ++k) {
      remap[static_cast<std::size_t>(live[k])] = static_cast<Index>(k);
      kept_anchors.row(static_cast<Index>(k)) = anchors.row(live[k]);
    }
    for (auto& t : triplets)
      t = Eigen::Triplet<double>(t.row(), remap[static_cast<std::size_t>(t.col())],
                                 t.value());
    z = SparseMatrix(n, static_cast<Index>(live.size()));
    z.setFromTriplets(triplets.begin(), triplets.end());
    anchors = std::move(kept_anchors);
    mass = Vector::Zero(z.cols());
    for (Index i = 0; i < n; ++i)
      for (SparseMatrix::InnerIterator it(z, i); it; ++it)
        mass(it.col()) += it.value();
  }
  return AffinityGraph::from_anchors(
      AnchorFactors{std::move(anchors), std::move(z), std::move(mass)});
}

inline AffinityGraph anchor_graph(const ConcatenatedFeatures& y, Matrix anchors,
                                  int support, double bandwidth) {
  return anchor_graph(y.data, std::move(anchors), support, bandwidth);
}

/// L = I - S for an anchor graph, kept factored.
class GraphLaplacian {
 public:
  explicit GraphLaplacian(const AnchorFactors& f)
      : z_(f.z), lambda_diag_(f.lambda_diag) {}

  Index size() const { return z_.rows(); }
  const SparseMatrix& z() const { return z_; }
  const Vector& lambda_diag() const { return lambda_diag_; }

  Matrix apply(const Matrix& m) const {
    const Matrix projected = z_.transpose() * m;
    return m - z_ * (lambda_diag_.cwiseInverse().asDiagonal() * projected);
  }

  /// Tr(B^T L B) = |B|^2 - |inv(sqrt(Lambda)) Z^T B|^2.
  double quadratic_form(const Matrix& b) const {
    const Matrix projected = lambda_diag_.cwiseSqrt().cwiseInverse().asDiagonal() *
                             (z_.transpose() * b);
    return b.squaredNorm() - projected.squaredNorm();
  }

  Matrix dense() const {
    if (size() > kMaxDenseSimilarity)
      throw UsageError("refusing to densify a Laplacian with n > " +
                       std::to_string(kMaxDenseSimilarity));
    const Matrix z = Matrix(z_);
    return Matrix::Identity(size(), size()) -
           z * lambda_diag_.cwiseInverse().asDiagonal() * z.transpose();
  }

 private:
  SparseMatrix z_;
  Vector lambda_diag_;
};

inline GraphLaplacian laplacian(const AffinityGraph& graph) {
  if (graph.variant() != Variant::kLpp)
    throw UsageError("a Laplacian is only defined for the anchor graph");
  return GraphLaplacian(graph.anchor_factors());
}

/// Graph term of the objective: |F - W F|^2 (LLE) or Tr(F^T L F) (LPP).
inline double graph_penalty(const AffinityGraph& graph, const Matrix& f) {
  if (f.rows() != graph.size())
    throw DataError("graph size does not match code rows");
  if (graph.variant() == Variant::kLle)
    return (f - graph.weights() * f).squaredNorm();
  return GraphLaplacian(graph.anchor_factors()).quadratic_form(f);
}

/// Inspection dump: "i,j,w" per nonzero of W (LLE) or S (LPP), row-major.
inline void write_graph_triplets(const AffinityGraph& graph, std::ostream& os) {
  os.precision(17);
  os << "i,j,w\n";
  for (Index i = 0; i < graph.size(); ++i)
    for (const auto& [j, w] : graph.row(i)) os << i << ',' << j << ',' << w << '\n';
}

/// The graph a training run uses, built from concatenated features.
inline AffinityGraph build_graph(const ConcatenatedFeatures& y, Variant variant,
                                 const Hyperparams& h) {
  if (variant == Variant::kLle) return lle_weights(y, h.neighbors, h.ridge);
  const int m = h.anchors;
  Matrix anchors =
      anchor_select(y.data, m, derive_seed(h.seed, "anchors"), h.anchor_init);
  return anchor_graph(y, std::move(anchors), std::min(h.anchor_support, m),
                      h.bandwidth);
}

}  // namespace uch
