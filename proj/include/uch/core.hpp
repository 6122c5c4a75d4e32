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

// Domain types shared by every module.
//
// Storage convention: samples are rows everywhere. A modality's features are
// X (n x d), projections are P (d x r), codes are B (n x r), so the latent
// embedding of a modality is X * P and the quantization residual is
// X * P - B.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "uch/error.hpp"

namespace uch {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CodeStorage =
    Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Variant { kLle, kLpp };

inline std::string_view to_string(Variant v) {
  return v == Variant::kLle ? "lle" : "lpp";
}

inline Variant parse_variant(std::string_view text) {
  if (text == "lle") return Variant::kLle;
  if (text == "lpp") return Variant::kLpp;
  throw UsageError("unknown variant '" + std::string(text) +
                   "' (expected lle or lpp)");
}

enum class AnchorInit { kKMeans, kRandom };

inline std::string_view to_string(AnchorInit a) {
  return a == AnchorInit::kKMeans ? "kmeans" : "random";
}

inline AnchorInit parse_anchor_init(std::string_view text) {
  if (text == "kmeans") return AnchorInit::kKMeans;
  if (text == "random") return AnchorInit::kRandom;
  throw UsageError("unknown anchor init '" + std::string(text) +
                   "' (expected kmeans or random)");
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, std::string_view what) {
  if (!m.allFinite())
    throw NumericalError("non-finite value in " + std::string(what));
}

/// One modality's (centered) sample features, rows are samples.
struct FeatureMatrix {
  Matrix data;
  int modality_id = 1;  // 1 = image, 2 = text
  Vector mean;          // training mean subtracted during centering

  Index rows() const { return data.rows(); }
  Index cols() const { return data.cols(); }

  /// Shape, finiteness and (when check_centered) zero column sums.
  void validate(bool check_centered) const {
    if (data.rows() < 1 || data.cols() < 1)
      throw DataError("feature matrix must have at least one row and column");
    if (mean.size() != data.cols())
      throw DataError("feature mean length does not match column count");
    if (!data.allFinite()) throw DataError("non-finite value in feature matrix");
    if (check_centered) {
      const double tol = 1e-9 * static_cast<double>(data.rows());
      const Vector sums = data.colwise().sum().transpose();
      for (Index j = 0; j < sums.size(); ++j)
        if (std::abs(sums(j)) > tol)
          throw DataError("column " + std::to_string(j) +
                          " of modality " + std::to_string(modality_id) +
                          " is not centered");
    }
  }
};

/// Row-aligned horizontal join of every modality: Y = [X1, X2, ...].
struct ConcatenatedFeatures {
  Matrix data;

  Index rows() const { return data.rows(); }
  Index cols() const { return data.cols(); }
};

inline ConcatenatedFeatures concatenate(const std::vector<FeatureMatrix>& parts) {
  if (parts.empty()) throw DataError("nothing to concatenate");
  const Index n = parts.front().rows();
  Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != n)
      throw DataError("modalities disagree on sample count");
    total += p.cols();
  }
  ConcatenatedFeatures y{Matrix(n, total)};
  Index offset = 0;
  for (const auto& p : parts) {
    y.data.middleCols(offset, p.cols()) = p.data;
    offset += p.cols();
  }
  return y;
}

/// n x r matrix over {-1, +1}.
class CodeMatrix {
 public:
  CodeMatrix() = default;

  explicit CodeMatrix(CodeStorage codes) : codes_(std::move(codes)) {
    for (Index i = 0; i < codes_.rows(); ++i)
      for (Index j = 0; j < codes_.cols(); ++j)
        if (codes_(i, j) != 1 && codes_(i, j) != -1)
          throw DataError("code entries must be -1 or +1");
  }

  static CodeMatrix filled(Index rows, int bits, std::int8_t value) {
    return CodeMatrix(CodeStorage::Constant(rows, bits, value));
  }

  Index rows() const { return codes_.rows(); }
  int bits() const { return static_cast<int>(codes_.cols()); }
  std::int8_t operator()(Index i, Index j) const { return codes_(i, j); }
  const CodeStorage& codes() const { return codes_; }

  Matrix to_real() const { return codes_.cast<double>(); }

  friend bool operator==(const CodeMatrix& a, const CodeMatrix& b) {
    return a.codes_.rows() == b.codes_.rows() &&
           a.codes_.cols() == b.codes_.cols() && a.codes_ == b.codes_;
  }

 private:
  CodeStorage codes_;
};

/// Elementwise sign with sgn(0) = +1.
template <typename Derived>
CodeMatrix sign_quantize(const Eigen::MatrixBase<Derived>& expr) {
  const auto& x = expr.eval();
  if (!x.allFinite())
    throw NumericalError("non-finite value in quantization input");
  CodeStorage codes(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j)
      codes(i, j) = x(i, j) < 0 ? std::int8_t{-1} : std::int8_t{1};
  return CodeMatrix(std::move(codes));
}

inline CodeMatrix sign_quantize(const CodeMatrix& codes) { return codes; }

/// Sum of row Euclidean norms.
template <typename Derived>
double l21_norm(const Eigen::MatrixBase<Derived>& m) {
  require_finite(m, "l21 norm input");
  return m.rowwise().norm().sum();
}

/// Every tunable of a training run.
struct Hyperparams {
  std::vector<double> lambdas{1.0, 1.0};  // per-modality l2,1 weight
  double rho = 1.0;                       // graph term weight
  double mu = 0.0;                        // F/B coupling weight
  double gamma = 2.0;                     // modality-weight exponent, > 1
  int neighbors = 50;                     // K for the LLE graph
  int anchors = 150;                      // m for the anchor graph
  int anchor_support = 5;                 // kept nearest anchors per sample
  double bandwidth = 0.0;                 // anchor kernel width; <= 0 = auto
  double ridge = 1e-3;                    // local Gram regularization
  AnchorInit anchor_init = AnchorInit::kKMeans;
  int max_iters = 50;
  double tol = 1e-5;
  double epsilon = 1e-5;  // IRLS smoothing
  std::uint64_t seed = 0;
  bool monotone_guard = true;

  int graph_size(Variant v) const {
    return v == Variant::kLle ? neighbors : anchors;
  }
};

/// A trained hashing model.
struct UchModel {
  Variant variant = Variant::kLle;
  Hyperparams hyper;
  std::vector<Matrix> projections;  // P per modality, d_v x r
  Vector alphas;                    // modality weights on the simplex
  std::vector<Vector> means;        // training means per modality
  CodeMatrix training_codes;        // unified codes of the training set
  std::vector<double> objective_trace;

  int bits() const { return training_codes.bits(); }
  int modality_count() const { return static_cast<int>(projections.size()); }
  double gamma() const { return hyper.gamma; }

  Index dim(int modality_id) const {
    check_modality(modality_id);
    return projections[modality_id - 1].rows();
  }

  void check_modality(int modality_id) const {
    if (modality_id < 1 || modality_id > modality_count())
      throw UsageError("modality " + std::to_string(modality_id) +
                       " out of range 1.." + std::to_string(modality_count()));
  }

  void validate() const {
    if (projections.empty()) throw DataError("model has no projections");
    if (alphas.size() != modality_count() ||
        static_cast<int>(means.size()) != modality_count() ||
        static_cast<int>(hyper.lambdas.size()) != modality_count())
      throw DataError("model modality counts are inconsistent");
    for (int v = 0; v < modality_count(); ++v) {
      if (projections[v].cols() != bits())
        throw DataError("projection column count does not match code length");
      if (means[v].size() != projections[v].rows())
        throw DataError("mean length does not match projection rows");
      if (!(alphas(v) > 0.0)) throw DataError("modality weights must be > 0");
    }
    if (std::abs(alphas.sum() - 1.0) > 1e-12)
      throw DataError("modality weights must sum to 1");
  }
};

}  // namespace uch
