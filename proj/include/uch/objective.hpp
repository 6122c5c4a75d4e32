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

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "uch/core.hpp"
#include "uch/graph.hpp"

namespace uch {

/// Scalar weights of the relaxed objective.
struct ObjectiveWeights {
  Vector alphas;
  double gamma = 2.0;
  std::vector<double> lambdas;
  double rho = 0.0;
  double mu = 0.0;

  static ObjectiveWeights from(const UchModel& model) {
    return {model.alphas, model.gamma(), model.hyper.lambdas, model.hyper.rho,
            model.hyper.mu};
  }

  /// alpha_v ^ gamma.
  double modality_weight(std::size_t v) const {
    return std::pow(alphas(static_cast<Index>(v)), gamma);
  }
};

/// C_v = |X P - B|^2 + lambda |P|_{2,1}.
inline double modality_cost(const Matrix& x, const Matrix& p, const Matrix& b,
                            double lambda) {
  if (x.cols() != p.rows() || x.rows() != b.rows() || p.cols() != b.cols())
    throw DataError("modality cost: shape mismatch");
  return (x * p - b).squaredNorm() + lambda * l21_norm(p);
}

/// sum_v a_v^g |X_v P_v - F|^2 + graph(F) * rho + mu |F - B|^2
///   + sum_v a_v^g lambda_v |P_v|_{2,1}.
/// With F = B this is the joint objective over discrete codes.
inline double relaxed_objective(const ObjectiveWeights& w,
                                std::span<const Matrix> x,
                                std::span<const Matrix> p, const Matrix& f,
                                const CodeMatrix& b, const AffinityGraph& graph) {
  if (x.size() != p.size() || static_cast<std::size_t>(w.alphas.size()) != x.size() ||
      w.lambdas.size() != x.size())
    throw DataError("objective: modality counts disagree");
  if (f.rows() != b.rows() || f.cols() != b.bits() || f.rows() != graph.size())
    throw DataError("objective: code shapes disagree");
  double total = 0.0;
  for (std::size_t v = 0; v < x.size(); ++v) {
    if (x[v].rows() != f.rows() || x[v].cols() != p[v].rows() ||
        p[v].cols() != f.cols())
      throw DataError("objective: shape mismatch in modality " +
                      std::to_string(v + 1));
    const double weight = w.modality_weight(v);
    total += weight * ((x[v] * p[v] - f).squaredNorm() + w.lambdas[v] * l21_norm(p[v]));
  }
  if (w.rho != 0.0) total += w.rho * graph_penalty(graph, f);
  if (w.mu != 0.0) total += w.mu * (f - b.to_real()).squaredNorm();
  return total;
}

inline double relaxed_objective(const UchModel& model, const Matrix& f,
                                 const CodeMatrix& b, const AffinityGraph& graph,
                                 std::span<const FeatureMatrix> x) {
  std::vector<Matrix> data;
  data.reserve(x.size());
  for (const auto& m : x) data.push_back(m.data);
  return relaxed_objective(ObjectiveWeights::from(model), data, model.projections,
                           f, b, graph);
}

}  // namespace uch
