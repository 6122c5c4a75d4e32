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

// Alternating minimization for unified codes and per-modality projections.
//
// One iteration, in row convention (X_v is n x d_v, P_v is d_v x r):
//
//   D_v   <- diag(1 / (2 |P_v row i| + eps))
//   F     <- (a I + mu I + rho A)^-1 (sum_v w_v X_v P_v + mu B),  B <- sgn(F)
//   P_v   <- (X_v^T X_v + lambda_v D_v)^-1 X_v^T B
//   alpha <- argmin over the simplex of sum_v alpha_v^gamma C_v
//
// with w_v = alpha_v^gamma, a = sum_v w_v, C_v = |X_v P_v - B|^2 +
// lambda_v |P_v|_{2,1}, and A = (I - W)^T (I - W) for LLE or A = L = I - S
// for the anchor graph.
//
// The recorded objective is the relaxed objective at F = B, i.e.
//   sum_v w_v (|X_v P_v - B|^2 + lambda_v |P_v|_{2,1}) + rho * graph(B).
// The P and alpha steps never increase it. The sign step can, so with
// monotone_guard set a proposed B is kept only if it does not raise the
// objective at the current P and alpha.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "uch/core.hpp"
#include "uch/dataio.hpp"
#include "uch/graph.hpp"
#include "uch/log.hpp"
#include "uch/objective.hpp"
#include "uch/random.hpp"

namespace uch {

struct TrainState {
  Matrix f;                      // continuous surrogate, n x r
  CodeMatrix b;                  // unified codes
  std::vector<Matrix> p;         // projections, d_v x r
  std::vector<Vector> d_diag;    // IRLS weights per projection row
  Vector alpha;                  // modality weights
  std::vector<double> objective_trace;
};

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  Vector alphas;
  std::vector<double> costs;
  bool codes_accepted = true;
};

struct TrainConfig {
  Variant variant = Variant::kLle;
  int bits = 64;
  Hyperparams hyper;
  std::filesystem::path log_path;  // per-iteration CSV; empty = none
  std::function<void(const IterationRecord&)> on_iteration;
};

/// D_ii = 1 / (2 |row i of P| + eps).
inline Vector irls_weights(const Matrix& p, double eps) {
  return (2.0 * p.rowwise().norm().array() + eps).inverse().matrix();
}

/// B from the signs of a seeded standard normal n x r draw; each P_v from a
/// standard normal draw scaled by 1 / sqrt(d_v) (every modality re-seeds from
/// the same stream seed, so equal-width modalities start equal); uniform
/// alpha; F = B.
inline TrainState init_state(std::span<const Matrix> x, int bits,
                             std::uint64_t seed, double eps = 1e-5) {
  if (bits < 1) throw UsageError("code length must be >= 1");
  if (x.empty()) throw UsageError("need at least one modality");
  TrainState s;
  const Index n = x.front().rows();
  Rng code_rng(derive_seed(seed, "codes"));
  s.b = sign_quantize(standard_normal(n, bits, code_rng));
  s.f = s.b.to_real();
  for (const auto& xv : x) {
    Rng proj_rng(derive_seed(seed, "projection"));
    const double scale = 1.0 / std::sqrt(static_cast<double>(xv.cols()));
    s.p.push_back(standard_normal(xv.cols(), bits, proj_rng) * scale);
    s.d_diag.push_back(irls_weights(s.p.back(), eps));
  }
  s.alpha = Vector::Constant(static_cast<Index>(x.size()),
                             1.0 / static_cast<double>(x.size()));
  return s;
}

/// sum_v alpha_v^gamma X_v P_v (n x r); the transpose of G in column form.
inline Matrix combined_embedding(std::span<const Matrix> x,
                                 std::span<const Matrix> p, const Vector& alpha,
                                 double gamma) {
  Matrix out = Matrix::Zero(x.front().rows(), p.front().cols());
  for (std::size_t v = 0; v < x.size(); ++v)
    out.noalias() += std::pow(alpha(static_cast<Index>(v)), gamma) * (x[v] * p[v]);
  return out;
}

struct CodeUpdate {
  Matrix f;
  CodeMatrix b;
};

/// Solves ((a + mu) I + rho (I - W)^T (I - W)) F = rhs. The dense system
/// matrix is formed once; its Cholesky factor is rebuilt only when the
/// diagonal shift moves by more than 1e-12.
class LleCodeSolver {
 public:
  LleCodeSolver(const AffinityGraph& graph, double rho) {
    const Index n = graph.size();
    SparseMatrix residual(n, n);
    residual.setIdentity();
    residual -= graph.weights();
    const Eigen::SparseMatrix<double> normal =
        Eigen::SparseMatrix<double>(residual.transpose()) * residual;
    base_ = rho * Matrix(normal);
  }

  Matrix solve(double shift, const Matrix& rhs) {
    if (!(shift > 0.0))
      throw NumericalError("code update: alpha_eff + mu must be > 0");
    if (!factor_ || std::abs(shift - shift_) > 1e-12) {
      Matrix system = base_;
      system.diagonal().array() += shift;
      factor_.emplace(system);
      if (factor_->info() != Eigen::Success) {
        factor_.reset();
        throw NumericalError("code update: system is not positive definite");
      }
      shift_ = shift;
    }
    return factor_->solve(rhs);
  }

 private:
  Matrix base_;
  std::optional<Eigen::LLT<Matrix>> factor_;
  double shift_ = 0.0;
};

/// F = ((a + mu) I + rho (W^T - I)(W - I))^-1 (G^T + mu B), B = sgn(F).
inline CodeUpdate update_f_b_lle(const Matrix& embedding, const CodeMatrix& b,
                                 const AffinityGraph& graph, double alpha_eff,
                                 double rho, double mu) {
  if (graph.variant() != Variant::kLle)
    throw UsageError("update_f_b_lle needs an LLE graph");
  LleCodeSolver solver(graph, rho);
  const Matrix rhs = mu != 0.0 ? Matrix(embedding + mu * b.to_real()) : embedding;
  Matrix f = solver.solve(alpha_eff + mu, rhs);
  CodeMatrix codes = sign_quantize(f);
  return {std::move(f), std::move(codes)};
}

/// F = (a I + mu I + rho L)^-1 (G^T + mu B), B = sgn(F), through the
/// anchor factors. With V = Z Lambda^-1/2 and c = a + mu + rho:
///   (c I - rho V V^T)^-1 = I / c + (rho / c^2) V (I - (rho / c) V^T V)^-1 V^T,
/// so only an m x m system is factored.
inline CodeUpdate update_b_lpp(const Matrix& embedding, const GraphLaplacian& lap,
                               double alpha_eff, double rho, double mu = 0.0,
                               const CodeMatrix* b = nullptr) {
  if (!(alpha_eff + mu > 0.0))
    throw NumericalError("code update: alpha_eff + mu must be > 0");
  Matrix rhs = embedding;
  if (mu != 0.0) {
    if (b == nullptr) throw UsageError("update_b_lpp: mu > 0 needs the current codes");
    rhs += mu * b->to_real();
  }
  const double c = alpha_eff + mu + rho;
  Matrix f = rhs / c;
  if (rho != 0.0) {
    const Vector inv_sqrt = lap.lambda_diag().cwiseSqrt().cwiseInverse();
    const Matrix vt_rhs = inv_sqrt.asDiagonal() * (lap.z().transpose() * rhs);
    const Matrix zz = Matrix(Eigen::SparseMatrix<double>(lap.z().transpose()) * lap.z());
    Matrix inner = -(rho / c) * (inv_sqrt.asDiagonal() * zz * inv_sqrt.asDiagonal());
    inner.diagonal().array() += 1.0;
    const Eigen::LLT<Matrix> llt(inner);
    if (llt.info() != Eigen::Success)
      throw NumericalError("code update: anchor system is not positive definite");
    const Matrix core = llt.solve(vt_rhs);
    f += (rho / (c * c)) * (lap.z() * (inv_sqrt.asDiagonal() * core));
  }
  CodeMatrix codes = sign_quantize(f);
  return {std::move(f), std::move(codes)};
}

/// P = (X^T X + lambda D)^-1 X^T target.
inline Matrix update_p(const Matrix& x, const Matrix& target, double lambda,
                       const Vector& d_diag) {
  if (x.rows() != target.rows() || d_diag.size() != x.cols())
    throw DataError("projection update: shape mismatch");
  if (lambda < 0.0) throw UsageError("lambda must be >= 0");
  if ((d_diag.array() <= 0.0).any())
    throw NumericalError("projection update: IRLS weights must be > 0");
  Matrix system = x.transpose() * x;
  system.diagonal() += lambda * d_diag;
  const Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14))
    throw NumericalError(
        "projection update: singular system (features are rank deficient); use lambda > 0");
  return llt.solve(x.transpose() * target);
}

inline Matrix update_p(const Matrix& x, const CodeMatrix& b, double lambda,
                       const Vector& d_diag) {
  return update_p(x, b.to_real(), lambda, d_diag);
}

/// alpha_v proportional to (gamma C_v)^(1 / (1 - gamma)). Evaluated in the
/// log domain; non-positive costs are clamped to 1e-12.
inline Vector update_alpha(std::span<const double> costs, double gamma) {
  if (!(gamma > 1.0)) throw UsageError("gamma must be > 1");
  if (costs.empty()) throw UsageError("update_alpha: no costs");
  Vector logits(static_cast<Index>(costs.size()));
  for (std::size_t v = 0; v < costs.size(); ++v) {
    double c = costs[v];
    if (!(c > 0.0)) {
      log_warn("modality cost " + std::to_string(c) + " clamped to 1e-12");
      c = 1e-12;
    }
    logits(static_cast<Index>(v)) = std::log(gamma * c) / (1.0 - gamma);
  }
  const Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

namespace detail {

inline std::vector<Matrix> feature_data(std::span<const FeatureMatrix> x) {
  std::vector<Matrix> out;
  out.reserve(x.size());
  for (const auto& m : x) out.push_back(m.data);
  return out;
}

inline void validate_training_input(std::span<const FeatureMatrix> x,
                                    const TrainConfig& cfg) {
  if (x.empty()) throw UsageError("training needs at least one modality");
  if (cfg.hyper.lambdas.size() != x.size())
    throw UsageError("need one lambda per modality (" + std::to_string(x.size()) +
                     "), got " + std::to_string(cfg.hyper.lambdas.size()));
  if (cfg.bits < 1) throw UsageError("code length must be >= 1");
  if (!(cfg.hyper.gamma > 1.0)) throw UsageError("gamma must be > 1");
  if (cfg.hyper.rho < 0.0 || cfg.hyper.mu < 0.0)
    throw UsageError("rho and mu must be >= 0");
  if (cfg.hyper.max_iters < 1) throw UsageError("max_iters must be >= 1");
  const Index n = x.front().rows();
  if (n < 2) throw DataError("training needs at least 2 samples");
  for (const auto& m : x) {
    if (m.rows() != n) throw DataError("modalities disagree on sample count");
    m.validate(false);
  }
}

}  // namespace detail

/// Runs the alternating minimization on a prebuilt graph over `x`.
inline UchModel train_on_graph(std::span<const FeatureMatrix> x,
                               const AffinityGraph& graph, const TrainConfig& cfg) {
  detail::validate_training_input(x, cfg);
  const auto& h = cfg.hyper;
  if (graph.variant() != cfg.variant)
    throw UsageError("graph variant does not match the configured variant");
  if (graph.size() != x.front().rows())
    throw DataError("graph size does not match the training set");

  const std::vector<Matrix> xs = detail::feature_data(x);
  const std::size_t v_count = xs.size();
  TrainState state = init_state(xs, cfg.bits, derive_seed(h.seed, "init"), h.epsilon);

  std::optional<LleCodeSolver> lle_solver;
  std::optional<GraphLaplacian> lap;
  if (cfg.variant == Variant::kLle)
    lle_solver.emplace(graph, h.rho);
  else
    lap.emplace(laplacian(graph));

  ObjectiveWeights weights{state.alpha, h.gamma, h.lambdas, h.rho, 0.0};
  const auto objective_at = [&](const CodeMatrix& b) {
    weights.alphas = state.alpha;
    return relaxed_objective(weights, xs, state.p, b.to_real(), b, graph);
  };

  std::ofstream log_file;
  if (!cfg.log_path.empty()) {
    log_file.open(cfg.log_path, std::ios::trunc);
    if (!log_file)
      throw DataError("cannot open training log '" + cfg.log_path.string() + "'");
    log_file.precision(17);
    log_file << "iteration,objective";
    for (std::size_t v = 0; v < v_count; ++v) log_file << ",alpha_" << v + 1;
    for (std::size_t v = 0; v < v_count; ++v) log_file << ",cost_" << v + 1;
    log_file << ",codes_accepted\n";
  }

  double previous = objective_at(state.b);
  for (int it = 1; it <= h.max_iters; ++it) {
    for (std::size_t v = 0; v < v_count; ++v)
      state.d_diag[v] = irls_weights(state.p[v], h.epsilon);

    double alpha_eff = 0.0;
    for (std::size_t v = 0; v < v_count; ++v)
      alpha_eff += std::pow(state.alpha(static_cast<Index>(v)), h.gamma);
    const Matrix embedding = combined_embedding(xs, state.p, state.alpha, h.gamma);

    CodeUpdate proposal;
    if (lle_solver) {
      const Matrix rhs =
          h.mu != 0.0 ? Matrix(embedding + h.mu * state.b.to_real()) : embedding;
      proposal.f = lle_solver->solve(alpha_eff + h.mu, rhs);
      proposal.b = sign_quantize(proposal.f);
    } else {
      proposal = update_b_lpp(embedding, *lap, alpha_eff, h.rho, h.mu, &state.b);
    }

    bool accepted = true;
    if (h.monotone_guard && !(proposal.b == state.b))
      accepted = objective_at(proposal.b) <= objective_at(state.b);
    state.f = std::move(proposal.f);
    if (accepted) state.b = std::move(proposal.b);

    const Matrix b_real = state.b.to_real();
    std::vector<double> costs(v_count);
    for (std::size_t v = 0; v < v_count; ++v) {
      state.p[v] = update_p(xs[v], b_real, h.lambdas[v], state.d_diag[v]);
      costs[v] = modality_cost(xs[v], state.p[v], b_real, h.lambdas[v]);
    }
    state.alpha = update_alpha(costs, h.gamma);

    const double objective = objective_at(state.b);
    if (!std::isfinite(objective))
      throw NumericalError("non-finite objective at iteration " + std::to_string(it));
    state.objective_trace.push_back(objective);

    IterationRecord rec{it, objective, state.alpha, costs, accepted};
    if (log_file.is_open()) {
      log_file << it << ',' << objective;
      for (std::size_t v = 0; v < v_count; ++v)
        log_file << ',' << state.alpha(static_cast<Index>(v));
      for (const double c : costs) log_file << ',' << c;
      log_file << ',' << (accepted ? 1 : 0) << '\n';
    }
    log_debug("iteration " + std::to_string(it) + " objective " + std::to_string(objective));
    if (cfg.on_iteration) cfg.on_iteration(rec);

    const double change =
        std::abs(objective - previous) / std::max(previous, h.epsilon);
    previous = objective;
    if (change < h.tol) break;
  }

  UchModel model;
  model.variant = cfg.variant;
  model.hyper = h;
  model.projections = std::move(state.p);
  model.alphas = state.alpha;
  for (const auto& m : x) model.means.push_back(m.mean);
  model.training_codes = std::move(state.b);
  model.objective_trace = std::move(state.objective_trace);
  return model;
}

/// Builds the graph on the concatenated training features, then trains.
inline UchModel train(std::span<const FeatureMatrix> x, const TrainConfig& cfg) {
  detail::validate_training_input(x, cfg);
  const std::vector<FeatureMatrix> parts(x.begin(), x.end());
  const AffinityGraph graph = build_graph(concatenate(parts), cfg.variant, cfg.hyper);
  return train_on_graph(x, graph, cfg);
}

inline UchModel train(const LabeledSplit& split, const TrainConfig& cfg) {
  return train(std::span<const FeatureMatrix>(split.train), cfg);
}

}  // namespace uch
