#pragma once

#include <cstddef>
#include <vector>

#include "scatterforge/linalg.hpp"
#include "scatterforge/model.hpp"

namespace scatterforge {

// Weights of two discrete distributions on the simplex.
struct EmpiricalWeights {
  std::vector<double> u;
  std::vector<double> v;

  static EmpiricalWeights uniform(std::size_t n, std::size_t m);
  void validate() const;
  bool is_uniform(double tol = 1e-12) const;
};

struct CostMatrix {
  Matrix values;
};

struct TransportPlan {
  Matrix values;
  double marginal_tolerance = 0.0;
};

struct OtResult {
  TransportPlan plan;
  double distance = 0.0;  // <T, C>, entropy excluded
  std::size_t iterations = 0;
  double marginal_violation = 0.0;
  bool converged = true;
};

struct SinkhornConfig {
  double reg = 0.01;
  std::size_t max_iter = 1000;
  double tol = 1e-6;
  // Warm-start by annealing reg from the cost range (stages of at most
  // stage_iter passes, reg multiplied by eps_decay per stage).
  bool eps_scaling = true;
  double eps_decay = 0.5;
  std::size_t stage_iter = 50;
};

struct IpotConfig {
  double beta = 1.0;
  std::size_t outer_iter = 50;
  std::size_t inner_iter = 1;
  // Only used to set the convergence flag.
  double tol = 1e-6;
};

enum class SolverKind { sinkhorn, ipot, exact };

struct OtSolver {
  SolverKind kind = SolverKind::sinkhorn;
  SinkhornConfig sinkhorn;
  IpotConfig ipot;
};

// C_ij = 1 - <f_i, g_j> / (|f_i| |g_j|), norms floored at 1e-12.
CostMatrix cosine_cost(const Matrix& features_clean, const Matrix& features_pert);

// Largest absolute deviation of the plan's row/column sums from u/v.
double marginal_violation(const Matrix& plan, const EmpiricalWeights& w);

// Entropic OT by log-domain Sinkhorn scaling. Stops once the marginal
// violation drops below cfg.tol; otherwise returns the iterate with the
// smallest violation and converged = false.
OtResult sinkhorn(const CostMatrix& cost, const EmpiricalWeights& w, const SinkhornConfig& cfg = {});

// Inexact proximal point OT: each outer step runs inner_iter scaling passes
// against the kernel exp(-C / beta) * T_prev (computed in log space).
OtResult ipot(const CostMatrix& cost, const EmpiricalWeights& w, const IpotConfig& cfg = {});

// Exhaustive search over permutations; square, n <= 9, uniform marginals only.
OtResult exact_ot(const CostMatrix& cost, const EmpiricalWeights& w);

OtResult solve_ot(const CostMatrix& cost, const EmpiricalWeights& w, const OtSolver& solver);

struct FeatureMatching {
  double distance = 0.0;
  TransportPlan plan;
  CostMatrix costs;
  OtResult solve;
};

// OT distance between the clean and perturbed batches' f_theta features under
// cosine cost, uniform weights.
FeatureMatching feature_matching_distance(const MlpParams& params, const Matrix& clean, const Matrix& pert,
                                          const OtSolver& solver);

const char* to_string(SolverKind kind);
SolverKind solver_kind_from_string(const std::string& name);

}  // namespace scatterforge
