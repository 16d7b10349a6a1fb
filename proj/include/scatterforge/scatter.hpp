#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "scatterforge/linalg.hpp"
#include "scatterforge/model.hpp"
#include "scatterforge/ot.hpp"
#include "scatterforge/rng.hpp"

namespace scatterforge {

enum class MatchKind { ot, uniform, identity };

struct MatchScheme {
  MatchKind kind = MatchKind::ot;
  OtSolver solver;
};

struct ScatterConfig {
  double epsilon = 8.0 / 255.0;
  std::size_t iterations = 1;
  // Defaults to epsilon when unset.
  std::optional<double> step_size;
  MatchScheme scheme;
  std::uint64_t seed = 0;

  double effective_step() const { return step_size.value_or(epsilon); }
  void validate() const;
};

struct SchemePlan {
  TransportPlan plan;
  CostMatrix costs;
};

// Transport plan between clean and perturbed features: the OT solution, the
// constant 1/n^2 plan, or diag(1/n). Costs are always the cosine costs.
SchemePlan plan_for_scheme(const MatchScheme& scheme, const MlpParams& params, const Matrix& clean,
                           const Matrix& pert);
SchemePlan plan_for_features(const MatchScheme& scheme, const Matrix& clean_features, const Matrix& pert_features);

// d<T, C(F, G)>/dG with T held fixed. Row j is sum_i T_ij dC_ij/dg_j.
Matrix cosine_objective_feature_grad(const Matrix& clean_features, const Matrix& pert_features,
                                     const Matrix& plan);

// Gradient of <T, C(f(clean), f(pert))> w.r.t. the perturbed inputs, plan frozen.
Matrix scatter_grad(const MlpParams& params, const Matrix& clean, const Matrix& pert, const TransportPlan& plan,
                    const CostMatrix& costs);

// <T, C(f(clean), f(pert))> for a fixed plan.
double frozen_plan_objective(const MlpParams& params, const Matrix& clean, const Matrix& pert,
                             const TransportPlan& plan);

// Perturbs the whole batch by sign ascent on the feature matching distance.
// Takes inputs only: labels are never visible here.
Matrix feature_scatter(const MlpParams& params, const Matrix& clean, const ScatterConfig& cfg, Rng& rng);
// Same, with an Rng seeded from cfg.seed.
Matrix feature_scatter(const MlpParams& params, const Matrix& clean, const ScatterConfig& cfg);

const char* to_string(MatchKind kind);
MatchKind match_kind_from_string(const std::string& name);

}  // namespace scatterforge
