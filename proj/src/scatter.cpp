#include "scatterforge/scatter.hpp"

#include <algorithm>
#include <cmath>

#include "scatterforge/attacks.hpp"
#include "scatterforge/errors.hpp"

namespace scatterforge {

namespace {

constexpr double kNormFloor = 1e-12;

double row_norm(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return std::sqrt(s);
}

}  // namespace

void ScatterConfig::validate() const {
  require(epsilon >= 0.0 && epsilon <= 1.0, "ScatterConfig: epsilon must lie in [0,1]");
  require(effective_step() >= 0.0, "ScatterConfig: step_size must be nonnegative");
}

SchemePlan plan_for_features(const MatchScheme& scheme, const Matrix& clean_features, const Matrix& pert_features) {
  const std::size_t n = clean_features.rows();
  require(n == pert_features.rows(), "plan_for_scheme: batch sizes differ");
  require(n > 0, "plan_for_scheme: empty batch");
  SchemePlan out;
  out.costs = cosine_cost(clean_features, pert_features);
  const double dn = static_cast<double>(n);
  switch (scheme.kind) {
    case MatchKind::ot:
      out.plan = solve_ot(out.costs, EmpiricalWeights::uniform(n, n), scheme.solver).plan;
      break;
    case MatchKind::uniform:
      out.plan = {Matrix(n, n, 1.0 / (dn * dn)), 0.0};
      break;
    case MatchKind::identity: {
      Matrix diag(n, n);
      for (std::size_t i = 0; i < n; ++i) diag(i, i) = 1.0 / dn;
      out.plan = {std::move(diag), 0.0};
      break;
    }
  }
  return out;
}

SchemePlan plan_for_scheme(const MatchScheme& scheme, const MlpParams& params, const Matrix& clean,
                           const Matrix& pert) {
  return plan_for_features(scheme, logits(params, clean), logits(params, pert));
}

Matrix cosine_objective_feature_grad(const Matrix& clean_features, const Matrix& pert_features,
                                     const Matrix& plan) {
  const std::size_t n = clean_features.rows();
  const std::size_t m = pert_features.rows();
  const std::size_t k = clean_features.cols();
  require(pert_features.cols() == k, "cosine_objective_feature_grad: feature widths differ");
  require(plan.rows() == n && plan.cols() == m, "cosine_objective_feature_grad: plan shape mismatch");

  std::vector<double> na(n), nb(m), nb_raw(m);
  for (std::size_t i = 0; i < n; ++i) na[i] = std::max(row_norm(clean_features.row(i)), kNormFloor);
  for (std::size_t j = 0; j < m; ++j) {
    nb_raw[j] = row_norm(pert_features.row(j));
    nb[j] = std::max(nb_raw[j], kNormFloor);
  }
  const Matrix dots = matmul_nt(clean_features, pert_features);

  // c_ij = 1 - <a_i, b_j> / (|a_i| |b_j|)
  // dc_ij/db_j = -(a_i - (<a_i, b_j> / |b_j|^2) b_j) / (|a_i| |b_j|)
  // Below the norm floor |b_j| is a constant and the radial term drops.
  Matrix grad(m, k);
  for (std::size_t j = 0; j < m; ++j) {
    auto g = grad.row(j);
    auto b = pert_features.row(j);
    const bool radial = nb_raw[j] >= kNormFloor;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = plan(i, j);
      if (t == 0.0) continue;
      auto a = clean_features.row(i);
      const double coef = -t / (na[i] * nb[j]);
      const double proj = radial ? dots(i, j) / (nb[j] * nb[j]) : 0.0;
      for (std::size_t c = 0; c < k; ++c) g[c] += coef * (a[c] - proj * b[c]);
    }
  }
  return grad;
}

Matrix scatter_grad(const MlpParams& params, const Matrix& clean, const Matrix& pert, const TransportPlan& plan,
                    const CostMatrix& costs) {
  require(clean.cols() == pert.cols(), "scatter_grad: input widths differ");
  require(costs.values.rows() == plan.values.rows() && costs.values.cols() == plan.values.cols(),
          "scatter_grad: plan and cost shapes differ");
  const Matrix clean_features = logits(params, clean);
  auto fwd = forward(params, pert);
  const Matrix upstream = cosine_objective_feature_grad(clean_features, fwd.logits, plan.values);
  return backward(params, fwd.trace, upstream).inputs;
}

double frozen_plan_objective(const MlpParams& params, const Matrix& clean, const Matrix& pert,
                             const TransportPlan& plan) {
  return frobenius_dot(plan.values, cosine_cost(logits(params, clean), logits(params, pert)).values);
}

Matrix feature_scatter(const MlpParams& params, const Matrix& clean, const ScatterConfig& cfg, Rng& rng) {
  cfg.validate();
  const double step = cfg.effective_step();
  Matrix pert = random_perturb(clean, cfg.epsilon, rng);
  if (cfg.iterations == 0 || cfg.epsilon == 0.0) return pert;
  const Matrix clean_features = logits(params, clean);
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    auto fwd = forward(params, pert);
    const auto matched = plan_for_features(cfg.scheme, clean_features, fwd.logits);
    const Matrix upstream = cosine_objective_feature_grad(clean_features, fwd.logits, matched.plan.values);
    const Matrix direction = sign(backward(params, fwd.trace, upstream).inputs);
    Matrix candidate = pert;
    for (std::size_t k = 0; k < candidate.size(); ++k) candidate.data()[k] += step * direction.data()[k];
    pert = project(candidate, clean, cfg.epsilon);
  }
  return pert;
}

Matrix feature_scatter(const MlpParams& params, const Matrix& clean, const ScatterConfig& cfg) {
  Rng rng(cfg.seed);
  return feature_scatter(params, clean, cfg, rng);
}

const char* to_string(MatchKind kind) {
  switch (kind) {
    case MatchKind::ot:
      return "ot";
    case MatchKind::uniform:
      return "uniform";
    case MatchKind::identity:
      return "identity";
  }
  return "?";
}

MatchKind match_kind_from_string(const std::string& name) {
  if (name == "ot") return MatchKind::ot;
  if (name == "uniform") return MatchKind::uniform;
  if (name == "identity") return MatchKind::identity;
  throw ContractError("unknown matching scheme '" + name + "' (expected ot, uniform or identity)");
}

}  // namespace scatterforge
