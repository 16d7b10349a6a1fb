#include "scatterforge/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "scatterforge/errors.hpp"

namespace scatterforge {

namespace {

constexpr double kNormFloor = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> logs(const std::vector<double>& w) {
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] > 0.0 ? std::log(w[i]) : kNegInf;
  return out;
}

void check_instance(const CostMatrix& cost, const EmpiricalWeights& w) {
  w.validate();
  require(cost.values.rows() == w.u.size() && cost.values.cols() == w.v.size(),
          "ot: cost matrix shape does not match weights");
  require(cost.values.rows() > 0 && cost.values.cols() > 0, "ot: empty instance");
  require(cost.values.all_finite(), "ot: cost matrix has non-finite entries");
}

// A single source or single target forces the plan to u v^T.
bool forced_plan(const CostMatrix& cost, const EmpiricalWeights& w, OtResult& out) {
  if (w.u.size() != 1 && w.v.size() != 1) return false;
  Matrix plan(w.u.size(), w.v.size());
  for (std::size_t i = 0; i < w.u.size(); ++i)
    for (std::size_t j = 0; j < w.v.size(); ++j) plan(i, j) = w.u[i] * w.v[j];
  out.distance = frobenius_dot(plan, cost.values);
  out.marginal_violation = marginal_violation(plan, w);
  out.plan = {std::move(plan), out.marginal_violation};
  out.iterations = 0;
  out.converged = true;
  return true;
}

// One pass of log-domain scaling: f <- log u - LSE_j(K + g), g <- log v - LSE_i(K + f).
// Returns the row-marginal violation of the incoming (f, g), which falls out
// of the f update for free.
double scale_once(const Matrix& log_kernel, const std::vector<double>& log_u, const std::vector<double>& log_v,
                  std::vector<double>& f, std::vector<double>& g, std::vector<double>& scratch) {
  const std::size_t n = log_kernel.rows();
  const std::size_t m = log_kernel.cols();
  scratch.resize(std::max(n, m));
  double row_violation = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(log_u[i])) {
      f[i] = kNegInf;
      continue;
    }
    auto k = log_kernel.row(i);
    for (std::size_t j = 0; j < m; ++j) scratch[j] = k[j] + g[j];
    const double lse = log_sum_exp(std::span<const double>(scratch.data(), m));
    const double row_mass = std::isfinite(f[i] + lse) ? std::exp(f[i] + lse) : 0.0;
    row_violation = std::max(row_violation, std::abs(row_mass - std::exp(log_u[i])));
    f[i] = log_u[i] - lse;
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (!std::isfinite(log_v[j])) {
      g[j] = kNegInf;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) scratch[i] = log_kernel(i, j) + f[i];
    g[j] = log_v[j] - log_sum_exp(std::span<const double>(scratch.data(), n));
  }
  return row_violation;
}

}  // namespace

EmpiricalWeights EmpiricalWeights::uniform(std::size_t n, std::size_t m) {
  require(n > 0 && m > 0, "EmpiricalWeights::uniform: empty support");
  return {std::vector<double>(n, 1.0 / static_cast<double>(n)), std::vector<double>(m, 1.0 / static_cast<double>(m))};
}

void EmpiricalWeights::validate() const {
  require(!u.empty() && !v.empty(), "EmpiricalWeights: empty support");
  for (double x : u) require(x >= 0.0 && std::isfinite(x), "EmpiricalWeights: u has a negative entry");
  for (double x : v) require(x >= 0.0 && std::isfinite(x), "EmpiricalWeights: v has a negative entry");
  const double su = std::accumulate(u.begin(), u.end(), 0.0);
  const double sv = std::accumulate(v.begin(), v.end(), 0.0);
  require(std::abs(su - 1.0) <= 1e-12, "EmpiricalWeights: u does not sum to 1");
  require(std::abs(sv - 1.0) <= 1e-12, "EmpiricalWeights: v does not sum to 1");
}

bool EmpiricalWeights::is_uniform(double tol) const {
  const double pu = 1.0 / static_cast<double>(u.size());
  const double pv = 1.0 / static_cast<double>(v.size());
  return std::all_of(u.begin(), u.end(), [&](double x) { return std::abs(x - pu) <= tol; }) &&
         std::all_of(v.begin(), v.end(), [&](double x) { return std::abs(x - pv) <= tol; });
}

CostMatrix cosine_cost(const Matrix& features_clean, const Matrix& features_pert) {
  require(features_clean.cols() >= 1, "cosine_cost: feature width must be at least 1");
  require(features_clean.cols() == features_pert.cols(), "cosine_cost: feature widths differ");
  auto norms = [](const Matrix& m) {
    std::vector<double> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double s = 0.0;
      for (double v : m.row(i)) s += v * v;
      out[i] = std::max(std::sqrt(s), kNormFloor);
    }
    return out;
  };
  const auto na = norms(features_clean);
  const auto nb = norms(features_pert);
  Matrix dots = matmul_nt(features_clean, features_pert);
  for (std::size_t i = 0; i < dots.rows(); ++i)
    for (std::size_t j = 0; j < dots.cols(); ++j)
      dots(i, j) = std::clamp(1.0 - dots(i, j) / (na[i] * nb[j]), 0.0, 2.0);
  return {std::move(dots)};
}

double marginal_violation(const Matrix& plan, const EmpiricalWeights& w) {
  double worst = 0.0;
  const auto rs = row_sums(plan);
  const auto cs = col_sums(plan);
  for (std::size_t i = 0; i < rs.size(); ++i) worst = std::max(worst, std::abs(rs[i] - w.u[i]));
  for (std::size_t j = 0; j < cs.size(); ++j) worst = std::max(worst, std::abs(cs[j] - w.v[j]));
  return worst;
}

namespace {

// Stabilized scaling state: the current iterate is
//   T_ij = a_i * exp(-C_ij / reg + f_i + g_j) * b_j
// Passes update a, b with multiplications only; whenever they leave a safe
// range (or a row/column mass underflows) they are folded into the log
// potentials f, g and the kernel is rebuilt.
class ScalingState {
 public:
  ScalingState(const Matrix& cost, const std::vector<double>& u, const std::vector<double>& v)
      : cost_(cost), u_(u), v_(v), log_u_(logs(u)), log_v_(logs(v)), f_(u.size(), 0.0), g_(v.size(), 0.0),
        a_(u.size(), 1.0), b_(v.size(), 1.0), kb_(u.size()), kta_(v.size()) {}

  void set_reg(double reg) {
    absorb_scalings();
    if (reg_ > 0.0) {
      for (double& x : f_) x *= reg_ / reg;
      for (double& x : g_) x *= reg_ / reg;
    }
    reg_ = reg;
    rebuild();
  }

  // One a-then-b update. Returns the row-marginal violation of the incoming
  // iterate (its columns are already exact after the previous pass).
  double pass() {
    const std::size_t n = u_.size();
    const std::size_t m = v_.size();
    double violation = 0.0;
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      auto k = kernel_.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += k[j] * b_[j];
      kb_[i] = s;
      violation = std::max(violation, std::abs(a_[i] * s - u_[i]));
      if (u_[i] > 0.0 && !(s > 0.0 && std::isfinite(s))) ok = false;
    }
    if (!ok) return log_domain_pass();
    for (std::size_t i = 0; i < n; ++i) a_[i] = u_[i] > 0.0 ? u_[i] / kb_[i] : 0.0;
    std::fill(kta_.begin(), kta_.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto k = kernel_.row(i);
      const double ai = a_[i];
      for (std::size_t j = 0; j < m; ++j) kta_[j] += k[j] * ai;
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (v_[j] > 0.0 && !(kta_[j] > 0.0 && std::isfinite(kta_[j]))) {
        log_domain_pass();
        return violation;
      }
      b_[j] = v_[j] > 0.0 ? v_[j] / kta_[j] : 0.0;
    }
    if (out_of_range(a_) || out_of_range(b_)) {
      absorb_scalings();
      rebuild();
    }
    return violation;
  }

  std::vector<double> log_f() const { return fold(f_, a_); }
  std::vector<double> log_g() const { return fold(g_, b_); }

  Matrix plan_from(const std::vector<double>& lf, const std::vector<double>& lg) const {
    Matrix plan(u_.size(), v_.size());
    for (std::size_t i = 0; i < plan.rows(); ++i)
      for (std::size_t j = 0; j < plan.cols(); ++j) {
        const double e = -cost_(i, j) / reg_ + lf[i] + lg[j];
        plan(i, j) = std::isfinite(e) ? std::exp(e) : 0.0;
      }
    return plan;
  }

 private:
  static bool out_of_range(const std::vector<double>& x) {
    for (double v : x)
      if (v != 0.0 && (v > 1e50 || v < 1e-50)) return true;
    return false;
  }

  static std::vector<double> fold(const std::vector<double>& pot, const std::vector<double>& scaling) {
    std::vector<double> out(pot.size());
    for (std::size_t i = 0; i < pot.size(); ++i)
      out[i] = scaling[i] > 0.0 ? pot[i] + std::log(scaling[i]) : kNegInf;
    return out;
  }

  void absorb_scalings() {
    f_ = fold(f_, a_);
    g_ = fold(g_, b_);
    std::fill(a_.begin(), a_.end(), 1.0);
    std::fill(b_.begin(), b_.end(), 1.0);
  }

  void rebuild() {
    kernel_ = Matrix(u_.size(), v_.size());
    for (std::size_t i = 0; i < kernel_.rows(); ++i)
      for (std::size_t j = 0; j < kernel_.cols(); ++j) {
        const double e = -cost_(i, j) / reg_ + f_[i] + g_[j];
        kernel_(i, j) = std::isfinite(e) ? std::exp(e) : 0.0;
      }
  }

  double log_domain_pass() {
    absorb_scalings();
    const Matrix log_kernel = scale(cost_, -1.0 / reg_);
    const double violation = scale_once(log_kernel, log_u_, log_v_, f_, g_, scratch_);
    rebuild();
    return violation;
  }

  const Matrix& cost_;
  const std::vector<double>& u_;
  const std::vector<double>& v_;
  std::vector<double> log_u_, log_v_;
  double reg_ = 0.0;
  std::vector<double> f_, g_, a_, b_, kb_, kta_, scratch_;
  Matrix kernel_;
};

}  // namespace

OtResult sinkhorn(const CostMatrix& cost, const EmpiricalWeights& w, const SinkhornConfig& cfg) {
  require(cfg.reg > 0.0, "sinkhorn: regularization must be positive");
  check_instance(cost, w);
  OtResult out;
  if (forced_plan(cost, w, out)) return out;

  ScalingState state(cost.values, w.u, w.v);

  // Warm start: anneal reg geometrically from the cost range down to cfg.reg,
  // carrying the dual potentials between stages. Warm-up passes count against
  // max_iter.
  std::size_t it = 0;
  const double cost_range = max_abs(cost.values);
  if (cfg.eps_scaling && cost_range > cfg.reg) {
    double reg = cost_range;
    while (reg > cfg.reg) {
      state.set_reg(reg);
      for (std::size_t k = 0; k < cfg.stage_iter && it + 1 < cfg.max_iter; ++k) {
        ++it;
        if (state.pass() < 1e-3 && k > 0) break;
      }
      reg = std::max(reg * cfg.eps_decay, cfg.reg);
    }
  }
  state.set_reg(cfg.reg);

  std::vector<double> best_f, best_g;
  double best_violation = std::numeric_limits<double>::infinity();
  std::size_t best_iter = 0;
  bool converged = false;

  // Pass k+1's row check measures the full violation of iterate k.
  const std::size_t first = it;
  while (it < cfg.max_iter) {
    auto prev_f = state.log_f();
    auto prev_g = state.log_g();
    const double violation = state.pass();
    if (it > first) {
      if (violation < best_violation) {
        best_violation = violation;
        best_f = std::move(prev_f);
        best_g = std::move(prev_g);
        best_iter = it;
      }
      if (violation < cfg.tol) {
        converged = true;
        break;
      }
    }
    ++it;
  }
  if (!converged) {
    auto lf = state.log_f();
    auto lg = state.log_g();
    const double last = marginal_violation(state.plan_from(lf, lg), w);
    if (best_f.empty() || last <= best_violation) {
      best_f = std::move(lf);
      best_g = std::move(lg);
      best_iter = it;
      converged = last < cfg.tol;
    }
  }
  Matrix plan = state.plan_from(best_f, best_g);
  out.distance = frobenius_dot(plan, cost.values);
  out.marginal_violation = marginal_violation(plan, w);
  out.plan = {std::move(plan), out.marginal_violation};
  out.iterations = best_iter;
  out.converged = converged;
  return out;
}

OtResult ipot(const CostMatrix& cost, const EmpiricalWeights& w, const IpotConfig& cfg) {
  require(cfg.beta > 0.0, "ipot: beta must be positive");
  require(cfg.inner_iter >= 1, "ipot: inner_iter must be at least 1");
  check_instance(cost, w);
  OtResult out;
  if (forced_plan(cost, w, out)) return out;

  const std::size_t n = w.u.size();
  const std::size_t m = w.v.size();
  const Matrix step_kernel = scale(cost.values, -1.0 / cfg.beta);
  const auto log_u = logs(w.u);
  const auto log_v = logs(w.v);
  Matrix log_plan(n, m, 0.0);
  std::vector<double> f(n, 0.0), g(m, 0.0), scratch;
  for (std::size_t j = 0; j < m; ++j) g[j] = -std::log(static_cast<double>(m));

  for (std::size_t t = 0; t < cfg.outer_iter; ++t) {
    Matrix log_q = add(log_plan, step_kernel);
    for (std::size_t l = 0; l < cfg.inner_iter; ++l) scale_once(log_q, log_u, log_v, f, g, scratch);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) log_plan(i, j) = log_q(i, j) + f[i] + g[j];
  }
  Matrix plan(n, m);
  for (std::size_t k = 0; k < plan.size(); ++k) {
    const double e = log_plan.data()[k];
    plan.data()[k] = std::isfinite(e) ? std::exp(e) : 0.0;
  }
  out.marginal_violation = marginal_violation(plan, w);
  out.distance = frobenius_dot(plan, cost.values);
  out.plan = {std::move(plan), out.marginal_violation};
  out.iterations = cfg.outer_iter;
  out.converged = out.marginal_violation < cfg.tol;
  return out;
}

OtResult exact_ot(const CostMatrix& cost, const EmpiricalWeights& w) {
  check_instance(cost, w);
  const std::size_t n = w.u.size();
  if (w.v.size() != n) throw UnsupportedInstance("exact_ot: requires a square instance");
  if (n > 9) throw UnsupportedInstance("exact_ot: n = " + std::to_string(n) + " exceeds the limit of 9");
  if (!w.is_uniform()) throw UnsupportedInstance("exact_ot: requires uniform marginals");

  std::vector<std::size_t> perm(n), best(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best_sum = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += cost.values(i, perm[i]);
    if (s < best_sum) {
      best_sum = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  OtResult out;
  Matrix plan(n, n);
  const double mass = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) plan(i, best[i]) = mass;
  out.distance = best_sum / static_cast<double>(n);
  out.marginal_violation = marginal_violation(plan, w);
  out.plan = {std::move(plan), out.marginal_violation};
  out.iterations = 1;
  out.converged = true;
  return out;
}

OtResult solve_ot(const CostMatrix& cost, const EmpiricalWeights& w, const OtSolver& solver) {
  switch (solver.kind) {
    case SolverKind::sinkhorn:
      return sinkhorn(cost, w, solver.sinkhorn);
    case SolverKind::ipot:
      return ipot(cost, w, solver.ipot);
    case SolverKind::exact:
      return exact_ot(cost, w);
  }
  throw ContractError("solve_ot: unknown solver");
}

FeatureMatching feature_matching_distance(const MlpParams& params, const Matrix& clean, const Matrix& pert,
                                          const OtSolver& solver) {
  require(clean.cols() == pert.cols(), "feature_matching_distance: input widths differ");
  FeatureMatching fm;
  fm.costs = cosine_cost(logits(params, clean), logits(params, pert));
  fm.solve = solve_ot(fm.costs, EmpiricalWeights::uniform(clean.rows(), pert.rows()), solver);
  fm.distance = fm.solve.distance;
  fm.plan = fm.solve.plan;
  return fm;
}

const char* to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::sinkhorn:
      return "sinkhorn";
    case SolverKind::ipot:
      return "ipot";
    case SolverKind::exact:
      return "exact";
  }
  return "?";
}

SolverKind solver_kind_from_string(const std::string& name) {
  if (name == "sinkhorn") return SolverKind::sinkhorn;
  if (name == "ipot") return SolverKind::ipot;
  if (name == "exact") return SolverKind::exact;
  throw ContractError("unknown OT solver '" + name + "' (expected sinkhorn, ipot or exact)");
}

}  // namespace scatterforge
