// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "scatterforge/attacks.hpp"
#include "scatterforge/checkpoint.hpp"
#include "scatterforge/cli.hpp"
#include "scatterforge/eval.hpp"
#include "scatterforge/io.hpp"
#include "scatterforge/ot.hpp"
#include "scatterforge/scatter.hpp"
#include "scatterforge/tables.hpp"
#include "scatterforge/train.hpp"

using namespace scatterforge;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-12); }

bool same_params(const MlpParams& a, const MlpParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t k = 0; k < a.layers.size(); ++k)
    if (a.layers[k].weight != b.layers[k].weight || a.layers[k].bias != b.layers[k].bias) return false;
  return true;
}

bool contained(const Matrix& out, const Matrix& x, double eps) {
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double v = out.data()[k];
    if (std::abs(v - x.data()[k]) > eps + 1e-12 || v < 0.0 || v > 1.0) return false;
  }
  return true;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome ot_oracle_equivalence() {
  Rng rng(derive_seed(0, "acceptance_ot"));
  OtSolver sink{SolverKind::sinkhorn, {}, {}};
  sink.sinkhorn.reg = 1e-3;
  sink.sinkhorn.tol = 1e-9;
  sink.sinkhorn.max_iter = 100000;
  OtSolver ip{SolverKind::ipot, {}, {}};
  ip.ipot.beta = 1.0;
  ip.ipot.outer_iter = 1000;
  const int n = 1000;
  int sink_ok = 0, ipot_ok = 0;
  double worst_violation = 0.0;
  const auto w = EmpiricalWeights::uniform(6, 6);
  for (int t = 0; t < n; ++t) {
    const CostMatrix c{oracle::random_matrix(rng, 6, 6, 0, 2)};
    const double exact = exact_ot(c, w).distance;
    const double brute = oracle::brute_force_assignment(c.values);
    if (rel_err(exact, brute) > 1e-12) return {false, fmt("exact solver disagrees with brute force on instance %d", t)};
    const auto s = solve_ot(c, w, sink);
    const auto i = solve_ot(c, w, ip);
    sink_ok += rel_err(s.distance, exact) <= 0.01;
    ipot_ok += rel_err(i.distance, exact) <= 0.01;
    worst_violation = std::max({worst_violation, marginal_violation(s.plan.values, w), marginal_violation(i.plan.values, w)});
  }
  const bool pass = sink_ok >= 990 && ipot_ok >= 990 && worst_violation <= 1e-6;
  return {pass, fmt("sinkhorn %d/%d, ipot %d/%d within 1%% of exact; worst marginal violation %.2e", sink_ok, n, ipot_ok,
                    n, worst_violation)};
}

Outcome sinkhorn_default_reg() {
  Rng rng(derive_seed(0, "acceptance_sinkhorn"));
  OtSolver sink{SolverKind::sinkhorn, {}, {}};
  sink.sinkhorn.reg = 0.01;
  sink.sinkhorn.max_iter = 1000;
  const auto w = EmpiricalWeights::uniform(60, 60);
  int ok = 0;
  std::size_t max_iters = 0;
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    Matrix a(60, 10), b(60, 10);
    for (auto& v : a.data()) v = rng.normal();
    for (auto& v : b.data()) v = rng.normal();
    const auto r = solve_ot(cosine_cost(a, b), w, sink);
    const double viol = marginal_violation(r.plan.values, w);
    ok += viol < 1e-4 && r.iterations <= 1000;
    worst = std::max(worst, viol);
    max_iters = std::max(max_iters, r.iterations);
  }
  return {ok == 1000, fmt("%d/1000 converged; worst violation %.2e; most iterations %zu", ok, worst, max_iters)};
}

Outcome gradient_fidelity() {
  Rng rng(derive_seed(0, "acceptance_gradients"));
  oracle::FdTally param, input, cw, scatter;
  for (int net = 0; net < 20; ++net) {
    const std::size_t d = 2 + rng.below(4), classes = 2 + rng.below(3);
    std::vector<std::size_t> dims{d};
    for (std::size_t k = 0, depth = 1 + rng.below(2); k < depth; ++k) dims.push_back(3 + rng.below(8));
    dims.push_back(classes);
    auto p = fixture::random_net(rng, dims);
    const std::size_t n = 3 + rng.below(3);
    Matrix x = oracle::random_matrix(rng, n, d, 0, 1);
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng.below(classes));
    const double s = rng.uniform(0.0, 0.5);

    const auto gp = grad_params(p, {x, y}, s).grads;
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
      auto& wd = p.layers[k].weight.data();
      for (std::size_t i = 0; i < wd.size(); ++i)
        param.record(gp.layers[k].weight.data()[i],
                     oracle::central_difference([&] { return oracle::scalar_loss(p, x, y, s); }, wd[i]));
      auto& bd = p.layers[k].bias;
      for (std::size_t i = 0; i < bd.size(); ++i)
        param.record(gp.layers[k].bias[i],
                     oracle::central_difference([&] { return oracle::scalar_loss(p, x, y, s); }, bd[i]));
    }

    const auto gx = grad_input(p, x, y, s);
    const auto gc = attack_loss_gradient(p, x, y, LossKind::cw_margin);
    for (std::size_t k = 0; k < x.size(); ++k) {
      input.record(gx.data()[k], oracle::central_difference([&] { return oracle::scalar_loss(p, x, y, s); }, x.data()[k]));
      cw.record(gc.data()[k], oracle::central_difference([&] { return oracle::scalar_cw_loss(p, x, y); }, x.data()[k]));
    }

    Matrix pert = project(add(x, oracle::random_matrix(rng, n, d, -0.1, 0.1)), x, 0.1);
    const auto sp = plan_for_scheme({MatchKind::ot, {}}, p, x, pert);
    const auto gs = scatter_grad(p, x, pert, sp.plan, sp.costs);
    for (std::size_t k = 0; k < pert.size(); ++k)
      scatter.record(gs.data()[k], oracle::central_difference(
                                       [&] { return oracle::frozen_plan_objective(p, x, pert, sp.plan.values); },
                                       pert.data()[k]));
  }
  const bool pass = param.pass_rate() >= 0.999 && input.pass_rate() >= 0.999 && cw.pass_rate() >= 0.999 &&
                    scatter.pass_rate() >= 0.999;
  return {pass, fmt("params %zu/%zu, inputs %zu/%zu, cw %zu/%zu, scatter %zu/%zu within 1e-5", param.passed,
                    param.checked, input.passed, input.checked, cw.passed, cw.checked, scatter.passed, scatter.checked)};
}

Outcome containment_and_determinism() {
  Rng rng(derive_seed(0, "acceptance_containment"));
  std::vector<MlpParams> nets;
  for (int k = 0; k < 50; ++k) {
    const std::size_t d = 2 + rng.below(3);
    nets.push_back(fixture::random_net(rng, {d, 2 + rng.below(6), 2 + rng.below(3)}));
  }
  const int total = 100000;
  int feasible = 0, repeatable = 0;
  for (int t = 0; t < total; ++t) {
    const auto& p = nets[rng.below(nets.size())];
    const std::size_t n = 1 + rng.below(4);
    LabeledBatch b{oracle::random_matrix(rng, n, p.input_dim(), 0, 1), std::vector<int>(n)};
    for (auto& v : b.inputs.data())
      if (rng.next_double() < 0.1) v = rng.below(2) == 1 ? 1.0 : 0.0;
    for (auto& v : b.labels) v = static_cast<int>(rng.below(p.classes()));
    const double eps = rng.uniform(0.0, 0.5);
    const std::uint64_t seed = rng.next_u64();
    const auto kind = rng.below(5);
    auto invoke = [&] {
      Rng r(seed);
      AttackConfig ac;
      ac.epsilon = eps;
      ac.step_size = std::max(eps / 4.0, 1e-3);
      ac.iterations = seed % 4;
      ac.random_init = (seed >> 8) % 2 == 0;
      ac.loss_kind = kind == 2 ? LossKind::cw_margin : LossKind::cross_entropy;
      switch (kind) {
        case 0:
          return fgsm(p, b, ac);
        case 1:
        case 2:
          return pgd(p, b, ac, r);
        case 3:
          return random_perturb(b.inputs, eps, r);
        default: {
          ScatterConfig sc;
          sc.epsilon = eps;
          sc.iterations = seed % 3;
          sc.scheme.kind = static_cast<MatchKind>((seed >> 4) % 3);
          sc.scheme.solver.kind = static_cast<SolverKind>((seed >> 6) % 2);
          return feature_scatter(p, b.inputs, sc, r);
        }
      }
    };
    const auto first = invoke();
    feasible += contained(first, b.inputs, eps);
    repeatable += first == invoke();
  }
  return {feasible == total && repeatable == total,
          fmt("%d/%d feasible, %d/%d bit-identical on rerun", feasible, total, repeatable, total)};
}

Outcome mode_collapse() {
  DeskBenchmark bench;
  bench.n_per_class = 100;
  const auto data = desk_data(bench);
  const auto init = desk_init(bench, 2, 2);
  auto fs = desk_scatter_config(bench, MatchKind::ot, SolverKind::sinkhorn);
  fs.epochs = 20;
  fs.transition_epochs = {10};
  fs.scatter.epsilon = 0.0;
  auto st = fs;
  st.mode = TrainMode::standard;
  const auto a = train(fs, data.train, init);
  const auto b = train(st, data.train, init);
  const bool train_same = same_params(a.params, b.params) && history_to_csv(a.history) == history_to_csv(b.history);

  Rng rng(derive_seed(0, "acceptance_collapse"));
  bool fgsm_same = true;
  for (int t = 0; t < 100; ++t) {
    const auto p = fixture::random_net(rng, {2, 8, 8, 2});
    LabeledBatch batch{oracle::random_matrix(rng, 10, 2, 0, 1), std::vector<int>(10)};
    for (auto& v : batch.labels) v = static_cast<int>(rng.below(2));
    AttackConfig ac;
    ac.epsilon = rng.uniform(1e-3, 0.3);
    ac.step_size = ac.epsilon;
    ac.iterations = 1;
    ac.random_init = false;
    Rng r(t);
    fgsm_same = fgsm_same && pgd(p, batch, ac, r) == fgsm(p, batch, ac);
  }

  bool blackbox_same = true;
  for (const auto& spec : {AttackSpec::make_fgsm(0.1, 1), AttackSpec::make_pgd(0.1, 20, 1), AttackSpec::make_cw(0.1, 20, 1)})
    blackbox_same = blackbox_same && blackbox_eval(a.params, a.params, data.test, spec) == robust_accuracy(a.params, data.test, spec);

  return {train_same && fgsm_same && blackbox_same,
          fmt("scatter(eps=0) vs standard trajectory %s; pgd(T=1) vs fgsm %s; blackbox(source==target) vs white-box %s",
              train_same ? "identical" : "DIFFERENT", fgsm_same ? "identical" : "DIFFERENT",
              blackbox_same ? "identical" : "DIFFERENT")};
}

struct DeskRun {
  TableRow standard;
  TableBundle tables;
  double ceiling = 0.0;
};

const DeskRun& desk_run() {
  static const DeskRun run = [] {
    DeskBenchmark bench;
    DeskRun r;
    const auto data = desk_data(bench);
    const auto init = desk_init(bench, 2, 2);
    r.standard = evaluate_row("Standard", train(desk_standard_config(bench), data.train, init).params, data.test,
                              bench.epsilon, bench.seed);
    r.tables = replicate_tables(bench);
    const auto matched = oracle::conflict_matching(data.test.inputs, data.test.labels, bench.epsilon);
    r.ceiling = static_cast<double>(data.test.size() - matched) / static_cast<double>(data.test.size());
    return r;
  }();
  return run;
}

const TableRow& row(const Table& t, const std::string& method) {
  for (const auto& r : t.rows)
    if (r.method == method) return r;
  throw std::runtime_error("missing row " + method);
}

Outcome desk_table1() {
  const auto& d = desk_run();
  const auto& fs = row(d.tables.perturbation, "FeaScatter");
  const bool a = d.standard.pgd20 <= d.standard.clean - 0.20;
  const bool b = fs.pgd20 >= d.standard.pgd20 + 0.20;
  const bool c = fs.clean >= d.standard.clean - 0.10;
  return {a && b && c,
          fmt("(a) %s standard clean %.3f PGD20 %.3f; (b) %s FeaScatter PGD20 %.3f vs standard + 0.20 = %.3f; "
              "(c) %s FeaScatter clean %.3f; robust-accuracy ceiling at eps 0.1 is %.3f",
              a ? "ok" : "FAIL", d.standard.clean, d.standard.pgd20, b ? "ok" : "FAIL", fs.pgd20,
              d.standard.pgd20 + 0.20, c ? "ok" : "FAIL", fs.clean, d.ceiling)};
}

Outcome desk_matching() {
  const auto& t = desk_run().tables.matching;
  const double ot = row(t, "OT").pgd20, un = row(t, "Uniform").pgd20, id = row(t, "Identity").pgd20;
  return {ot >= std::max(un, id) - 0.02, fmt("PGD20 OT %.3f, Uniform %.3f, Identity %.3f", ot, un, id)};
}

Outcome desk_solvers() {
  const auto& t = desk_run().tables.solver;
  const double s = row(t, "Sinkhorn").pgd20, i = row(t, "IPOT").pgd20;
  return {std::abs(s - i) <= 0.05, fmt("PGD20 Sinkhorn %.3f, IPOT %.3f", s, i)};
}

Outcome scatter_ascent() {
  const auto& m = fixture::moons();
  Rng rng(derive_seed(0, "acceptance_ascent"));
  int up = 0;
  for (int t = 0; t < 200; ++t) {
    std::vector<std::size_t> idx(60);
    for (auto& i : idx) i = rng.below(m.data.train.size());
    const Matrix clean = gather_rows(m.data.train.inputs, idx);
    ScatterConfig cfg;
    cfg.epsilon = 0.1;
    cfg.step_size = 0.01;
    cfg.iterations = 1;
    cfg.seed = derive_seed(0, "ascent_batch", t);
    Rng r0(cfg.seed);
    const Matrix init = random_perturb(clean, cfg.epsilon, r0);
    const auto sp = plan_for_scheme(cfg.scheme, m.standard, clean, init);
    const Matrix after = feature_scatter(m.standard, clean, cfg);
    up += frozen_plan_objective(m.standard, clean, after, sp.plan) > frozen_plan_objective(m.standard, clean, init, sp.plan);
  }
  return {up >= 190, fmt("objective increased on %d/200 batches", up)};
}

Outcome scatter_demo_artifact() {
  fixture::TempDir dir("acceptance_demo");
  std::ostringstream out, err;
  const int code = cli::dispatch(std::vector<std::string>{"scatter-demo", "--out", dir.path().string()}, out, err);
  if (code != 0) return {false, "scatter-demo exited with " + std::to_string(code) + ": " + err.str()};
  const double eps = cli::default_config("scatter-demo")["epsilon"].get<double>();
  const auto params = load_checkpoint(dir / "checkpoint.json");
  const Matrix original = read_matrix_csv(dir / "original.csv");
  Dataset data{Matrix(original.rows(), 2), std::vector<int>(original.rows()), 2, "demo"};
  for (std::size_t i = 0; i < original.rows(); ++i) {
    data.inputs(i, 0) = original(i, 0);
    data.inputs(i, 1) = original(i, 1);
    data.labels[i] = static_cast<int>(original(i, 2));
  }
  const Matrix direction = sign(grad_input(params, data.inputs, data.labels, 0.0));
  auto cloud = [&](const char* name, bool& inside) {
    const Matrix m = read_matrix_csv(dir / name);
    Matrix pts(m.rows(), 2);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      pts(i, 0) = m(i, 0);
      pts(i, 1) = m(i, 1);
    }
    inside = m.rows() == data.size() && contained(pts, data.inputs, eps);
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < data.size() && inside; ++i) {
      const double dx = pts(i, 0) - data.inputs(i, 0), dy = pts(i, 1) - data.inputs(i, 1);
      const double gx = direction(i, 0), gy = direction(i, 1);
      const double norm = std::sqrt((dx * dx + dy * dy) * (gx * gx + gy * gy));
      if (norm == 0.0) continue;
      total += (dx * gx + dy * gy) / norm;
      ++counted;
    }
    return counted ? total / static_cast<double>(counted) : 0.0;
  };
  bool sup_in = false, sc_in = false;
  const double sup = cloud("supervised.csv", sup_in);
  const double sc = cloud("scattered.csv", sc_in);
  const bool pass = sup_in && sc_in && sup >= 0.9 && sc < sup;
  return {pass, fmt("points inside balls: supervised %s, scattered %s; gradient-sign cosine supervised %.3f, "
                    "scattered %.3f",
                    sup_in ? "yes" : "NO", sc_in ? "yes" : "NO", sup, sc)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "OT oracle equivalence", 30, ot_oracle_equivalence},
      {2, "Sinkhorn at reg 0.01", 60, sinkhorn_default_reg},
      {3, "gradient fidelity", 60, gradient_fidelity},
      {4, "containment and determinism", 120, containment_and_determinism},
      {5, "mode collapse identities", 0, mode_collapse},
      {6, "desk robustness vs standard training", 300, desk_table1},
      {7, "matching schemes", 0, desk_matching},
      {8, "OT solvers", 0, desk_solvers},
      {9, "scatter ascent", 0, scatter_ascent},
      {10, "scatter-demo point clouds", 0, scatter_demo_artifact},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = o.pass;
    std::string timing = fmt("%.1fs", secs);
    if (c.budget_seconds > 0) {
      timing += fmt(" of %.0fs", c.budget_seconds);
      if (secs > c.budget_seconds) {
        pass = false;
        timing += " OVER BUDGET";
      }
    }
    failed += !pass;
    std::printf("criterion %d: %s %s | %s [%s]\n", c.id, pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
