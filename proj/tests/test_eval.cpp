#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "scatterforge/errors.hpp"
#include "scatterforge/eval.hpp"

using namespace scatterforge;

namespace {

// Logit difference 10 * (x0 - 0.5): class 1 exactly when x0 > 0.5.
MlpParams threshold_net() {
  MlpParams p;
  p.layers.push_back({Matrix{{-5.0, 0.0}, {5.0, 0.0}}, {2.5, -2.5}});
  return p;
}

Dataset threshold_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds{Matrix(n, 2), std::vector<int>(n), 2, "threshold"};
  for (std::size_t i = 0; i < n; ++i) {
    const int y = i % 2 == 0 ? 0 : 1;
    ds.inputs(i, 0) = y == 1 ? rng.uniform(0.6, 1.0) : rng.uniform(0.0, 0.4);
    ds.inputs(i, 1) = rng.next_double();
    ds.labels[i] = y;
  }
  return ds;
}

}  // namespace

TEST_CASE("accuracy: examples") {
  const auto ds = threshold_data(40, 1);
  CHECK(accuracy(threshold_net(), ds) == 1.0);
  MlpParams always_zero;
  always_zero.layers.push_back({Matrix(2, 2), {1.0, 0.0}});
  CHECK(accuracy(always_zero, ds) == 0.5);

  const auto& m = fixture::moons();
  std::vector<std::size_t> order(m.data.test.size());
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  std::rotate(order.begin(), order.begin() + 137, order.end());
  CHECK(accuracy(m.standard, m.data.test.subset(order)) == accuracy(m.standard, m.data.test));
}

TEST_CASE("robust_accuracy: zero budget is clean accuracy") {
  const auto& m = fixture::moons();
  const double clean = accuracy(m.standard, m.data.test);
  CHECK(robust_accuracy(m.standard, m.data.test, AttackSpec::clean()).accuracy == clean);
  CHECK(robust_accuracy(m.standard, m.data.test, AttackSpec::make_fgsm(0.0)).accuracy == clean);
  CHECK(robust_accuracy(m.standard, m.data.test, AttackSpec::make_pgd(0.0, 20, 3)).accuracy == clean);
  CHECK(robust_accuracy(m.standard, m.data.test, AttackSpec::make_cw(0.0, 20, 3)).accuracy == clean);
}

TEST_CASE("robust_accuracy: row bookkeeping") {
  const auto& m = fixture::moons();
  const auto row = robust_accuracy(m.standard, m.data.test, AttackSpec::make_pgd(0.05, 7, 1));
  CHECK(row.attack == "PGD7");
  CHECK(row.epsilon == 0.05);
  CHECK(row.iterations == 7);
  CHECK(row.n_samples == m.data.test.size());
  CHECK(row.accuracy == static_cast<double>(row.correct) / static_cast<double>(row.n_samples));
  CHECK(row == robust_accuracy(m.standard, m.data.test, AttackSpec::make_pgd(0.05, 7, 1)));
}

TEST_CASE("robust_accuracy: attacks do not help on average over seeds") {
  const auto& m = fixture::moons();
  const double clean = accuracy(m.standard, m.data.test);
  double mean = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    mean += robust_accuracy(m.standard, m.data.test, AttackSpec::make_pgd(0.05, 10, seed)).accuracy / 10.0;
  CHECK(mean <= clean);
}

TEST_CASE("robust_accuracy: the standard moons model loses at least 20 points under PGD20") {
  const auto& m = fixture::moons();
  const double clean = accuracy(m.standard, m.data.test);
  const double robust = robust_accuracy(m.standard, m.data.test, AttackSpec::make_pgd(0.1, 20, 0)).accuracy;
  CHECK(robust <= clean - 0.20);
}

TEST_CASE("budget_sweep: rows, clean first row, near-monotone") {
  const auto& m = fixture::moons();
  const std::vector<double> eps{0.0, 0.02, 0.04, 0.06, 0.08, 0.1, 0.125};
  const auto report = budget_sweep(m.standard, m.data.test, eps, 20, 4);
  REQUIRE(report.rows.size() == eps.size());
  CHECK(report.rows[0].accuracy == accuracy(m.standard, m.data.test));
  int swaps = 0;
  for (std::size_t k = 1; k < report.rows.size(); ++k) swaps += report.rows[k].accuracy > report.rows[k - 1].accuracy;
  CHECK(swaps <= 1);
  CHECK_THROWS_AS(budget_sweep(m.standard, m.data.test, {0.1, 0.0}, 1), ContractError);
}

TEST_CASE("iteration_sweep: rows and the random start") {
  const auto& m = fixture::moons();
  const std::vector<std::size_t> iters{0, 1, 5, 20};
  const auto report = iteration_sweep(m.standard, m.data.test, iters, 0.1, 6);
  REQUIRE(report.rows.size() == iters.size());
  AttackSpec random;
  random.kind = AttackKind::random;
  random.config.epsilon = 0.1;
  random.seed = 6;
  CHECK(report.rows[0].accuracy == robust_accuracy(m.standard, m.data.test, random).accuracy);
}

TEST_CASE("iteration_sweep: a feature-scattering model plateaus by 40 steps") {
  const auto& m = fixture::moons();
  const auto report = iteration_sweep(fixture::moons_scatter(), m.data.test, {40, 100}, 0.1, 0);
  CHECK(std::abs(report.rows[0].accuracy - report.rows[1].accuracy) <= 0.05);
}

TEST_CASE("blackbox_eval: identical source and target is white-box") {
  const auto& m = fixture::moons();
  for (const auto& spec : {AttackSpec::make_fgsm(0.1, 2), AttackSpec::make_pgd(0.1, 20, 2), AttackSpec::make_cw(0.1, 20, 2)})
    CHECK(blackbox_eval(m.standard, m.standard, m.data.test, spec) == robust_accuracy(m.standard, m.data.test, spec));
}

TEST_CASE("blackbox_eval: an undefended source transfers no better than white-box") {
  const auto& m = fixture::moons();
  const auto& target = fixture::moons_scatter();
  const auto spec = AttackSpec::make_pgd(0.1, 20, 0);
  const double white = robust_accuracy(target, m.data.test, spec).accuracy;
  CHECK(blackbox_eval(m.standard, target, m.data.test, spec).accuracy >= white);
}

TEST_CASE("blackbox_eval: an untrained source stays within 10 points of clean") {
  const auto& m = fixture::moons();
  const auto& target = fixture::moons_scatter();
  Rng rng = Rng(0).derive("init");
  const auto untrained = MlpParams::init(std::vector<std::size_t>{2, 32, 32, 2}, rng);
  const double clean = accuracy(target, m.data.test);
  const auto spec = AttackSpec::make_pgd(0.1, 20, 0);
  CHECK(std::abs(blackbox_eval(untrained, target, m.data.test, spec).accuracy - clean) <= 0.10);
}

TEST_CASE("blackbox_eval: mismatched input widths are rejected") {
  const auto& m = fixture::moons();
  Rng rng(1);
  const auto wide = MlpParams::init(std::vector<std::size_t>{3, 4, 2}, rng);
  CHECK_THROWS_AS(blackbox_eval(wide, m.standard, m.data.test, AttackSpec::make_pgd(0.1, 1)), ContractError);
}

TEST_CASE("report CSV: lossless round trip") {
  const auto& m = fixture::moons();
  const auto report = budget_sweep(m.standard, m.data.test, {0.0, 0.1, 1.0 / 3.0}, 3, 1);
  const auto csv = report_to_csv(report);
  CHECK(csv.rfind("attack,epsilon,iterations,accuracy,correct,n_samples\n", 0) == 0);
  CHECK(report_from_csv(csv) == report);
  CHECK_THROWS_AS(report_from_csv("h\nPGD1,0.1,1\n"), FormatError);
  CHECK_THROWS_AS(report_from_csv("h\nPGD1,x,1,0.5,1,2\n"), FormatError);
}

TEST_CASE("loss_surface: centre, shape and directions") {
  const auto& m = fixture::moons();
  const auto x = m.data.test.inputs.row(3);
  const int y = m.data.test.labels[3];
  const auto s = loss_surface(m.standard, x, y, 8.0 / 255.0, 41, 5);
  CHECK(s.loss.rows() == 41);
  CHECK(s.loss.cols() == 41);
  CHECK(s.a.size() == 41);
  CHECK(s.a[20] == 0.0);
  CHECK(s.a.front() == -8.0 / 255.0);
  CHECK(s.a.back() == 8.0 / 255.0);
  const Matrix xm(1, 2, std::vector<double>(x.begin(), x.end()));
  const std::vector<int> ys{y};
  CHECK(s.loss(20, 20) == cross_entropy(logits(m.standard, xm), ys, 0.0).loss);
  CHECK(max_abs(s.adversarial_direction) == 1.0);
  for (double v : s.random_direction.data()) CHECK(std::abs(v) == 1.0);
  const auto csv = loss_surface_to_csv(s);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 41 * 41 + 1);
  CHECK_THROWS_AS(loss_surface(m.standard, x, y, 0.1, 40), ContractError);
}

TEST_CASE("loss_surface: the adversarial direction dominates the random one") {
  const auto& m = fixture::moons();
  std::size_t dominated = 0;
  const std::size_t samples = 200;
  for (std::size_t i = 0; i < samples; ++i) {
    const auto s = loss_surface(m.standard, m.data.test.inputs.row(i), m.data.test.labels[i], 8.0 / 255.0, 41, i);
    const std::size_t c = s.a.size() / 2;
    bool all = true;
    for (std::size_t r = 1; r <= c && all; ++r) {
      const double along_a = std::max(s.loss(c + r, c), s.loss(c - r, c));
      const double along_r = std::max(s.loss(c, c + r), s.loss(c, c - r));
      all = along_a >= along_r;
    }
    dominated += all;
  }
  CHECK(dominated >= static_cast<std::size_t>(0.8 * samples));
}

TEST_CASE("gradient_sign_alignment: examples") {
  const auto ds = threshold_data(10, 2);
  const auto p = threshold_net();
  AttackConfig cfg;
  cfg.epsilon = 0.05;
  cfg.step_size = 0.05;
  const auto adv = fgsm(p, ds.as_batch(), cfg);
  CHECK(gradient_sign_alignment(p, ds, adv) == doctest::Approx(1.0));
  Matrix away = ds.inputs;
  for (std::size_t i = 0; i < ds.size(); ++i) away(i, 0) -= 0.05 * (adv(i, 0) - ds.inputs(i, 0)) / 0.05;
  CHECK(gradient_sign_alignment(p, ds, away) == doctest::Approx(-1.0));
  CHECK(gradient_sign_alignment(p, ds, ds.inputs) == 0.0);
  CHECK_THROWS_AS(gradient_sign_alignment(p, ds, Matrix(3, 2)), ContractError);
}
