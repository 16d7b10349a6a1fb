#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "scatterforge/attacks.hpp"
#include "scatterforge/data.hpp"
#include "scatterforge/model.hpp"

namespace scatterforge {

enum class AttackKind { none, fgsm, pgd, random };

// What to run against each evaluation batch. PGD uses config.loss_kind, so
// CW-T attacks are pgd with LossKind::cw_margin.
struct AttackSpec {
  std::string name = "clean";
  AttackKind kind = AttackKind::none;
  AttackConfig config;
  std::uint64_t seed = 0;
  std::size_t batch_size = 256;

  static AttackSpec clean();
  static AttackSpec make_fgsm(double epsilon, std::uint64_t seed = 0);
  // Step size epsilon / 4, random init on.
  static AttackSpec make_pgd(double epsilon, std::size_t iterations, std::uint64_t seed = 0);
  static AttackSpec make_cw(double epsilon, std::size_t iterations, std::uint64_t seed = 0);
};

struct RobustnessRow {
  std::string attack;
  double epsilon = 0.0;
  std::size_t iterations = 0;
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t n_samples = 0;

  friend bool operator==(const RobustnessRow&, const RobustnessRow&) = default;
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;

  friend bool operator==(const RobustnessReport&, const RobustnessReport&) = default;
};

double accuracy(const MlpParams& params, const Dataset& ds);

// Inputs after the attack crafted against `source`, batch by batch, with a
// per-batch Rng derived from spec.seed.
Matrix craft(const MlpParams& source, const Dataset& ds, const AttackSpec& spec);

RobustnessRow robust_accuracy(const MlpParams& params, const Dataset& ds, const AttackSpec& spec);
RobustnessRow blackbox_eval(const MlpParams& source, const MlpParams& target, const Dataset& ds,
                            const AttackSpec& spec);

// One PGD row per epsilon (ascending), step epsilon / 4, same seed per row.
RobustnessReport budget_sweep(const MlpParams& params, const Dataset& ds, const std::vector<double>& epsilons,
                              std::size_t iterations, std::uint64_t seed = 0,
                              LossKind loss = LossKind::cross_entropy);
// One PGD row per iteration count at fixed epsilon. T = 0 is the random start.
RobustnessReport iteration_sweep(const MlpParams& params, const Dataset& ds,
                                 const std::vector<std::size_t>& iteration_counts, double epsilon,
                                 std::uint64_t seed = 0, LossKind loss = LossKind::cross_entropy);

// Header attack,epsilon,iterations,accuracy,correct,n_samples.
std::string report_to_csv(const RobustnessReport& report);
RobustnessReport report_from_csv(const std::string& text);

// Mean over samples of cos(x'_i - x_i, sign(grad_x CE(x_i, y_i))). Samples with
// a zero displacement or zero gradient sign are skipped; 0 if none remain.
double gradient_sign_alignment(const MlpParams& params, const Dataset& original, const Matrix& perturbed);

struct LossSurface {
  std::vector<double> a;  // offsets along the adversarial direction
  std::vector<double> b;  // offsets along the Rademacher direction
  Matrix loss;            // loss(i, j) at x + a[i] d_a + b[j] d_r
  Matrix adversarial_direction;
  Matrix random_direction;
};

// d_a = sign(grad_x L) (unit inf-norm); d_r is a seeded Rademacher vector
// scaled to d_a's inf-norm. grid_points must be odd so the centre is x itself.
LossSurface loss_surface(const MlpParams& params, std::span<const double> input, int label, double grid_half_width,
                         std::size_t grid_points, std::uint64_t seed = 0);
std::string loss_surface_to_csv(const LossSurface& surface);

}  // namespace scatterforge
