#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "scatterforge/linalg.hpp"
#include "scatterforge/model.hpp"
#include "scatterforge/rng.hpp"

namespace scatterforge {

enum class LossKind { cross_entropy, cw_margin };

// l_inf attack budget and schedule, in [0,1] pixel units.
struct AttackConfig {
  double epsilon = 8.0 / 255.0;
  double step_size = 2.0 / 255.0;
  std::size_t iterations = 10;
  bool random_init = true;
  LossKind loss_kind = LossKind::cross_entropy;

  void validate() const;
};

// Clamp into [anchor - eps, anchor + eps], then into [0, 1].
Matrix project(const Matrix& candidate, const Matrix& anchor, double epsilon);

// Elementwise sign with sign(0) = 0.
Matrix sign(const Matrix& m);

// Mean over the batch of max_{j != y} z_j - z_y (kappa = 0). Ties among wrong
// classes go to the lowest index.
LossAndGrad cw_margin_loss(const Matrix& logits, std::span<const int> labels);

// Gradient of the attack loss (plain cross-entropy or CW margin) w.r.t. inputs.
Matrix attack_loss_gradient(const MlpParams& params, const Matrix& inputs, std::span<const int> labels,
                            LossKind kind);
double attack_loss(const MlpParams& params, const Matrix& inputs, std::span<const int> labels, LossKind kind);

// One signed step of size epsilon. cfg.iterations and cfg.step_size are ignored.
Matrix fgsm(const MlpParams& params, const LabeledBatch& batch, const AttackConfig& cfg);

// x0 = project(x + U(-eps, eps)) if random_init else x, then `iterations`
// signed steps of cfg.step_size, each projected back onto the feasible set.
// iterations == 0 returns x0.
Matrix pgd(const MlpParams& params, const LabeledBatch& batch, const AttackConfig& cfg, Rng& rng);

Matrix random_perturb(const Matrix& inputs, double epsilon, Rng& rng);

const char* to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

}  // namespace scatterforge
