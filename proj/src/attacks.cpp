#include "scatterforge/attacks.hpp"

#include <algorithm>

#include "scatterforge/errors.hpp"

namespace scatterforge {

void AttackConfig::validate() const {
  require(epsilon >= 0.0 && epsilon <= 1.0, "AttackConfig: epsilon must lie in [0,1]");
  require(step_size > 0.0 && step_size <= 1.0, "AttackConfig: step_size must lie in (0,1]");
}

Matrix project(const Matrix& candidate, const Matrix& anchor, double epsilon) {
  require(candidate.rows() == anchor.rows() && candidate.cols() == anchor.cols(),
          "project: candidate and anchor shapes differ");
  require(epsilon >= 0.0, "project: epsilon must be nonnegative");
  Matrix out(candidate.rows(), candidate.cols());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double a = anchor.data()[k];
    const double v = std::clamp(candidate.data()[k], a - epsilon, a + epsilon);
    out.data()[k] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

Matrix sign(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t k = 0; k < m.size(); ++k) {
    const double v = m.data()[k];
    out.data()[k] = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
  }
  return out;
}

LossAndGrad cw_margin_loss(const Matrix& logits, std::span<const int> labels) {
  require(logits.cols() >= 2, "cw_margin_loss: needs at least two classes");
  require(labels.size() == logits.rows(), "cw_margin_loss: label count does not match logits rows");
  const std::size_t n = logits.rows();
  LossAndGrad out{0.0, Matrix(n, logits.cols())};
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    require(y >= 0 && static_cast<std::size_t>(y) < logits.cols(), "cw_margin_loss: label out of range");
    auto z = logits.row(i);
    std::size_t best = y == 0 ? 1 : 0;
    for (std::size_t j = 0; j < z.size(); ++j)
      if (j != static_cast<std::size_t>(y) && z[j] > z[best]) best = j;
    out.loss += z[best] - z[y];
    out.dlogits(i, best) += inv_n;
    out.dlogits(i, y) -= inv_n;
  }
  out.loss *= inv_n;
  return out;
}

namespace {

LossAndGrad loss_on_logits(const Matrix& z, std::span<const int> labels, LossKind kind) {
  return kind == LossKind::cw_margin ? cw_margin_loss(z, labels) : cross_entropy(z, labels, 0.0);
}

}  // namespace

Matrix attack_loss_gradient(const MlpParams& params, const Matrix& inputs, std::span<const int> labels,
                            LossKind kind) {
  auto fwd = forward(params, inputs);
  auto lg = loss_on_logits(fwd.logits, labels, kind);
  return backward(params, fwd.trace, lg.dlogits).inputs;
}

double attack_loss(const MlpParams& params, const Matrix& inputs, std::span<const int> labels, LossKind kind) {
  return loss_on_logits(logits(params, inputs), labels, kind).loss;
}

namespace {

Matrix signed_step(const MlpParams& params, const Matrix& current, const LabeledBatch& batch, double step,
                   double epsilon, LossKind kind) {
  Matrix direction = sign(attack_loss_gradient(params, current, batch.labels, kind));
  Matrix candidate = current;
  for (std::size_t k = 0; k < candidate.size(); ++k) candidate.data()[k] += step * direction.data()[k];
  return project(candidate, batch.inputs, epsilon);
}

}  // namespace

Matrix fgsm(const MlpParams& params, const LabeledBatch& batch, const AttackConfig& cfg) {
  require(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0, "fgsm: epsilon must lie in [0,1]");
  return signed_step(params, batch.inputs, batch, cfg.epsilon, cfg.epsilon, cfg.loss_kind);
}

Matrix pgd(const MlpParams& params, const LabeledBatch& batch, const AttackConfig& cfg, Rng& rng) {
  cfg.validate();
  Matrix x = cfg.random_init ? random_perturb(batch.inputs, cfg.epsilon, rng) : batch.inputs;
  for (std::size_t t = 0; t < cfg.iterations; ++t)
    x = signed_step(params, x, batch, cfg.step_size, cfg.epsilon, cfg.loss_kind);
  return x;
}

Matrix random_perturb(const Matrix& inputs, double epsilon, Rng& rng) {
  require(epsilon >= 0.0, "random_perturb: epsilon must be nonnegative");
  Matrix noise = uniform(rng, inputs.rows(), inputs.cols(), -epsilon, epsilon);
  return project(add(inputs, noise), inputs, epsilon);
}

const char* to_string(LossKind kind) {
  return kind == LossKind::cw_margin ? "cw_margin" : "cross_entropy";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "cross_entropy" || name == "ce") return LossKind::cross_entropy;
  if (name == "cw_margin" || name == "cw") return LossKind::cw_margin;
  throw ContractError("unknown loss kind '" + name + "' (expected cross_entropy or cw_margin)");
}

}  // namespace scatterforge
