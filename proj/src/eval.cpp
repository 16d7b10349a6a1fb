#include "scatterforge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scatterforge/errors.hpp"
#include "scatterforge/io.hpp"

namespace scatterforge {

AttackSpec AttackSpec::clean() { return {}; }

AttackSpec AttackSpec::make_fgsm(double epsilon, std::uint64_t seed) {
  AttackSpec s;
  s.name = "FGSM";
  s.kind = AttackKind::fgsm;
  s.config.epsilon = epsilon;
  s.config.step_size = epsilon > 0.0 ? epsilon : 1.0;
  s.config.iterations = 1;
  s.config.random_init = false;
  s.seed = seed;
  return s;
}

AttackSpec AttackSpec::make_pgd(double epsilon, std::size_t iterations, std::uint64_t seed) {
  AttackSpec s;
  s.name = "PGD" + std::to_string(iterations);
  s.kind = AttackKind::pgd;
  s.config.epsilon = epsilon;
  s.config.step_size = epsilon > 0.0 ? epsilon / 4.0 : 1.0;
  s.config.iterations = iterations;
  s.config.random_init = true;
  s.config.loss_kind = LossKind::cross_entropy;
  s.seed = seed;
  return s;
}

AttackSpec AttackSpec::make_cw(double epsilon, std::size_t iterations, std::uint64_t seed) {
  AttackSpec s = make_pgd(epsilon, iterations, seed);
  s.name = "CW" + std::to_string(iterations);
  s.config.loss_kind = LossKind::cw_margin;
  return s;
}

namespace {

std::size_t count_correct(const MlpParams& params, const Matrix& inputs, const std::vector<int>& labels) {
  const auto pred = predict(params, inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
  return correct;
}

}  // namespace

double accuracy(const MlpParams& params, const Dataset& ds) {
  require(ds.size() > 0, "accuracy: empty dataset");
  return static_cast<double>(count_correct(params, ds.inputs, ds.labels)) / static_cast<double>(ds.size());
}

Matrix craft(const MlpParams& source, const Dataset& ds, const AttackSpec& spec) {
  require(spec.batch_size >= 1, "craft: batch_size must be at least 1");
  if (spec.kind == AttackKind::none) return ds.inputs;
  const Rng root(spec.seed);
  Matrix out(ds.size(), ds.dim());
  std::size_t batch_no = 0;
  for (std::size_t start = 0; start < ds.size(); start += spec.batch_size, ++batch_no) {
    const std::size_t stop = std::min(ds.size(), start + spec.batch_size);
    std::vector<std::size_t> idx(stop - start);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
    LabeledBatch batch{gather_rows(ds.inputs, idx), {ds.labels.begin() + start, ds.labels.begin() + stop}};
    Rng rng = root.derive("attack", batch_no);
    Matrix adv;
    switch (spec.kind) {
      case AttackKind::fgsm:
        adv = fgsm(source, batch, spec.config);
        break;
      case AttackKind::pgd:
        adv = pgd(source, batch, spec.config, rng);
        break;
      case AttackKind::random:
        adv = random_perturb(batch.inputs, spec.config.epsilon, rng);
        break;
      case AttackKind::none:
        adv = batch.inputs;
        break;
    }
    for (std::size_t i = 0; i < idx.size(); ++i) std::copy(adv.row(i).begin(), adv.row(i).end(), out.row(start + i).begin());
  }
  return out;
}

RobustnessRow blackbox_eval(const MlpParams& source, const MlpParams& target, const Dataset& ds,
                            const AttackSpec& spec) {
  require(source.input_dim() == target.input_dim(), "blackbox_eval: source and target input dims differ");
  require(ds.size() > 0, "robust_accuracy: empty dataset");
  const Matrix adv = craft(source, ds, spec);
  RobustnessRow row;
  row.attack = spec.name;
  row.epsilon = spec.kind == AttackKind::none ? 0.0 : spec.config.epsilon;
  row.iterations = spec.kind == AttackKind::pgd ? spec.config.iterations : (spec.kind == AttackKind::fgsm ? 1 : 0);
  row.correct = count_correct(target, adv, ds.labels);
  row.n_samples = ds.size();
  row.accuracy = static_cast<double>(row.correct) / static_cast<double>(row.n_samples);
  return row;
}

RobustnessRow robust_accuracy(const MlpParams& params, const Dataset& ds, const AttackSpec& spec) {
  return blackbox_eval(params, params, ds, spec);
}

RobustnessReport budget_sweep(const MlpParams& params, const Dataset& ds, const std::vector<double>& epsilons,
                              std::size_t iterations, std::uint64_t seed, LossKind loss) {
  require(std::is_sorted(epsilons.begin(), epsilons.end()), "budget_sweep: epsilons must be ascending");
  RobustnessReport report;
  for (double eps : epsilons) {
    AttackSpec spec = loss == LossKind::cw_margin ? AttackSpec::make_cw(eps, iterations, seed)
                                                  : AttackSpec::make_pgd(eps, iterations, seed);
    report.rows.push_back(robust_accuracy(params, ds, spec));
  }
  return report;
}

RobustnessReport iteration_sweep(const MlpParams& params, const Dataset& ds,
                                 const std::vector<std::size_t>& iteration_counts, double epsilon,
                                 std::uint64_t seed, LossKind loss) {
  RobustnessReport report;
  for (auto t : iteration_counts) {
    AttackSpec spec = loss == LossKind::cw_margin ? AttackSpec::make_cw(epsilon, t, seed)
                                                  : AttackSpec::make_pgd(epsilon, t, seed);
    report.rows.push_back(robust_accuracy(params, ds, spec));
  }
  return report;
}

std::string report_to_csv(const RobustnessReport& report) {
  std::string out = "attack,epsilon,iterations,accuracy,correct,n_samples\n";
  for (const auto& r : report.rows)
    out += r.attack + "," + format_double(r.epsilon) + "," + std::to_string(r.iterations) + "," +
           format_double(r.accuracy) + "," + std::to_string(r.correct) + "," + std::to_string(r.n_samples) + "\n";
  return out;
}

RobustnessReport report_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  RobustnessReport report;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 6) throw FormatError("report:" + std::to_string(line_no) + ": expected 6 cells");
    RobustnessRow r;
    r.attack = cells[0];
    double iters = 0, correct = 0, n = 0;
    if (!parse_double(cells[1], r.epsilon) || !parse_double(cells[2], iters) || !parse_double(cells[3], r.accuracy) ||
        !parse_double(cells[4], correct) || !parse_double(cells[5], n))
      throw FormatError("report:" + std::to_string(line_no) + ": non-numeric cell");
    r.iterations = static_cast<std::size_t>(iters);
    r.correct = static_cast<std::size_t>(correct);
    r.n_samples = static_cast<std::size_t>(n);
    report.rows.push_back(r);
  }
  return report;
}

double gradient_sign_alignment(const MlpParams& params, const Dataset& original, const Matrix& perturbed) {
  require(perturbed.rows() == original.size() && perturbed.cols() == original.dim(),
          "gradient_sign_alignment: perturbed shape does not match the dataset");
  const Matrix direction =
      sign(attack_loss_gradient(params, original.inputs, original.labels, LossKind::cross_entropy));
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    double dot = 0.0, dd = 0.0, ss = 0.0;
    for (std::size_t j = 0; j < original.dim(); ++j) {
      const double d = perturbed(i, j) - original.inputs(i, j);
      dot += d * direction(i, j);
      dd += d * d;
      ss += direction(i, j) * direction(i, j);
    }
    if (dd == 0.0 || ss == 0.0) continue;
    total += dot / std::sqrt(dd * ss);
    ++counted;
  }
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

LossSurface loss_surface(const MlpParams& params, std::span<const double> input, int label, double grid_half_width,
                         std::size_t grid_points, std::uint64_t seed) {
  require(grid_points % 2 == 1, "loss_surface: grid_points must be odd");
  require(grid_half_width >= 0.0, "loss_surface: grid_half_width must be nonnegative");
  require(input.size() == params.input_dim(), "loss_surface: input width does not match network");
  const std::size_t d = input.size();
  const Matrix x(1, d, std::vector<double>(input.begin(), input.end()));
  const std::vector<int> y{label};

  LossSurface s;
  s.adversarial_direction = sign(grad_input(params, x, y, 0.0));
  const double scale_r = max_abs(s.adversarial_direction) > 0.0 ? max_abs(s.adversarial_direction) : 1.0;
  Rng rng = Rng(seed).derive("rademacher");
  s.random_direction = Matrix(1, d);
  for (double& v : s.random_direction.data()) v = (rng.next_u64() >> 63) ? scale_r : -scale_r;

  const std::size_t half = grid_points / 2;
  for (std::size_t k = 0; k < grid_points; ++k) {
    // Centre offset is exactly zero.
    const double frac = (static_cast<double>(k) - static_cast<double>(half)) / static_cast<double>(half == 0 ? 1 : half);
    s.a.push_back(grid_half_width * frac);
  }
  s.b = s.a;
  Matrix points(grid_points * grid_points, d);
  for (std::size_t i = 0; i < grid_points; ++i)
    for (std::size_t j = 0; j < grid_points; ++j) {
      auto p = points.row(i * grid_points + j);
      for (std::size_t c = 0; c < d; ++c)
        p[c] = x(0, c) + s.a[i] * s.adversarial_direction(0, c) + s.b[j] * s.random_direction(0, c);
    }
  const Matrix logp = row_log_softmax(logits(params, points));
  s.loss = Matrix(grid_points, grid_points);
  for (std::size_t i = 0; i < grid_points; ++i)
    for (std::size_t j = 0; j < grid_points; ++j) s.loss(i, j) = -logp(i * grid_points + j, label);
  return s;
}

std::string loss_surface_to_csv(const LossSurface& surface) {
  std::string out = "a,b,loss\n";
  for (std::size_t i = 0; i < surface.a.size(); ++i)
    for (std::size_t j = 0; j < surface.b.size(); ++j)
      out += format_double(surface.a[i]) + "," + format_double(surface.b[j]) + "," +
             format_double(surface.loss(i, j)) + "\n";
  return out;
}

}  // namespace scatterforge
