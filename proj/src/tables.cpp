#include "scatterforge/tables.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scatterforge/errors.hpp"
#include "scatterforge/eval.hpp"
#include "scatterforge/io.hpp"

namespace scatterforge {

namespace {

std::size_t scaled(std::size_t epochs, double factor) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(epochs) * factor));
}

TrainConfig base_config(const DeskBenchmark& bench, std::size_t epochs) {
  TrainConfig cfg;
  cfg.epochs = std::max<std::size_t>(1, scaled(epochs, bench.epoch_scale));
  cfg.batch_size = bench.batch_size;
  cfg.learning_rate = bench.learning_rate;
  cfg.lr_decay = bench.lr_decay;
  cfg.smoothing = bench.smoothing;
  cfg.seed = bench.seed;
  cfg.transition_epochs.clear();
  for (auto t : bench.transition_epochs) {
    const auto s = scaled(t, bench.epoch_scale);
    if (s < cfg.epochs && (cfg.transition_epochs.empty() || s > cfg.transition_epochs.back()))
      cfg.transition_epochs.push_back(s);
  }
  cfg.scatter.epsilon = bench.epsilon;
  cfg.scatter.iterations = bench.attack_iterations;
  cfg.scatter.scheme.solver = bench.solver;
  cfg.scatter.seed = bench.seed;
  cfg.attack.epsilon = bench.epsilon;
  cfg.attack.step_size = bench.epsilon;
  cfg.attack.iterations = bench.attack_iterations;
  cfg.attack.random_init = true;
  cfg.attack.loss_kind = LossKind::cross_entropy;
  return cfg;
}

}  // namespace

void DeskBenchmark::validate() const {
  require(n_per_class >= 1, "DeskBenchmark: n_per_class must be positive");
  require(noise_sd >= 0.0, "DeskBenchmark: noise_sd must be nonnegative");
  require(!hidden.empty(), "DeskBenchmark: at least one hidden layer is required");
  require(epsilon >= 0.0 && epsilon <= 1.0, "DeskBenchmark: epsilon must lie in [0,1]");
  require(epoch_scale > 0.0, "DeskBenchmark: epoch_scale must be positive");
  require(batch_size >= 1, "DeskBenchmark: batch_size must be positive");
}

DeskData desk_data(const DeskBenchmark& bench) {
  bench.validate();
  return {two_moons(bench.n_per_class, bench.noise_sd, derive_seed(bench.seed, "train_data")),
          two_moons(bench.n_per_class, bench.noise_sd, derive_seed(bench.seed, "test_data"))};
}

MlpParams desk_init(const DeskBenchmark& bench, std::size_t input_dim, std::size_t classes) {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), bench.hidden.begin(), bench.hidden.end());
  dims.push_back(classes);
  Rng rng = Rng(bench.seed).derive("init");
  return MlpParams::init(dims, rng);
}

TrainConfig desk_standard_config(const DeskBenchmark& bench) {
  TrainConfig cfg = base_config(bench, bench.standard_epochs);
  cfg.mode = TrainMode::standard;
  return cfg;
}

TrainConfig desk_scatter_config(const DeskBenchmark& bench, MatchKind scheme, SolverKind solver) {
  TrainConfig cfg = base_config(bench, bench.scatter_epochs);
  cfg.mode = TrainMode::feature_scatter;
  cfg.scatter.scheme.kind = scheme;
  cfg.scatter.scheme.solver.kind = solver;
  return cfg;
}

TrainConfig desk_random_config(const DeskBenchmark& bench) {
  TrainConfig cfg = base_config(bench, bench.scatter_epochs);
  cfg.mode = TrainMode::random;
  return cfg;
}

TrainConfig desk_supervised_config(const DeskBenchmark& bench) {
  TrainConfig cfg = base_config(bench, bench.scatter_epochs);
  cfg.mode = TrainMode::madry;
  return cfg;
}

TableRow evaluate_row(const std::string& method, const MlpParams& params, const Dataset& test, double epsilon,
                      std::uint64_t seed) {
  const std::uint64_t s = derive_seed(seed, "evaluate");
  TableRow row;
  row.method = method;
  row.clean = accuracy(params, test);
  row.fgsm = robust_accuracy(params, test, AttackSpec::make_fgsm(epsilon, s)).accuracy;
  row.pgd20 = robust_accuracy(params, test, AttackSpec::make_pgd(epsilon, 20, s)).accuracy;
  row.pgd100 = robust_accuracy(params, test, AttackSpec::make_pgd(epsilon, 100, s)).accuracy;
  row.cw20 = robust_accuracy(params, test, AttackSpec::make_cw(epsilon, 20, s)).accuracy;
  row.cw100 = robust_accuracy(params, test, AttackSpec::make_cw(epsilon, 100, s)).accuracy;
  return row;
}

TableBundle replicate_tables(const DeskBenchmark& bench) {
  const auto data = desk_data(bench);
  const auto init = desk_init(bench, data.train.dim(), data.train.classes);
  auto run = [&](const std::string& method, const TrainConfig& cfg) {
    const auto result = train(cfg, data.train, init);
    return evaluate_row(method, result.params, data.test, bench.epsilon, bench.seed);
  };

  // The OT / Sinkhorn run is the FeaScatter row of every table.
  const TableRow scatter = run("FeaScatter", desk_scatter_config(bench, MatchKind::ot, SolverKind::sinkhorn));
  auto renamed = [](TableRow row, const char* name) {
    row.method = name;
    return row;
  };

  TableBundle bundle;
  bundle.perturbation.name = "perturbation";
  bundle.perturbation.rows = {run("Random", desk_random_config(bench)),
                              run("Supervised", desk_supervised_config(bench)), scatter};
  bundle.matching.name = "matching";
  bundle.matching.rows = {run("Uniform", desk_scatter_config(bench, MatchKind::uniform, SolverKind::sinkhorn)),
                          run("Identity", desk_scatter_config(bench, MatchKind::identity, SolverKind::sinkhorn)),
                          renamed(scatter, "OT")};
  bundle.solver.name = "solver";
  bundle.solver.rows = {renamed(scatter, "Sinkhorn"),
                        run("IPOT", desk_scatter_config(bench, MatchKind::ot, SolverKind::ipot))};
  return bundle;
}

std::string table_to_csv(const Table& table) {
  std::ostringstream out;
  out << "method,Clean,FGSM,PGD20,PGD100,CW20,CW100\n";
  for (const auto& r : table.rows) {
    out << r.method << ',' << format_double(r.clean) << ',' << format_double(r.fgsm) << ','
        << format_double(r.pgd20) << ',' << format_double(r.pgd100) << ',' << format_double(r.cw20) << ','
        << format_double(r.cw100) << '\n';
  }
  return out.str();
}

}  // namespace scatterforge
