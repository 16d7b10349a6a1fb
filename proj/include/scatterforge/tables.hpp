#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "scatterforge/data.hpp"
#include "scatterforge/model.hpp"
#include "scatterforge/ot.hpp"
#include "scatterforge/scatter.hpp"
#include "scatterforge/train.hpp"

namespace scatterforge {

// The two-moons benchmark shared by the ablation tables and the directional
// acceptance checks. Epoch counts and transitions are multiplied by
// epoch_scale (rounded, at least one epoch).
struct DeskBenchmark {
  std::size_t n_per_class = 500;
  double noise_sd = 0.05;
  std::vector<std::size_t> hidden{32, 32};
  double epsilon = 0.1;
  std::size_t standard_epochs = 100;
  std::size_t scatter_epochs = 200;
  std::vector<std::size_t> transition_epochs{60, 90};
  double epoch_scale = 1.0;
  std::size_t batch_size = 60;
  double learning_rate = 1.0;
  double lr_decay = 0.1;
  double smoothing = 0.5;
  std::size_t attack_iterations = 1;  // T for scatter and supervised training
  OtSolver solver;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DeskData {
  Dataset train;
  Dataset test;
};

DeskData desk_data(const DeskBenchmark& bench);
MlpParams desk_init(const DeskBenchmark& bench, std::size_t input_dim, std::size_t classes);

// Training configs for each row of the grid. All rows share seed, init, data
// and schedule; only the perturbation differs.
TrainConfig desk_standard_config(const DeskBenchmark& bench);
TrainConfig desk_scatter_config(const DeskBenchmark& bench, MatchKind scheme, SolverKind solver);
TrainConfig desk_random_config(const DeskBenchmark& bench);
TrainConfig desk_supervised_config(const DeskBenchmark& bench);

struct TableRow {
  std::string method;
  double clean = 0.0;
  double fgsm = 0.0;
  double pgd20 = 0.0;
  double pgd100 = 0.0;
  double cw20 = 0.0;
  double cw100 = 0.0;
};

struct Table {
  std::string name;
  std::vector<TableRow> rows;
};

struct TableBundle {
  Table perturbation;  // Random / Supervised / FeaScatter
  Table matching;      // Uniform / Identity / OT
  Table solver;        // Sinkhorn / IPOT
};

// Clean, FGSM, PGD20, PGD100, CW20, CW100 at the given budget.
TableRow evaluate_row(const std::string& method, const MlpParams& params, const Dataset& test, double epsilon,
                      std::uint64_t seed);

TableBundle replicate_tables(const DeskBenchmark& bench);

// Header method,Clean,FGSM,PGD20,PGD100,CW20,CW100.
std::string table_to_csv(const Table& table);

}  // namespace scatterforge
