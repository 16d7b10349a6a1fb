#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scatterforge/attacks.hpp"
#include "scatterforge/data.hpp"
#include "scatterforge/model.hpp"
#include "scatterforge/scatter.hpp"

namespace scatterforge {

// standard: clean batches. madry: PGD (cross-entropy, random init).
// feature_scatter: feature scattering. random: uniform noise in the ball.
enum class TrainMode { standard, madry, feature_scatter, random };

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 60;
  double learning_rate = 0.1;
  std::vector<std::size_t> transition_epochs{60, 90};
  double lr_decay = 0.1;
  double smoothing = 0.5;
  TrainMode mode = TrainMode::standard;
  AttackConfig attack;    // madry
  ScatterConfig scatter;  // feature_scatter (epsilon also used by random)
  std::uint64_t seed = 0;
  // Optional robust-accuracy probe on the training set after each epoch.
  std::optional<AttackConfig> probe;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double loss = 0.0;  // sample-weighted mean over the epoch's batches
  double clean_accuracy = 0.0;
  std::optional<double> robust_accuracy;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  MlpParams params;
  TrainHistory history;
};

// Builds the batch actually trained on. Receives the per-batch Rng.
using Perturber = std::function<Matrix(const MlpParams&, const LabeledBatch&, Rng&)>;

// theta - lr * g, elementwise.
MlpParams sgd_step(const MlpParams& params, const ParamGrads& grads, double lr);

// lr * lr_decay^(number of transition epochs <= epoch), epochs 0-based.
double learning_rate_at(const TrainConfig& cfg, std::size_t epoch);

Perturber make_perturber(const TrainConfig& cfg);

TrainResult train(const TrainConfig& cfg, const Dataset& data, const MlpParams& init);
// Same loop with an explicit perturbation generator; cfg.mode is ignored.
TrainResult train_with(const TrainConfig& cfg, const Dataset& data, const MlpParams& init, const Perturber& perturb);

std::string history_to_csv(const TrainHistory& history);

const char* to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);

}  // namespace scatterforge
