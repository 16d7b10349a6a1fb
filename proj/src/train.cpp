#include "scatterforge/train.hpp"

#include <cmath>

#include "scatterforge/errors.hpp"
#include "scatterforge/io.hpp"

namespace scatterforge {

void TrainConfig::validate() const {
  require(batch_size >= 1, "TrainConfig: batch_size must be at least 1");
  require(learning_rate >= 0.0, "TrainConfig: learning_rate must be nonnegative");
  require(lr_decay > 0.0 && lr_decay <= 1.0, "TrainConfig: lr_decay must lie in (0,1]");
  require(smoothing >= 0.0 && smoothing <= 1.0, "TrainConfig: smoothing must lie in [0,1]");
  for (std::size_t k = 0; k < transition_epochs.size(); ++k) {
    require(epochs == 0 || transition_epochs[k] < epochs, "TrainConfig: transition epoch beyond the last epoch");
    require(k == 0 || transition_epochs[k] > transition_epochs[k - 1],
            "TrainConfig: transition epochs must be strictly increasing");
  }
  if (mode == TrainMode::madry) attack.validate();
  if (mode == TrainMode::feature_scatter || mode == TrainMode::random) scatter.validate();
}

MlpParams sgd_step(const MlpParams& params, const ParamGrads& grads, double lr) {
  require(params.layers.size() == grads.layers.size(), "sgd_step: gradient depth mismatch");
  MlpParams out = params;
  for (std::size_t k = 0; k < out.layers.size(); ++k) {
    auto& w = out.layers[k].weight.data();
    const auto& gw = grads.layers[k].weight.data();
    auto& b = out.layers[k].bias;
    const auto& gb = grads.layers[k].bias;
    require(w.size() == gw.size() && b.size() == gb.size(), "sgd_step: gradient shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * gb[i];
  }
  return out;
}

double learning_rate_at(const TrainConfig& cfg, std::size_t epoch) {
  int passed = 0;
  for (auto t : cfg.transition_epochs)
    if (t <= epoch) ++passed;
  return cfg.learning_rate * std::pow(cfg.lr_decay, passed);
}

Perturber make_perturber(const TrainConfig& cfg) {
  switch (cfg.mode) {
    case TrainMode::standard:
      return [](const MlpParams&, const LabeledBatch& b, Rng&) { return b.inputs; };
    case TrainMode::madry: {
      AttackConfig attack = cfg.attack;
      attack.loss_kind = LossKind::cross_entropy;
      attack.random_init = true;
      return [attack](const MlpParams& p, const LabeledBatch& b, Rng& rng) { return pgd(p, b, attack, rng); };
    }
    case TrainMode::feature_scatter: {
      ScatterConfig scatter = cfg.scatter;
      // Only the inputs are handed over.
      return [scatter](const MlpParams& p, const LabeledBatch& b, Rng& rng) {
        return feature_scatter(p, b.inputs, scatter, rng);
      };
    }
    case TrainMode::random: {
      const double eps = cfg.scatter.epsilon;
      return [eps](const MlpParams&, const LabeledBatch& b, Rng& rng) { return random_perturb(b.inputs, eps, rng); };
    }
  }
  throw ContractError("make_perturber: unknown mode");
}

TrainResult train(const TrainConfig& cfg, const Dataset& data, const MlpParams& init) {
  return train_with(cfg, data, init, make_perturber(cfg));
}

TrainResult train_with(const TrainConfig& cfg, const Dataset& data, const MlpParams& init, const Perturber& perturb) {
  cfg.validate();
  data.validate();
  init.validate();
  require(init.input_dim() == data.dim(), "train: network input dim does not match data");
  require(init.classes() >= data.classes, "train: network has fewer outputs than data classes");

  TrainResult result{init, {}};
  MlpParams& params = result.params;
  const Rng root(cfg.seed);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    const auto batch_list = batches(data, cfg.batch_size, derive_seed(cfg.seed, "shuffle"), epoch);
    for (std::size_t b = 0; b < batch_list.size(); ++b) {
      const auto& batch = batch_list[b];
      Rng rng = root.derive("perturb", epoch * batch_list.size() + b);
      LabeledBatch trained{perturb(params, batch, rng), batch.labels};
      auto grads = grad_params(params, trained, cfg.smoothing);
      params = sgd_step(params, grads.grads, lr);
      loss_sum += grads.loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    rec.loss = loss_sum / static_cast<double>(seen);
    const auto pred = predict(params, data.inputs);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i];
    rec.clean_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    if (cfg.probe) {
      Rng probe_rng = root.derive("probe", epoch);
      const auto adv = pgd(params, data.as_batch(), *cfg.probe, probe_rng);
      const auto adv_pred = predict(params, adv);
      std::size_t robust = 0;
      for (std::size_t i = 0; i < adv_pred.size(); ++i) robust += adv_pred[i] == data.labels[i];
      rec.robust_accuracy = static_cast<double>(robust) / static_cast<double>(data.size());
    }
    result.history.epochs.push_back(rec);
  }
  return result;
}

std::string history_to_csv(const TrainHistory& history) {
  std::string out = "epoch,lr,loss,clean_acc,robust_acc\n";
  for (const auto& r : history.epochs) {
    out += std::to_string(r.epoch) + "," + format_double(r.learning_rate) + "," + format_double(r.loss) + "," +
           format_double(r.clean_accuracy) + "," + (r.robust_accuracy ? format_double(*r.robust_accuracy) : "") +
           "\n";
  }
  return out;
}

const char* to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::standard:
      return "standard";
    case TrainMode::madry:
      return "madry";
    case TrainMode::feature_scatter:
      return "feature_scatter";
    case TrainMode::random:
      return "random";
  }
  return "?";
}

TrainMode train_mode_from_string(const std::string& name) {
  if (name == "standard") return TrainMode::standard;
  if (name == "madry") return TrainMode::madry;
  if (name == "feature_scatter") return TrainMode::feature_scatter;
  if (name == "random") return TrainMode::random;
  throw ContractError("unknown training mode '" + name + "' (expected standard, madry, feature_scatter or random)");
}

}  // namespace scatterforge
