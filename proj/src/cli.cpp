#include "scatterforge/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "scatterforge/attacks.hpp"
#include "scatterforge/checkpoint.hpp"
#include "scatterforge/data.hpp"
#include "scatterforge/errors.hpp"
#include "scatterforge/eval.hpp"
#include "scatterforge/io.hpp"
#include "scatterforge/ot.hpp"
#include "scatterforge/scatter.hpp"
#include "scatterforge/tables.hpp"
#include "scatterforge/train.hpp"

namespace scatterforge::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr double kImageEpsilon = 8.0 / 255.0;

json common_defaults() { return {{"seed", 0}, {"out", "out"}}; }

json data_defaults(const char* split) {
  return {{"data", "two-moons"}, {"split", split},          {"n_per_class", 500},
          {"noise", 0.05},       {"label_column", "label"}, {"limit", nullptr}};
}

json solver_defaults() {
  return {{"solver", "sinkhorn"}, {"reg", 0.01},      {"sinkhorn_max_iter", 1000}, {"sinkhorn_tol", 1e-6},
          {"ipot_beta", 1.0},     {"ipot_outer_iter", 50}, {"ipot_inner_iter", 1}};
}

json merged(std::initializer_list<json> parts) {
  json out = json::object();
  for (const auto& p : parts) out.update(p);
  return out;
}

// Command-line overrides. Unset flags leave the config untouched.
struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> data;
  std::optional<std::string> mode;
  std::optional<double> epsilon;
  std::optional<std::size_t> iters;
  std::optional<std::size_t> epochs;
  std::optional<std::string> solver;
  std::optional<std::string> scheme;
  std::optional<std::string> checkpoint;
  std::optional<std::string> attack;
};

void apply_flags(json& cfg, const Flags& f) {
  auto set = [&](const char* key, const auto& value) {
    if (value) cfg[key] = *value;
  };
  set("seed", f.seed);
  set("out", f.out);
  set("data", f.data);
  set("mode", f.mode);
  set("epsilon", f.epsilon);
  set("iters", f.iters);
  set("epochs", f.epochs);
  set("solver", f.solver);
  set("scheme", f.scheme);
  set("checkpoint", f.checkpoint);
  set("attack", f.attack);
}

template <typename T>
T get(const json& cfg, const char* key) {
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ContractError(std::string("config key '") + key + "': " + e.what());
  }
}

template <typename T>
std::optional<T> get_optional(const json& cfg, const char* key) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) return std::nullopt;
  return get<T>(cfg, key);
}

std::uint64_t seed_of(const json& cfg) { return get<std::uint64_t>(cfg, "seed"); }

OtSolver solver_from(const json& cfg) {
  OtSolver s;
  s.kind = solver_kind_from_string(get<std::string>(cfg, "solver"));
  s.sinkhorn.reg = get<double>(cfg, "reg");
  s.sinkhorn.max_iter = get<std::size_t>(cfg, "sinkhorn_max_iter");
  s.sinkhorn.tol = get<double>(cfg, "sinkhorn_tol");
  s.ipot.beta = get<double>(cfg, "ipot_beta");
  s.ipot.outer_iter = get<std::size_t>(cfg, "ipot_outer_iter");
  s.ipot.inner_iter = get<std::size_t>(cfg, "ipot_inner_iter");
  require(s.sinkhorn.reg > 0.0, "config: reg must be positive");
  require(s.ipot.beta > 0.0, "config: ipot_beta must be positive");
  return s;
}

// Multi-step attacks default to epsilon / 4; a single step spends the budget.
double step_for(const json& cfg, double epsilon, std::size_t iterations) {
  if (auto s = get_optional<double>(cfg, "step_size")) return *s;
  return iterations <= 1 ? epsilon : epsilon / 4.0;
}

std::vector<std::size_t> network_dims(const json& cfg, std::size_t input_dim, std::size_t classes) {
  std::vector<std::size_t> dims{input_dim};
  for (auto h : get<std::vector<std::size_t>>(cfg, "hidden")) dims.push_back(h);
  dims.push_back(classes);
  return dims;
}

// "two-moons", a CSV file, or "images.idx,labels.idx".
Dataset load_dataset(const json& cfg) {
  const auto spec = get<std::string>(cfg, "data");
  const auto limit = get_optional<std::size_t>(cfg, "limit");
  if (spec == "two-moons") {
    const auto split = get<std::string>(cfg, "split");
    require(split == "train" || split == "test", "config: split must be 'train' or 'test'");
    Dataset ds = two_moons(get<std::size_t>(cfg, "n_per_class"), get<double>(cfg, "noise"),
                           derive_seed(seed_of(cfg), split == "train" ? "train_data" : "test_data"));
    if (!limit || *limit >= ds.size()) return ds;
    std::vector<std::size_t> idx(*limit);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return ds.subset(idx);
  }
  if (const auto comma = spec.find(','); comma != std::string::npos) {
    return load_idx(resolve_data_path(spec.substr(0, comma)), resolve_data_path(spec.substr(comma + 1)), limit);
  }
  Dataset ds = load_csv(resolve_data_path(spec), get<std::string>(cfg, "label_column"));
  if (!limit || *limit >= ds.size()) return ds;
  std::vector<std::size_t> idx(*limit);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return ds.subset(idx);
}

MlpParams load_model(const json& cfg, const char* key) {
  const auto path = get<std::string>(cfg, key);
  require(!path.empty(), std::string("config: '") + key + "' is required (use --checkpoint)");
  return load_checkpoint(path);
}

struct RunContext {
  json cfg;
  fs::path out_dir;
  std::vector<std::string> outputs;
  std::ostream& out;

  fs::path write(const std::string& name, const std::string& contents) {
    const fs::path p = out_dir / name;
    write_text_atomic(p, contents);
    outputs.push_back(p.string());
    return p;
  }
  fs::path save_model(const MlpParams& params, const std::string& name = "checkpoint.json") {
    const fs::path p = out_dir / name;
    save_checkpoint(params, p);
    outputs.push_back(p.string());
    return p;
  }
};

void run_train(RunContext& ctx) {
  const json& c = ctx.cfg;
  const Dataset data = load_dataset(c);
  TrainConfig tc;
  tc.mode = train_mode_from_string(get<std::string>(c, "mode"));
  tc.epochs = get_optional<std::size_t>(c, "epochs").value_or(tc.mode == TrainMode::feature_scatter ? 200 : 100);
  tc.batch_size = get<std::size_t>(c, "batch_size");
  tc.learning_rate = get<double>(c, "learning_rate");
  tc.transition_epochs = get<std::vector<std::size_t>>(c, "transition_epochs");
  tc.lr_decay = get<double>(c, "lr_decay");
  tc.smoothing = get<double>(c, "smoothing");
  tc.seed = seed_of(c);
  const double eps = get<double>(c, "epsilon");
  const auto iters = get<std::size_t>(c, "iters");
  tc.attack.epsilon = eps;
  tc.attack.iterations = iters;
  tc.attack.step_size = step_for(c, eps, iters);
  tc.attack.random_init = true;
  tc.scatter.epsilon = eps;
  tc.scatter.iterations = iters;
  tc.scatter.step_size = get_optional<double>(c, "step_size");
  tc.scatter.scheme.kind = match_kind_from_string(get<std::string>(c, "scheme"));
  tc.scatter.scheme.solver = solver_from(c);
  tc.scatter.seed = tc.seed;

  Rng init_rng = Rng(tc.seed).derive("init");
  const auto init = MlpParams::init(network_dims(c, data.dim(), data.classes), init_rng);
  const auto result = train(tc, data, init);

  ctx.save_model(result.params);
  ctx.write("history.csv", history_to_csv(result.history));
  if (!result.history.epochs.empty()) {
    const auto& last = result.history.epochs.back();
    ctx.out << "mode " << to_string(tc.mode) << ", " << tc.epochs << " epochs, final loss "
            << format_double(last.loss) << ", train accuracy " << format_double(last.clean_accuracy) << "\n";
  }
}

AttackSpec attack_spec_from(const json& c) {
  const auto name = get<std::string>(c, "attack");
  const double eps = get<double>(c, "epsilon");
  const auto iters = get<std::size_t>(c, "iters");
  const auto seed = derive_seed(seed_of(c), "attack");
  AttackSpec spec;
  if (name == "fgsm") {
    spec = AttackSpec::make_fgsm(eps, seed);
  } else if (name == "pgd" || name == "cw") {
    spec = name == "pgd" ? AttackSpec::make_pgd(eps, iters, seed) : AttackSpec::make_cw(eps, iters, seed);
    if (auto s = get_optional<double>(c, "step_size")) spec.config.step_size = *s;
    spec.config.random_init = get<bool>(c, "random_init");
  } else if (name == "random") {
    spec.name = "random";
    spec.kind = AttackKind::random;
    spec.config.epsilon = eps;
    spec.seed = seed;
  } else if (name == "none") {
    spec = AttackSpec::clean();
  } else {
    throw ContractError("unknown attack '" + name + "' (expected fgsm, pgd, cw, random or none)");
  }
  spec.batch_size = get<std::size_t>(c, "batch_size");
  return spec;
}

json row_json(const RobustnessRow& r) {
  return {{"attack", r.attack},   {"epsilon", r.epsilon}, {"iterations", r.iterations},
          {"accuracy", r.accuracy}, {"correct", r.correct}, {"n_samples", r.n_samples}};
}

void run_attack(RunContext& ctx) {
  const json& c = ctx.cfg;
  const auto params = load_model(c, "checkpoint");
  const Dataset ds = load_dataset(c);
  const auto spec = attack_spec_from(c);
  Dataset perturbed = ds;
  perturbed.inputs = craft(params, ds, spec);
  const auto row = robust_accuracy(params, ds, spec);
  json summary = row_json(row);
  summary["clean_accuracy"] = accuracy(params, ds);
  ctx.write("perturbed.csv", dataset_to_csv(perturbed));
  ctx.write("accuracy.json", summary.dump(2) + "\n");
  ctx.out << row.attack << " accuracy " << format_double(row.accuracy) << " (" << row.correct << "/"
          << row.n_samples << ")\n";
}

void run_eval(RunContext& ctx) {
  const json& c = ctx.cfg;
  const auto params = load_model(c, "checkpoint");
  const Dataset ds = load_dataset(c);
  const double eps = get<double>(c, "epsilon");
  const auto iters = get<std::size_t>(c, "iters");
  const auto seed = derive_seed(seed_of(c), "attack");
  const auto batch = get<std::size_t>(c, "batch_size");

  std::vector<AttackSpec> specs{AttackSpec::clean(), AttackSpec::make_fgsm(eps, seed),
                                AttackSpec::make_pgd(eps, iters, seed), AttackSpec::make_cw(eps, iters, seed)};
  for (auto& s : specs) s.batch_size = batch;

  RobustnessReport white;
  for (const auto& s : specs) white.rows.push_back(robust_accuracy(params, ds, s));
  ctx.write("robustness.csv", report_to_csv(white));

  std::vector<double> epsilons;
  if (auto list = get_optional<std::vector<double>>(c, "epsilons")) {
    epsilons = *list;
  } else {
    for (double f : {0.0, 0.25, 0.5, 0.75, 1.0, 1.25}) epsilons.push_back(f * eps);
  }
  const auto budget = budget_sweep(params, ds, epsilons, iters, seed);
  ctx.write("budget_sweep.csv", report_to_csv(budget));
  const auto iteration =
      iteration_sweep(params, ds, get<std::vector<std::size_t>>(c, "iteration_counts"), eps, seed);
  ctx.write("iteration_sweep.csv", report_to_csv(iteration));

  json summary{{"n_samples", ds.size()}, {"whitebox", json::array()}};
  for (const auto& r : white.rows) summary["whitebox"].push_back(row_json(r));

  const auto source_path = get<std::string>(c, "source_checkpoint");
  if (!source_path.empty()) {
    const auto source = load_checkpoint(source_path);
    RobustnessReport black;
    for (std::size_t k = 1; k < specs.size(); ++k) black.rows.push_back(blackbox_eval(source, params, ds, specs[k]));
    ctx.write("blackbox.csv", report_to_csv(black));
    summary["blackbox"] = json::array();
    for (const auto& r : black.rows) summary["blackbox"].push_back(row_json(r));
  }
  ctx.write("summary.json", summary.dump(2) + "\n");
  for (const auto& r : white.rows) ctx.out << r.attack << " " << format_double(r.accuracy) << "\n";
}

void run_loss_surface(RunContext& ctx) {
  const json& c = ctx.cfg;
  const auto params = load_model(c, "checkpoint");
  const Dataset ds = load_dataset(c);
  const auto index = get<std::size_t>(c, "sample");
  require(index < ds.size(), "config: sample index " + std::to_string(index) + " is out of range");
  const auto surface = loss_surface(params, ds.inputs.row(index), ds.labels[index], get<double>(c, "half_width"),
                                    get<std::size_t>(c, "grid_points"), derive_seed(seed_of(c), "surface"));
  ctx.write("loss_surface.csv", loss_surface_to_csv(surface));
  ctx.out << "grid " << surface.a.size() << "x" << surface.b.size() << ", centre loss "
          << format_double(surface.loss(surface.a.size() / 2, surface.b.size() / 2)) << "\n";
}

void run_ot_bench(RunContext& ctx) {
  const json& c = ctx.cfg;
  const auto path = get<std::string>(c, "data");
  require(!path.empty(), "config: 'data' must name a cost-matrix CSV (use --data)");
  const CostMatrix cost{read_matrix_csv(resolve_data_path(path))};
  OtSolver solver = solver_from(c);
  if (auto it = get_optional<std::size_t>(c, "iters")) {
    solver.sinkhorn.max_iter = *it;
    solver.ipot.outer_iter = *it;
  }
  const auto result = solve_ot(cost, EmpiricalWeights::uniform(cost.values.rows(), cost.values.cols()), solver);
  ctx.write("plan.csv", matrix_to_csv(result.plan.values));
  const json summary{{"distance", result.distance},
                     {"iterations", result.iterations},
                     {"marginal_violation", result.marginal_violation}};
  ctx.write("result.json", summary.dump(2) + "\n");
  ctx.out << summary.dump() << "\n";
}

std::string boundary_csv(const MlpParams& params, std::size_t points) {
  Matrix grid(points * points, 2);
  for (std::size_t i = 0; i < points; ++i)
    for (std::size_t j = 0; j < points; ++j) {
      grid(i * points + j, 0) = static_cast<double>(i) / static_cast<double>(points - 1);
      grid(i * points + j, 1) = static_cast<double>(j) / static_cast<double>(points - 1);
    }
  const Matrix probs = row_softmax(logits(params, grid));
  const auto pred = argmax_rows(probs);
  std::string out = "x0,x1,class,confidence\n";
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    out += format_double(grid(r, 0)) + "," + format_double(grid(r, 1)) + "," + std::to_string(pred[r]) + "," +
           format_double(probs(r, static_cast<std::size_t>(pred[r]))) + "\n";
  }
  return out;
}

void run_scatter_demo(RunContext& ctx) {
  const json& c = ctx.cfg;
  const auto seed = seed_of(c);
  const Dataset data =
      two_moons(get<std::size_t>(c, "n_per_class"), get<double>(c, "noise"), derive_seed(seed, "demo_data"));

  TrainConfig tc;
  tc.mode = TrainMode::standard;
  tc.epochs = get<std::size_t>(c, "epochs");
  tc.batch_size = get<std::size_t>(c, "batch_size");
  tc.learning_rate = get<double>(c, "learning_rate");
  tc.transition_epochs = get<std::vector<std::size_t>>(c, "transition_epochs");
  tc.smoothing = get<double>(c, "smoothing");
  tc.seed = seed;
  Rng init_rng = Rng(seed).derive("init");
  const auto params = train(tc, data, MlpParams::init(network_dims(c, 2, 2), init_rng)).params;

  const double eps = get<double>(c, "epsilon");
  const auto iters = get<std::size_t>(c, "iters");
  AttackConfig supervised;
  supervised.epsilon = eps;
  supervised.iterations = iters;
  supervised.step_size = step_for(c, eps, iters);
  supervised.random_init = false;
  Rng attack_rng = Rng(seed).derive("supervised");
  Dataset sup = data;
  sup.inputs = pgd(params, data.as_batch(), supervised, attack_rng);

  ScatterConfig sc;
  sc.epsilon = eps;
  sc.iterations = iters;
  sc.step_size = get_optional<double>(c, "step_size");
  sc.scheme.kind = match_kind_from_string(get<std::string>(c, "scheme"));
  sc.scheme.solver = solver_from(c);
  sc.seed = seed;
  Rng scatter_rng = Rng(seed).derive("scatter");
  Dataset scattered = data;
  scattered.inputs = feature_scatter(params, data.inputs, sc, scatter_rng);

  ctx.write("original.csv", dataset_to_csv(data));
  ctx.write("supervised.csv", dataset_to_csv(sup));
  ctx.write("scattered.csv", dataset_to_csv(scattered));
  ctx.write("boundary.csv", boundary_csv(params, get<std::size_t>(c, "grid_points")));
  ctx.save_model(params);

  const json summary{{"clean_accuracy", accuracy(params, data)},
                     {"supervised_alignment", gradient_sign_alignment(params, data, sup.inputs)},
                     {"scattered_alignment", gradient_sign_alignment(params, data, scattered.inputs)}};
  ctx.write("demo.json", summary.dump(2) + "\n");
  ctx.out << summary.dump() << "\n";
}

void run_replicate_tables(RunContext& ctx) {
  const json& c = ctx.cfg;
  DeskBenchmark bench;
  bench.seed = seed_of(c);
  bench.n_per_class = get<std::size_t>(c, "n_per_class");
  bench.noise_sd = get<double>(c, "noise");
  bench.hidden = get<std::vector<std::size_t>>(c, "hidden");
  bench.epsilon = get<double>(c, "epsilon");
  bench.attack_iterations = get<std::size_t>(c, "iters");
  bench.standard_epochs = get<std::size_t>(c, "standard_epochs");
  bench.scatter_epochs = get<std::size_t>(c, "scatter_epochs");
  bench.transition_epochs = get<std::vector<std::size_t>>(c, "transition_epochs");
  bench.epoch_scale = get<double>(c, "epoch_scale");
  bench.batch_size = get<std::size_t>(c, "batch_size");
  bench.learning_rate = get<double>(c, "learning_rate");
  bench.lr_decay = get<double>(c, "lr_decay");
  bench.smoothing = get<double>(c, "smoothing");
  bench.solver = solver_from(c);

  const auto bundle = replicate_tables(bench);
  for (const Table* t : {&bundle.perturbation, &bundle.matching, &bundle.solver}) {
    const auto csv = table_to_csv(*t);
    ctx.write(t->name + ".csv", csv);
    ctx.out << t->name << "\n" << csv;
  }
}

void run(const std::string& name, RunContext& ctx) {
  if (name == "train") return run_train(ctx);
  if (name == "attack") return run_attack(ctx);
  if (name == "eval") return run_eval(ctx);
  if (name == "loss-surface") return run_loss_surface(ctx);
  if (name == "ot-bench") return run_ot_bench(ctx);
  if (name == "scatter-demo") return run_scatter_demo(ctx);
  if (name == "replicate-tables") return run_replicate_tables(ctx);
  throw ContractError("unknown subcommand '" + name + "'");
}

void add_flags(CLI::App& sub, Flags& f, const std::vector<std::string>& extra) {
  sub.add_option("--config", f.config, "JSON config file (or a previous run's manifest.json)");
  sub.add_option("--seed", f.seed, "Root seed for every random choice in the run");
  sub.add_option("--out", f.out, "Output directory");
  for (const auto& flag : extra) {
    if (flag == "data") sub.add_option("--data", f.data, "two-moons, a CSV file, or images.idx,labels.idx");
    if (flag == "mode")
      sub.add_option("--mode", f.mode, "Training mode")
          ->check(CLI::IsMember({"standard", "madry", "feature_scatter", "random"}));
    if (flag == "epsilon") sub.add_option("--epsilon", f.epsilon, "Perturbation budget (l_inf, [0,1] units)");
    if (flag == "iters") sub.add_option("--iters", f.iters, "Attack / scatter iterations");
    if (flag == "epochs") sub.add_option("--epochs", f.epochs, "Training epochs");
    if (flag == "solver")
      sub.add_option("--solver", f.solver, "OT solver")->check(CLI::IsMember({"sinkhorn", "ipot", "exact"}));
    if (flag == "scheme")
      sub.add_option("--scheme", f.scheme, "Matching scheme")->check(CLI::IsMember({"ot", "uniform", "identity"}));
    if (flag == "checkpoint") sub.add_option("--checkpoint", f.checkpoint, "Model checkpoint JSON");
    if (flag == "attack")
      sub.add_option("--attack", f.attack, "Attack")->check(CLI::IsMember({"fgsm", "pgd", "cw", "random", "none"}));
  }
}

}  // namespace

json RunManifest::to_json() const {
  return {{"subcommand", subcommand}, {"config", config},   {"seed", seed},
          {"version", version},       {"outputs", outputs}, {"duration_seconds", duration_seconds}};
}

json default_config(const std::string& subcommand) {
  if (subcommand == "train") {
    return merged({common_defaults(), data_defaults("train"), solver_defaults(),
                   {{"mode", "standard"},
                    {"epochs", nullptr},
                    {"batch_size", 60},
                    {"learning_rate", 0.1},
                    {"transition_epochs", {60, 90}},
                    {"lr_decay", 0.1},
                    {"smoothing", 0.5},
                    {"hidden", {32, 32}},
                    {"epsilon", kImageEpsilon},
                    {"iters", 1},
                    {"step_size", nullptr},
                    {"scheme", "ot"}}});
  }
  if (subcommand == "attack") {
    return merged({common_defaults(), data_defaults("test"),
                   {{"checkpoint", ""},
                    {"attack", "pgd"},
                    {"epsilon", kImageEpsilon},
                    {"iters", 20},
                    {"step_size", nullptr},
                    {"random_init", true},
                    {"batch_size", 256}}});
  }
  if (subcommand == "eval") {
    return merged({common_defaults(), data_defaults("test"),
                   {{"checkpoint", ""},
                    {"source_checkpoint", ""},
                    {"epsilon", kImageEpsilon},
                    {"iters", 20},
                    {"epsilons", nullptr},
                    {"iteration_counts", {0, 1, 5, 10, 20, 40, 100}},
                    {"batch_size", 256}}});
  }
  if (subcommand == "loss-surface") {
    return merged({common_defaults(), data_defaults("test"),
                   {{"checkpoint", ""}, {"sample", 0}, {"half_width", kImageEpsilon}, {"grid_points", 41}}});
  }
  if (subcommand == "ot-bench") {
    return merged({common_defaults(), solver_defaults(), {{"data", ""}, {"iters", nullptr}}});
  }
  if (subcommand == "scatter-demo") {
    return merged({common_defaults(), solver_defaults(),
                   {{"n_per_class", 100},
                    {"noise", 0.05},
                    {"epsilon", 0.1},
                    {"iters", 1},
                    {"step_size", nullptr},
                    {"scheme", "ot"},
                    {"epochs", 300},
                    {"batch_size", 50},
                    {"learning_rate", 1.0},
                    {"transition_epochs", {180, 270}},
                    {"smoothing", 0.0},
                    {"hidden", {32, 32}},
                    {"grid_points", 101}}});
  }
  if (subcommand == "replicate-tables") {
    const DeskBenchmark d;
    return merged({common_defaults(), solver_defaults(),
                   {{"n_per_class", d.n_per_class},
                    {"noise", d.noise_sd},
                    {"hidden", d.hidden},
                    {"epsilon", d.epsilon},
                    {"iters", d.attack_iterations},
                    {"standard_epochs", d.standard_epochs},
                    {"scatter_epochs", d.scatter_epochs},
                    {"transition_epochs", d.transition_epochs},
                    {"epoch_scale", d.epoch_scale},
                    {"batch_size", d.batch_size},
                    {"learning_rate", d.learning_rate},
                    {"lr_decay", d.lr_decay},
                    {"smoothing", d.smoothing}}});
  }
  return json::object();
}

json load_config(const std::string& subcommand, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("config file not found: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ContractError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  require(doc.is_object(), "config file " + path.string() + " must hold a JSON object");
  if (doc.contains("subcommand") && doc.contains("config")) {
    require(doc["subcommand"] == subcommand, "config file " + path.string() + " is a manifest for '" +
                                                 doc["subcommand"].get<std::string>() + "', not '" + subcommand +
                                                 "'");
    doc = doc["config"];
  }
  json cfg = default_config(subcommand);
  for (const auto& [key, value] : doc.items()) {
    require(cfg.contains(key), "config file " + path.string() + ": unknown key '" + key + "' for " + subcommand);
    cfg[key] = value;
  }
  return cfg;
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feature-scattering adversarial training, OT solvers and robustness evaluation", "scatterforge"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Flags flags;
  struct Entry {
    const char* name;
    const char* help;
    std::vector<std::string> extra;
  };
  const Entry entries[] = {
      {"train", "Train a classifier (standard, madry, feature_scatter or random)",
       {"data", "mode", "epsilon", "iters", "epochs", "solver", "scheme"}},
      {"attack", "Attack a checkpoint and write the perturbed inputs",
       {"data", "epsilon", "iters", "checkpoint", "attack"}},
      {"eval", "Robustness report, budget and iteration sweeps, optional black-box run",
       {"data", "epsilon", "iters", "checkpoint"}},
      {"loss-surface", "Loss grid around one sample along adversarial and random directions",
       {"data", "checkpoint"}},
      {"ot-bench", "Solve an OT problem from a cost-matrix CSV", {"data", "iters", "solver"}},
      {"scatter-demo", "Two-moons point clouds: original, supervised and feature-scattered",
       {"epsilon", "iters", "solver", "scheme"}},
      {"replicate-tables", "Perturbation, matching and solver ablations on two-moons",
       {"epsilon", "iters", "solver"}},
  };
  for (const auto& e : entries) add_flags(*app.add_subcommand(e.name, e.help), flags, e.extra);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return 0;
    err << app.help();
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const auto start = std::chrono::steady_clock::now();
  try {
    json cfg = flags.config.empty() ? default_config(name) : load_config(name, flags.config);
    apply_flags(cfg, flags);
    RunContext ctx{cfg, get<std::string>(cfg, "out"), {}, out};
    fs::create_directories(ctx.out_dir);
    run(name, ctx);

    RunManifest manifest;
    manifest.subcommand = name;
    manifest.config = cfg;
    manifest.seed = seed_of(cfg);
    manifest.outputs = ctx.outputs;
    manifest.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text_atomic(ctx.out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
    return 0;
  } catch (const ContractError& e) {
    err << "scatterforge " << name << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "scatterforge " << name << ": " << e.what() << "\n";
    return 1;
  }
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"scatterforge"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace scatterforge::cli
