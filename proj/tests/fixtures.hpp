#pragma once

// Shared seeded models and datasets for the tests.

#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "scatterforge/data.hpp"
#include "scatterforge/model.hpp"
#include "scatterforge/tables.hpp"
#include "scatterforge/train.hpp"

namespace fixture {

struct Moons {
  scatterforge::DeskData data;
  scatterforge::MlpParams standard;
};

// The desk benchmark's standard-trained model, trained once per process.
inline const Moons& moons() {
  static const Moons m = [] {
    scatterforge::DeskBenchmark bench;
    Moons out{scatterforge::desk_data(bench), {}};
    const auto init = scatterforge::desk_init(bench, out.data.train.dim(), out.data.train.classes);
    out.standard = scatterforge::train(scatterforge::desk_standard_config(bench), out.data.train, init).params;
    return out;
  }();
  return m;
}

// The desk benchmark's feature-scattering model (OT matching, Sinkhorn).
inline const scatterforge::MlpParams& moons_scatter() {
  static const scatterforge::MlpParams p = [] {
    scatterforge::DeskBenchmark bench;
    const auto& data = moons().data;
    const auto init = scatterforge::desk_init(bench, data.train.dim(), data.train.classes);
    const auto cfg = scatterforge::desk_scatter_config(bench, scatterforge::MatchKind::ot, scatterforge::SolverKind::sinkhorn);
    return scatterforge::train(cfg, data.train, init).params;
  }();
  return p;
}

// A random net with nonzero biases, so no hidden unit sits at the ReLU kink.
inline scatterforge::MlpParams random_net(scatterforge::Rng& rng, const std::vector<std::size_t>& dims) {
  auto p = scatterforge::MlpParams::init(dims, rng);
  for (auto& l : p.layers)
    for (auto& b : l.bias) b = rng.uniform(-0.3, 0.3);
  return p;
}

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("scatterforge_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace fixture
