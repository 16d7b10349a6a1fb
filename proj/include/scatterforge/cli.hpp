#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace scatterforge::cli {

inline constexpr const char* kVersion = "0.1.0";

// Written as manifest.json next to every run's outputs. Passing the manifest
// back through --config reruns with the same configuration.
struct RunManifest {
  std::string subcommand;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string version = kVersion;
  std::vector<std::string> outputs;
  double duration_seconds = 0.0;

  nlohmann::json to_json() const;
};

// Built-in defaults for a subcommand (empty object for unknown names).
nlohmann::json default_config(const std::string& subcommand);

// Merges a JSON config file (or a manifest's "config") over the defaults.
// Keys the subcommand does not know are rejected.
nlohmann::json load_config(const std::string& subcommand, const std::filesystem::path& path);

// Runs one command line. Returns 0 on success, 2 on usage, config or contract
// errors, 1 on any other failure.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scatterforge::cli
