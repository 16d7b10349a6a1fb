#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "scatterforge/model.hpp"

namespace scatterforge {

inline constexpr int kCheckpointVersion = 1;

// {version, layer_dims, activation, weights, bias, classes, pixel_domain}.
// Doubles are written in shortest round-trip form, so read(write(p)) == p.
nlohmann::json checkpoint_to_json(const MlpParams& params);
MlpParams checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace scatterforge
