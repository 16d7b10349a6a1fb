#include "scatterforge/checkpoint.hpp"

#include <fstream>

#include "scatterforge/errors.hpp"
#include "scatterforge/io.hpp"

namespace scatterforge {

nlohmann::json checkpoint_to_json(const MlpParams& params) {
  params.validate();
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (const auto& layer : params.layers) {
    nlohmann::json w = nlohmann::json::array();
    for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
      auto row = layer.weight.row(r);
      w.push_back(std::vector<double>(row.begin(), row.end()));
    }
    weights.push_back(std::move(w));
    biases.push_back(layer.bias);
  }
  return {
      {"version", kCheckpointVersion},
      {"layer_dims", params.layer_dims()},
      {"activation", "relu"},
      {"weights", std::move(weights)},
      {"bias", std::move(biases)},
      {"classes", params.classes()},
      {"pixel_domain", {0.0, 1.0}},
  };
}

MlpParams checkpoint_from_json(const nlohmann::json& doc) {
  try {
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    if (doc.at("activation").get<std::string>() != "relu")
      throw FormatError("checkpoint: unsupported activation");
    const auto dims = doc.at("layer_dims").get<std::vector<std::size_t>>();
    const auto& weights = doc.at("weights");
    const auto& biases = doc.at("bias");
    if (dims.size() < 2 || weights.size() + 1 != dims.size() || biases.size() + 1 != dims.size())
      throw FormatError("checkpoint: layer_dims inconsistent with weights/bias");
    MlpParams params;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
      const auto rows = weights[k].get<std::vector<std::vector<double>>>();
      if (rows.size() != dims[k + 1]) throw FormatError("checkpoint: layer " + std::to_string(k) + " row count");
      Layer layer{Matrix(dims[k + 1], dims[k]), biases[k].get<std::vector<double>>()};
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != dims[k]) throw FormatError("checkpoint: layer " + std::to_string(k) + " column count");
        std::copy(rows[r].begin(), rows[r].end(), layer.weight.row(r).begin());
      }
      if (layer.bias.size() != dims[k + 1]) throw FormatError("checkpoint: layer " + std::to_string(k) + " bias length");
      params.layers.push_back(std::move(layer));
    }
    if (doc.at("classes").get<std::size_t>() != params.classes())
      throw FormatError("checkpoint: classes does not match final layer");
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const MlpParams& params, const std::filesystem::path& path) {
  write_text_atomic(path, checkpoint_to_json(params).dump(2) + "\n");
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open checkpoint " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace scatterforge
