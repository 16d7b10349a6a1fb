#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scatterforge/linalg.hpp"
#include "scatterforge/model.hpp"

namespace scatterforge {

struct Dataset {
  Matrix inputs;  // N x d, entries in [0, 1]
  std::vector<int> labels;
  std::size_t classes = 0;
  std::string name;

  std::size_t size() const { return inputs.rows(); }
  std::size_t dim() const { return inputs.cols(); }
  void validate() const;
  LabeledBatch as_batch() const { return {inputs, labels}; }
  Dataset subset(std::span<const std::size_t> indices) const;
};

// Raw moons: class 0 on (cos t, sin t), class 1 on (1 - cos t, 1 - sin t - 0.5),
// t in [0, pi] evenly spaced, plus N(0, noise_sd) per coordinate. The fixed map
// x: [-1, 2] -> [0.1, 0.9], y: [-0.5, 1] -> [0.1, 0.9] brings them into the
// unit square; anything pushed outside by noise is clamped to [0, 1].
Dataset two_moons(std::size_t n_per_class, double noise_sd, std::uint64_t seed);
// The fixed affine map used by two_moons, exposed for geometry checks.
std::pair<double, double> moons_to_unit_square(double x, double y);

// IDX images (magic 0x00000803, u8, N x rows x cols) and labels (0x00000801).
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::optional<std::size_t> limit = std::nullopt);
// Pixels are written as round(255 * x); rows*cols must equal the input width.
void write_idx(const Dataset& ds, std::size_t image_rows, std::size_t image_cols,
               const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

// Header row required. Feature columns are min-max scaled to [0, 1] per
// column (constant columns become 0.5); labels are read from `label_column`.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column = "label");
Dataset parse_csv_dataset(const std::string& text, const std::string& label_column, const std::string& source);
// Header x0..x{d-1},label; values written losslessly.
std::string dataset_to_csv(const Dataset& ds);

// Seeded permutation for (seed, epoch_index), cut into contiguous batches;
// the final short batch is kept.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::size_t epoch_index);
std::vector<LabeledBatch> batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                                  std::size_t epoch_index);

// $SCATTERFORGE_DATA, or ./data when unset.
std::filesystem::path data_directory();
// `path` as given if it exists, otherwise relative to data_directory().
std::filesystem::path resolve_data_path(const std::filesystem::path& path);

}  // namespace scatterforge
