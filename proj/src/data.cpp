#include "scatterforge/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "scatterforge/errors.hpp"
#include "scatterforge/io.hpp"
#include "scatterforge/rng.hpp"

namespace scatterforge {

void Dataset::validate() const {
  require(inputs.rows() >= 1, "Dataset '" + name + "': no samples");
  require(labels.size() == inputs.rows(), "Dataset '" + name + "': label count does not match rows");
  for (double v : inputs.data())
    require(v >= 0.0 && v <= 1.0, "Dataset '" + name + "': input outside [0,1]");
  for (int y : labels)
    require(y >= 0 && static_cast<std::size_t>(y) < classes, "Dataset '" + name + "': label out of range");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out{gather_rows(inputs, indices), {}, classes, name};
  out.labels.reserve(indices.size());
  for (auto i : indices) out.labels.push_back(labels[i]);
  return out;
}

std::pair<double, double> moons_to_unit_square(double x, double y) {
  return {0.1 + 0.8 * (x + 1.0) / 3.0, 0.1 + 0.8 * (y + 0.5) / 1.5};
}

Dataset two_moons(std::size_t n_per_class, double noise_sd, std::uint64_t seed) {
  require(n_per_class >= 1, "two_moons: n_per_class must be at least 1");
  require(noise_sd >= 0.0, "two_moons: noise_sd must be nonnegative");
  Rng rng = Rng(seed).derive("two_moons");
  Dataset ds{Matrix(2 * n_per_class, 2), std::vector<int>(2 * n_per_class), 2, "two_moons"};
  const double denom = n_per_class > 1 ? static_cast<double>(n_per_class - 1) : 1.0;
  for (std::size_t k = 0; k < 2 * n_per_class; ++k) {
    const int label = k < n_per_class ? 0 : 1;
    const double t = std::numbers::pi * static_cast<double>(k % n_per_class) / denom;
    double x = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double y = label == 0 ? std::sin(t) : 1.0 - std::sin(t) - 0.5;
    if (noise_sd > 0.0) {
      x += noise_sd * rng.normal();
      y += noise_sd * rng.normal();
    }
    auto [u, v] = moons_to_unit_square(x, y);
    ds.inputs(k, 0) = std::clamp(u, 0.0, 1.0);
    ds.inputs(k, 1) = std::clamp(v, 0.0, 1.0);
    ds.labels[k] = label;
  }
  return ds;
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::string& what) {
  if (offset + 4 > bytes.size())
    throw FormatError(what + ": file truncated at byte offset " + std::to_string(offset));
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::string& out, std::uint32_t v) {
  out += static_cast<char>((v >> 24) & 0xFF);
  out += static_cast<char>((v >> 16) & 0xFF);
  out += static_cast<char>((v >> 8) & 0xFF);
  out += static_cast<char>(v & 0xFF);
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::optional<std::size_t> limit) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);
  const std::string img_name = images_path.string();
  const std::string lab_name = labels_path.string();

  const auto img_magic = read_be32(img, 0, img_name);
  if (img_magic != 0x00000803)
    throw FormatError(img_name + ": bad magic number at byte offset 0 (expected 0x00000803)");
  const auto lab_magic = read_be32(lab, 0, lab_name);
  if (lab_magic != 0x00000801)
    throw FormatError(lab_name + ": bad magic number at byte offset 0 (expected 0x00000801)");

  const std::size_t count = read_be32(img, 4, img_name);
  const std::size_t rows = read_be32(img, 8, img_name);
  const std::size_t cols = read_be32(img, 12, img_name);
  const std::size_t label_count = read_be32(lab, 4, lab_name);
  if (label_count != count)
    throw FormatError(lab_name + ": label count " + std::to_string(label_count) + " at byte offset 4 does not match " +
                      std::to_string(count) + " images");
  const std::size_t dim = rows * cols;
  require(dim > 0, img_name + ": zero-sized images");
  if (img.size() < 16 + count * dim)
    throw FormatError(img_name + ": file truncated at byte offset " + std::to_string(img.size()) + ", expected " +
                      std::to_string(16 + count * dim) + " bytes");
  if (lab.size() < 8 + count)
    throw FormatError(lab_name + ": file truncated at byte offset " + std::to_string(lab.size()) + ", expected " +
                      std::to_string(8 + count) + " bytes");

  const std::size_t n = limit ? std::min(*limit, count) : count;
  require(n >= 1, "load_idx: no samples selected");
  Dataset ds{Matrix(n, dim), std::vector<int>(n), 0, images_path.stem().string()};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) ds.inputs(i, j) = static_cast<double>(img[16 + i * dim + j]) / 255.0;
    ds.labels[i] = lab[8 + i];
    ds.classes = std::max(ds.classes, static_cast<std::size_t>(lab[8 + i]) + 1);
  }
  return ds;
}

void write_idx(const Dataset& ds, std::size_t image_rows, std::size_t image_cols,
               const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  require(image_rows * image_cols == ds.dim(), "write_idx: image shape does not match input width");
  std::string img;
  put_be32(img, 0x00000803);
  put_be32(img, static_cast<std::uint32_t>(ds.size()));
  put_be32(img, static_cast<std::uint32_t>(image_rows));
  put_be32(img, static_cast<std::uint32_t>(image_cols));
  for (double v : ds.inputs.data()) img += static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  std::string lab;
  put_be32(lab, 0x00000801);
  put_be32(lab, static_cast<std::uint32_t>(ds.size()));
  for (int y : ds.labels) {
    require(y >= 0 && y < 256, "write_idx: label does not fit in a byte");
    lab += static_cast<char>(static_cast<unsigned char>(y));
  }
  write_text_atomic(images_path, img);
  write_text_atomic(labels_path, lab);
}

Dataset parse_csv_dataset(const std::string& text, const std::string& label_column, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) header = split_csv_line(line);
  }
  if (header.empty()) throw FormatError(source + ": missing header row");
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) throw FormatError(source + ":" + std::to_string(line_no) + ": no column named '" + label_column + "'");
  const std::size_t label_col = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t width = header.size();

  std::vector<double> features;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != width)
      throw FormatError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                        " cells, found " + std::to_string(cells.size()));
    for (std::size_t j = 0; j < width; ++j) {
      double v = 0.0;
      if (!parse_double(cells[j], v))
        throw FormatError(source + ":" + std::to_string(line_no) + ": non-numeric cell in column '" + header[j] +
                          "' ('" + cells[j] + "')");
      if (j == label_col) {
        if (v < 0.0 || v != std::floor(v) || v > 1e6)
          throw FormatError(source + ":" + std::to_string(line_no) + ": label must be a nonnegative integer");
        labels.push_back(static_cast<int>(v));
      } else {
        features.push_back(v);
      }
    }
  }
  if (labels.empty()) throw FormatError(source + ": no data rows");
  const std::size_t n = labels.size();
  const std::size_t d = width - 1;
  require(d >= 1, source + ": no feature columns");
  Dataset ds{Matrix(n, d, std::move(features)), std::move(labels), 0, std::filesystem::path(source).stem().string()};
  for (std::size_t j = 0; j < d; ++j) {
    double lo = ds.inputs(0, j), hi = ds.inputs(0, j);
    for (std::size_t i = 1; i < n; ++i) {
      lo = std::min(lo, ds.inputs(i, j));
      hi = std::max(hi, ds.inputs(i, j));
    }
    for (std::size_t i = 0; i < n; ++i)
      ds.inputs(i, j) = hi > lo ? std::clamp((ds.inputs(i, j) - lo) / (hi - lo), 0.0, 1.0) : 0.5;
  }
  for (int y : ds.labels) ds.classes = std::max(ds.classes, static_cast<std::size_t>(y) + 1);
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv_dataset(ss.str(), label_column, path.string());
}

std::string dataset_to_csv(const Dataset& ds) {
  std::string out;
  for (std::size_t j = 0; j < ds.dim(); ++j) out += "x" + std::to_string(j) + ",";
  out += "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.inputs.row(i)) out += format_double(v) + ",";
    out += std::to_string(ds.labels[i]) + "\n";
  }
  return out;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::size_t epoch_index) {
  require(batch_size >= 1, "batches: batch_size must be at least 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "epoch", epoch_index));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size)
    out.emplace_back(order.begin() + start, order.begin() + std::min(n, start + batch_size));
  return out;
}

std::vector<LabeledBatch> batches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                                  std::size_t epoch_index) {
  std::vector<LabeledBatch> out;
  for (const auto& idx : batch_indices(ds.size(), batch_size, seed, epoch_index)) {
    LabeledBatch b{gather_rows(ds.inputs, idx), {}};
    for (auto i : idx) b.labels.push_back(ds.labels[i]);
    out.push_back(std::move(b));
  }
  return out;
}

std::filesystem::path data_directory() {
  if (const char* env = std::getenv("SCATTERFORGE_DATA"); env && *env) return env;
  return "data";
}

std::filesystem::path resolve_data_path(const std::filesystem::path& path) {
  if (path.is_absolute() || std::filesystem::exists(path)) return path;
  return data_directory() / path;
}

}  // namespace scatterforge
