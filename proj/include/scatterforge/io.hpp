#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "scatterforge/linalg.hpp"

namespace scatterforge {

// Writes to a sibling temporary file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& contents);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

// Plain numeric CSV, one matrix row per line, LF endings. An optional header
// row is written first when `header` is non-empty.
std::string matrix_to_csv(const Matrix& m, std::span<const std::string> header = {});
// Parses a rectangular numeric CSV. A non-numeric first line is treated as a
// header and skipped. Errors name the offending line.
Matrix matrix_from_csv(const std::string& text, const std::string& source = "<csv>");
Matrix read_matrix_csv(const std::filesystem::path& path);

std::vector<std::string> split_csv_line(const std::string& line);
bool parse_double(const std::string& cell, double& out);

}  // namespace scatterforge
