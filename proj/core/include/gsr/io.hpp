#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "gsr/matrix.hpp"

namespace gsr::io {

/// Raised for unreadable or malformed input files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// Round-trip precision CSV, one matrix row per line.
std::string matrix_to_csv(const Matrix& m);
Matrix matrix_from_csv(std::string_view text);
void write_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_csv(const std::filesystem::path& path);

/// Binary PGM (P5), values mapped linearly from [min,max] to [0,255].
/// A constant matrix maps to 0.
std::string matrix_to_pgm(const Matrix& m);
void write_pgm(const std::filesystem::path& path, const Matrix& m);

}  // namespace gsr::io
