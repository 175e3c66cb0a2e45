#include "gsr/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>
#include <thread>

namespace gsr::io {

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ostringstream tag;
  tag << ".tmp." << std::this_thread::get_id();
  auto tmp = path;
  tmp += tag.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw FormatError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  write_file_atomic(path, doc.dump(2) + "\n");
}

std::string matrix_to_csv(const Matrix& m) {
  std::string out;
  out.reserve(m.size() * 24);
  std::array<char, 32> buf{};
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out.push_back(',');
      auto res = std::to_chars(buf.data(), buf.data() + buf.size(), m(r, c));
      out.append(buf.data(), res.ptr);
    }
    out.push_back('\n');
  }
  return out;
}

Matrix matrix_from_csv(std::string_view text) {
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    if (line.empty()) continue;
    std::size_t count = 0;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string_view::npos) comma = line.size();
      std::string_view field = line.substr(start, comma - start);
      double v = 0.0;
      auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        throw FormatError("CSV: bad number '" + std::string(field) + "' on row " +
                          std::to_string(rows));
      }
      values.push_back(v);
      ++count;
      start = comma + 1;
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw FormatError("CSV: row " + std::to_string(rows) + " has " + std::to_string(count) +
                        " fields, expected " + std::to_string(cols));
    }
    ++rows;
  }
  return Matrix(rows, cols, std::move(values));
}

void write_csv(const std::filesystem::path& path, const Matrix& m) {
  write_file_atomic(path, matrix_to_csv(m));
}

Matrix read_csv(const std::filesystem::path& path) { return matrix_from_csv(read_file(path)); }

std::string matrix_to_pgm(const Matrix& m) {
  std::string out = "P5\n" + std::to_string(m.cols()) + " " + std::to_string(m.rows()) +
                    "\n255\n";
  double lo = 0.0;
  double hi = 0.0;
  if (m.size() > 0) {
    auto [mn, mx] = std::minmax_element(m.values().begin(), m.values().end());
    lo = *mn;
    hi = *mx;
  }
  const double span = hi - lo;
  for (double v : m.values()) {
    const double unit = span > 0.0 ? (v - lo) / span : 0.0;
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(unit * 255.0))));
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Matrix& m) {
  write_file_atomic(path, matrix_to_pgm(m));
}

}  // namespace gsr::io
