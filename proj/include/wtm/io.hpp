#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "wtm/dynamics.hpp"

namespace wtm::io {

/// Shortest decimal string that round-trips the double.
std::string format_number(double v);

/// RFC 4180 field quoting: quote when the field holds a comma, quote, CR or LF.
std::string csv_field(std::string_view s);

/// Small in-memory CSV builder; rows end with CRLF as RFC 4180 asks.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& row(const std::vector<double>& values);
  CsvTable& row(const std::vector<std::string>& fields);
  std::size_t rows() const { return rows_; }
  const std::string& str() const { return text_; }

 private:
  std::size_t columns_;
  std::size_t rows_ = 0;
  std::string text_;
};

/// Write `content` to a sibling temp file, then rename it over `path`.
/// Parent directories are created.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// Raw little-endian trajectory dump with a small header; used as a cache.
void save_trajectory(const std::filesystem::path& path, const Trajectory& trajectory, std::uint64_t key);
/// Returns false if the file is missing, truncated or carries another key.
bool load_trajectory(const std::filesystem::path& path, std::uint64_t key, Trajectory& out);

}  // namespace wtm::io
