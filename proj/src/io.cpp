#include "wtm/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace wtm::io {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvTable::CsvTable(std::vector<std::string> header) : columns_(header.size()) {
  if (header.empty()) throw std::invalid_argument("csv: empty header");
  row(header);
  rows_ = 0;
}

CsvTable& CsvTable::row(const std::vector<double>& values) {
  std::vector<std::string> fields;
  fields.reserve(values.size());
  for (double v : values) fields.push_back(format_number(v));
  return row(fields);
}

CsvTable& CsvTable::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) throw std::invalid_argument("csv: row width differs from header");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) text_ += ',';
    text_ += csv_field(fields[i]);
  }
  text_ += "\r\n";
  ++rows_;
  return *this;
}

void atomic_write(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

constexpr char kMagic[8] = {'W', 'T', 'M', 'T', 'R', 'J', '0', '1'};

struct Header {
  char magic[8];
  std::uint64_t key;
  std::int64_t rows;
  std::int64_t cols;
  double dt;
};

}  // namespace

void save_trajectory(const std::filesystem::path& path, const Trajectory& trajectory, std::uint64_t key) {
  Header h{};
  std::memcpy(h.magic, kMagic, sizeof kMagic);
  h.key = key;
  h.rows = trajectory.states.rows();
  h.cols = trajectory.states.cols();
  h.dt = trajectory.dt;
  std::string bytes(sizeof h + sizeof(double) * static_cast<std::size_t>(trajectory.states.size()), '\0');
  std::memcpy(bytes.data(), &h, sizeof h);
  std::memcpy(bytes.data() + sizeof h, trajectory.states.data(), bytes.size() - sizeof h);
  atomic_write(path, bytes);
}

bool load_trajectory(const std::filesystem::path& path, std::uint64_t key, Trajectory& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  Header h{};
  if (!in.read(reinterpret_cast<char*>(&h), sizeof h)) return false;
  if (std::memcmp(h.magic, kMagic, sizeof kMagic) != 0 || h.key != key || h.rows < 1 || h.cols < 1) return false;
  Trajectory t{Eigen::MatrixXd(h.rows, h.cols), h.dt};
  if (!in.read(reinterpret_cast<char*>(t.states.data()), static_cast<std::streamsize>(sizeof(double) * t.states.size())))
    return false;
  out = std::move(t);
  return true;
}

}  // namespace wtm::io
