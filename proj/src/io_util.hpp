#pragma once

// Internal helpers shared by the CSV and binary readers/writers.

#include "vins/error.hpp"

#include <bit>
#include <cmath>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace vins::detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

/// Reads every line of a text file; the header is returned as the first element.
inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

inline std::ofstream open_output(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::out : std::ios::out);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  return out;
}

/// Shortest decimal representation that round-trips exactly.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  const U bits = std::bit_cast<U>(value);
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(bytes, sizeof(T));
}

template <typename T>
bool read_le(std::istream& in, T& value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(bytes[i]) << (8 * i);
  value = std::bit_cast<T>(bits);
  return true;
}

inline std::string line_msg(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  return path.string() + ":" + std::to_string(line) + ": " + what;
}

// Parses a numeric CSV body with the exact header given; returns one row of doubles per line.
inline std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path,
                                                  std::string_view header) {
  const auto lines = read_lines(path);
  std::size_t first_nonblank = 0;
  while (first_nonblank < lines.size() && trim(lines[first_nonblank]).empty()) ++first_nonblank;
  if (first_nonblank == lines.size()) throw Error(ErrorKind::EmptyFile, path.string());
  if (trim(lines[first_nonblank]) != header) {
    throw Error(ErrorKind::MalformedRow,
                line_msg(path, first_nonblank + 1, "expected header '" + std::string(header) + "'"));
  }
  const std::size_t ncols = split_fields(header).size();
  std::vector<std::vector<double>> rows;
  for (std::size_t i = first_nonblank + 1; i < lines.size(); ++i) {
    const std::string_view line = trim(lines[i]);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != ncols) {
      throw Error(ErrorKind::MalformedRow,
                  line_msg(path, i + 1, "expected " + std::to_string(ncols) + " fields, got " +
                                            std::to_string(fields.size())));
    }
    std::vector<double> row(ncols);
    for (std::size_t c = 0; c < ncols; ++c) {
      if (!parse_double(fields[c], row[c]) || !std::isfinite(row[c])) {
        throw Error(ErrorKind::MalformedRow,
                    line_msg(path, i + 1, "bad number '" + std::string(fields[c]) + "'"));
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::EmptyFile, path.string() + " has no data rows");
  return rows;
}

}  // namespace vins::detail
