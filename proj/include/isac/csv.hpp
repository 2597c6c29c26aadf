#pragma once

// Bit-stable CSV output: '\n' line endings, '.' decimal point, 17 significant
// digits, header row first.

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

namespace isac {

/// Shortest-roundtrip is not enough for byte stability across libraries;
/// the fixed 17-digit scientific form is locale-independent and exact.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, 16);
  if (res.ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

using CsvCell = std::variant<double, long long, std::string>;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<CsvCell>> rows;
};

inline std::string format_cell(const CsvCell& c) {
  if (const double* d = std::get_if<double>(&c)) return format_double(*d);
  if (const long long* i = std::get_if<long long>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

inline void write_csv(std::ostream& os, const CsvTable& table) {
  auto line = [&](const auto& cells, auto&& fmt) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << ',';
      os << fmt(cells[i]);
    }
    os << '\n';
  };
  line(table.header, [](const std::string& s) { return s; });
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size())
      throw std::invalid_argument("write_csv: row width does not match header");
    line(row, format_cell);
  }
}

/// Writes to `path`, or to `fallback` when path is empty or "-".
inline void emit_csv(const CsvTable& table, const std::string& path, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    write_csv(fallback, table);
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("emit_csv: cannot open " + path);
  write_csv(f, table);
  f.flush();
  if (!f) throw std::runtime_error("emit_csv: write failed for " + path);
}

}  // namespace isac
