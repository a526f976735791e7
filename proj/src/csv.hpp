#pragma once

// Minimal numeric CSV support shared by the dataset and draws readers.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <string>
#include <vector>

#include "cbayes/error.hpp"

namespace cbayes::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

inline Table read(std::istream& in, const std::string& module) {
  Table t;
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty() && trim(line)[0] != '#') break;
  }
  if (trim(line).empty()) throw InputError(module, "CSV input has no header row");
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (fields.size() != t.header.size()) {
      throw InputError(module, "line " + std::to_string(lineno) + " has " +
                                   std::to_string(fields.size()) + " fields, header has " +
                                   std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  return t;
}

/// Parses a finite decimal number; empty, NA and non-finite entries are rejected.
inline double parse_number(const std::string& field, const std::string& module, std::size_t line,
                           const std::string& column) {
  if (field.empty()) {
    throw InputError(module, "missing value at line " + std::to_string(line) + ", column '" + column + "'");
  }
  char* end = nullptr;
  double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size() || !std::isfinite(v)) {
    throw InputError(module, "non-finite or non-numeric value '" + field + "' at line " +
                                 std::to_string(line) + ", column '" + column + "'");
  }
  return v;
}

/// 17 significant digits: enough for an exact round trip of any double.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace cbayes::csv
