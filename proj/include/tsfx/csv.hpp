#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tsfx/errors.hpp"

namespace tsfx::csv {

// 17 significant digits: enough to round-trip any finite double exactly.
inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_matrix(const std::string& path, const std::vector<std::string>& header,
                         const double* data, std::size_t rows, std::size_t cols) {
  std::ofstream out(path);
  if (!out) throw ContractError("cannot open " + path + " for writing");
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << "\n";
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out << (c ? "," : "") << g17(data[r * cols + c]);
    out << "\n";
  }
  if (!out) throw ContractError("failed writing " + path);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline Table read_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ContractError("empty csv " + path);
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_line(line);
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) row[i] = std::stod(cells[i]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace tsfx::csv
