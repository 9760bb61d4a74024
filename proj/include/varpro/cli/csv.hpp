#pragma once

#include <string>
#include <vector>

namespace varpro::cli {

/// Numeric table with a header row. Values are written with 17 significant digits, so
/// reading a file back reproduces every entry bit for bit; NaN is written as "nan".
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
  std::vector<double> values(const std::string& name) const;
};

std::string format_value(double v);

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

/// Right-aligned plain-text rendering with a fixed number of significant digits.
std::string format_aligned(const CsvTable& table, int digits = 6);

}  // namespace varpro::cli
