#pragma once

// Minimal RFC-4180 reading and writing. Only numeric tables are read.

#include "ivinv/numerics.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ivinv {

struct CsvTable {
  std::vector<std::string> header;
  /// rows[i] has header.size() entries.
  std::vector<std::vector<double>> rows;

  /// Index of the named column or -1.
  int column(const std::string& name) const;
};

/// Splits one CSV record; quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_csv_line(const std::string& line);

/// Header required. Errors carry the 1-based line number.
CsvTable read_numeric_csv(std::istream& in, bool has_header = true);
CsvTable read_numeric_csv_file(const std::string& path, bool has_header = true);

/// A dim x dim numeric matrix, optionally preceded by a non-numeric header row.
MatrixXd read_matrix_file(const std::string& path);

std::string format_double(double x);
std::string csv_escape(const std::string& field);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  CsvWriter& field(const std::string& s);
  CsvWriter& field(const char* s) { return field(std::string(s)); }
  CsvWriter& field(double x);
  CsvWriter& field(long long x);
  CsvWriter& field(int x) { return field(static_cast<long long>(x)); }
  CsvWriter& field(std::uint64_t x);
  CsvWriter& field(bool b) { return field(std::string(b ? "true" : "false")); }
  void end_row();
  void blank_row();

 private:
  std::ostream& out_;
  bool first_ = true;
};

}  // namespace ivinv
