#include "ivinv/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ivinv {

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  if (quoted) throw DataError("unterminated quoted field");
  out.push_back(cur);
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& raw, double& out) {
  const std::string s = trim(raw);
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::string line_error(int line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

}  // namespace

CsvTable read_numeric_csv(std::istream& in, bool has_header) {
  CsvTable table;
  std::string line;
  int line_no = 0;
  bool have_header = !has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    if (trim(line).empty() || trim(line) == "\r") continue;
    std::vector<std::string> fields;
    try {
      fields = split_csv_line(line);
    } catch (const DataError& e) {
      throw DataError(line_error(line_no, e.what()));
    }
    if (!have_header) {
      for (auto& f : fields) table.header.push_back(trim(f));
      have_header = true;
      continue;
    }
    if (!table.header.empty() && fields.size() != table.header.size()) {
      throw DataError(line_error(line_no, "expected " + std::to_string(table.header.size()) +
                                              " fields, found " + std::to_string(fields.size())));
    }
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (!parse_number(fields[j], row[j]) || !std::isfinite(row[j])) {
        throw DataError(line_error(line_no, "field " + std::to_string(j + 1) +
                                                " is not a finite number: '" + fields[j] + "'"));
      }
    }
    if (table.header.empty() && !table.rows.empty() && row.size() != table.rows.front().size()) {
      throw DataError(line_error(line_no, "ragged row"));
    }
    table.rows.push_back(std::move(row));
  }
  if (!have_header) throw DataError("line 1: missing header");
  return table;
}

CsvTable read_numeric_csv_file(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return read_numeric_csv(in, has_header);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

MatrixXd read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string first;
  std::streampos start = in.tellg();
  while (std::getline(in, first) && trim(first).empty()) start = in.tellg();
  bool header = false;
  for (const auto& f : split_csv_line(first)) {
    double v;
    if (!parse_number(f, v)) header = true;
  }
  in.clear();
  in.seekg(start);
  CsvTable t;
  try {
    t = read_numeric_csv(in, header);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
  if (t.rows.empty()) throw DataError(path + ": empty matrix");
  const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
  const Eigen::Index m = static_cast<Eigen::Index>(t.rows.front().size());
  MatrixXd out(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) out(i, j) = t.rows[i][j];
  return out;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "NaN";
  if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

CsvWriter& CsvWriter::field(const std::string& s) {
  if (!first_) out_ << ',';
  out_ << csv_escape(s);
  first_ = false;
  return *this;
}

CsvWriter& CsvWriter::field(double x) { return field(format_double(x)); }

CsvWriter& CsvWriter::field(long long x) { return field(std::to_string(x)); }

CsvWriter& CsvWriter::field(std::uint64_t x) { return field(std::to_string(x)); }

void CsvWriter::end_row() {
  out_ << "\r\n";
  first_ = true;
}

void CsvWriter::blank_row() {
  out_ << "\r\n";
  first_ = true;
}

}  // namespace ivinv
