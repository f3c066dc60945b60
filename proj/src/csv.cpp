#include "cpmmd/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cpmmd/errors.hpp"

namespace cpmmd {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

CsvMatrix parse_csv_matrix(std::istream& in, const std::string& source) {
  CsvMatrix out;
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  std::string line;
  std::size_t row = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> values;
    values.reserve(fields.size());
    std::size_t bad_column = 0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto v = parse_number(fields[c]);
      if (!v) {
        bad_column = c + 1;
        break;
      }
      values.push_back(*v);
    }
    if (first) {
      first = false;
      width = fields.size();
      if (bad_column != 0) {
        out.header.emplace();
        for (auto f : fields) out.header->emplace_back(f);
        continue;
      }
    }
    if (fields.size() != width)
      throw ParseError(ParseErrorKind::RaggedRow,
                       source + ": row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                           " fields, expected " + std::to_string(width),
                       row, std::min(fields.size(), width) + 1);
    if (bad_column != 0)
      throw ParseError(ParseErrorKind::NonNumeric,
                       source + ": non-numeric value '" + std::string(fields[bad_column - 1]) + "' at row " +
                           std::to_string(row) + ", column " + std::to_string(bad_column),
                       row, bad_column);
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError(ParseErrorKind::Empty, source + ": no data rows", 0, 0);
  out.data.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) out.data(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return out;
}

CsvMatrix read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(ParseErrorKind::Unreadable, "cannot open '" + path + "'", 0, 0);
  return parse_csv_matrix(in, path);
}

void write_csv_matrix(std::ostream& out, const Matrix& data, const std::vector<std::string>& header) {
  CsvWriter w(out);
  if (!header.empty()) w.header(header);
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.cols(); ++j) w.cell(data(i, j));
    w.end_row();
  }
}

void write_csv_matrix(const std::string& path, const Matrix& data, const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  write_csv_matrix(out, data, header);
}

PooledSample load_csv_pair(const std::string& path_x, const std::string& path_y) {
  CsvMatrix x = read_csv_matrix(path_x);
  CsvMatrix y = read_csv_matrix(path_y);
  if (x.data.cols() != y.data.cols())
    throw ParseError(ParseErrorKind::ColumnMismatch,
                     path_y + ": " + std::to_string(y.data.cols()) + " columns but " + path_x + " has " +
                         std::to_string(x.data.cols()),
                     y.header ? 2 : 1, static_cast<std::size_t>(std::min(x.data.cols(), y.data.cols())) + 1);
  return PooledSample(std::move(x.data), std::move(y.data));
}

void CsvWriter::header(const std::vector<std::string>& names) {
  for (const auto& n : names) cell(n);
  end_row();
}

CsvWriter& CsvWriter::cell(const std::string& text) {
  if (!first_) out_ << ',';
  first_ = false;
  if (text.find_first_of(",\"\n") != std::string::npos) {
    out_ << '"';
    for (char ch : text) out_ << (ch == '"' ? "\"\"" : std::string(1, ch));
    out_ << '"';
  } else {
    out_ << text;
  }
  return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_double(v)); }

CsvWriter& CsvWriter::cell(long long v) { return cell(std::to_string(v)); }

void CsvWriter::end_row() {
  out_ << '\n';
  first_ = true;
}

}  // namespace cpmmd
