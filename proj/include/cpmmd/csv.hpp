#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cpmmd/mmd.hpp"
#include "cpmmd/types.hpp"

namespace cpmmd {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

struct CsvMatrix {
  Matrix data;
  std::optional<std::vector<std::string>> header;
};

/// Comma-separated numeric table with an optional single header line, taken
/// to be present when the first row has a non-numeric cell. `source` names
/// the input in error messages.
CsvMatrix parse_csv_matrix(std::istream& in, const std::string& source = "<stream>");
CsvMatrix read_csv_matrix(const std::string& path);

void write_csv_matrix(std::ostream& out, const Matrix& data, const std::vector<std::string>& header = {});
void write_csv_matrix(const std::string& path, const Matrix& data, const std::vector<std::string>& header = {});

/// X from path_x, Y from path_y; both must have the same column count.
PooledSample load_csv_pair(const std::string& path_x, const std::string& path_y);

/// Row-oriented writer for result tables.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}
  void header(const std::vector<std::string>& names);
  CsvWriter& cell(const std::string& text);
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(bool v) { return cell(std::string(v ? "true" : "false")); }
  void end_row();

 private:
  std::ostream& out_;
  bool first_ = true;
};

}  // namespace cpmmd
