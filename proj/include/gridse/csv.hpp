#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace gridse::csv {

/// A parsed CSV file: one header row plus string cells.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws if absent
  double num(std::size_t row, std::size_t col) const;
  long integer(std::size_t row, std::size_t col) const;
};

Table read_table(const std::string& path);

/// Streaming writer. Numbers are rendered with std::to_chars (shortest
/// round-trip form), so output is byte-stable across runs.
class Writer {
 public:
  explicit Writer(const std::string& path);
  ~Writer();
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void header(const std::vector<std::string>& names);
  void cell(const std::string& s);
  void cell(double v);
  void cell(long v);
  void cell(int v) { cell(static_cast<long>(v)); }
  void end_row();

 private:
  struct Impl;
  Impl* impl_;
};

std::string format_double(double v);

/// Loads a headered numeric CSV into a dense matrix.
Eigen::MatrixXd read_matrix(const std::string& path);

/// Writes a matrix with generated column names (prefix0, prefix1, ...).
void write_matrix(const std::string& path, const Eigen::MatrixXd& m,
                  const std::string& prefix);

}  // namespace gridse::csv
