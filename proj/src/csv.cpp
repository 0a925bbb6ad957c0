#include "gridse/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gridse::csv {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw std::runtime_error("csv: missing column '" + name + "'");
}

double Table::num(std::size_t row, std::size_t col) const {
  const std::string& cell = rows.at(row).at(col);
  const std::string t = trim(cell);
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str() || *end != '\0')
    throw std::runtime_error("csv: non-numeric cell '" + cell + "' at row " +
                             std::to_string(row + 2) + ", column " +
                             std::to_string(col + 1));
  return v;
}

long Table::integer(std::size_t row, std::size_t col) const {
  double v = num(row, col);
  long l = static_cast<long>(v);
  if (static_cast<double>(l) != v)
    throw std::runtime_error("csv: expected integer at row " +
                             std::to_string(row + 2) + ", column " +
                             std::to_string(col + 1));
  return l;
}

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_line(line);
    if (first) {
      t.header = cells;
      first = false;
    } else {
      if (cells.size() != t.header.size())
        throw std::runtime_error("csv: row " + std::to_string(t.rows.size() + 2) +
                                 " of '" + path + "' has " +
                                 std::to_string(cells.size()) + " cells, expected " +
                                 std::to_string(t.header.size()));
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw std::runtime_error("csv: '" + path + "' has no header row");
  return t;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct Writer::Impl {
  std::ofstream out;
  bool row_started = false;
};

Writer::Writer(const std::string& path) : impl_(new Impl) {
  impl_->out.open(path);
  if (!impl_->out) {
    delete impl_;
    throw std::runtime_error("csv: cannot write '" + path + "'");
  }
}

Writer::~Writer() { delete impl_; }

void Writer::header(const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) impl_->out << ',';
    impl_->out << names[i];
  }
  impl_->out << '\n';
}

void Writer::cell(const std::string& s) {
  if (impl_->row_started) impl_->out << ',';
  impl_->out << s;
  impl_->row_started = true;
}

void Writer::cell(double v) { cell(format_double(v)); }

void Writer::cell(long v) { cell(std::to_string(v)); }

void Writer::end_row() {
  impl_->out << '\n';
  impl_->row_started = false;
}

Eigen::MatrixXd read_matrix(const std::string& path) {
  Table t = read_table(path);
  Eigen::MatrixXd m(static_cast<long>(t.rows.size()),
                    static_cast<long>(t.header.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 0; c < t.header.size(); ++c)
      m(static_cast<long>(r), static_cast<long>(c)) = t.num(r, c);
  return m;
}

void write_matrix(const std::string& path, const Eigen::MatrixXd& m,
                  const std::string& prefix) {
  Writer w(path);
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(m.cols()));
  for (long c = 0; c < m.cols(); ++c) names.push_back(prefix + std::to_string(c));
  w.header(names);
  for (long r = 0; r < m.rows(); ++r) {
    for (long c = 0; c < m.cols(); ++c) w.cell(m(r, c));
    w.end_row();
  }
}

}  // namespace gridse::csv
