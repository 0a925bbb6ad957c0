#include "gridse/network.hpp"

#include <algorithm>
#include <stdexcept>

#include "gridse/csv.hpp"

namespace gridse {

namespace {

BusKind parse_kind(const std::string& s) {
  if (s == "slack") return BusKind::Slack;
  if (s == "PV" || s == "pv") return BusKind::PV;
  if (s == "PQ" || s == "pq") return BusKind::PQ;
  throw std::runtime_error("unknown bus kind '" + s + "'");
}

const char* kind_name(BusKind k) {
  switch (k) {
    case BusKind::Slack: return "slack";
    case BusKind::PV: return "PV";
    default: return "PQ";
  }
}

}  // namespace

Network::Network(std::vector<Bus> buses, std::vector<Line> lines, double base_mva)
    : buses_(std::move(buses)), lines_(std::move(lines)), base_mva_(base_mva) {
  const long n = bus_count();
  if (n == 0) throw std::runtime_error("network has no buses");

  // ids must be exactly {1..N}; buses are kept in id order
  std::sort(buses_.begin(), buses_.end(),
            [](const Bus& a, const Bus& b) { return a.id < b.id; });
  for (long i = 0; i < n; ++i) {
    if (buses_[static_cast<std::size_t>(i)].id != i + 1)
      throw std::runtime_error("bus ids must form a contiguous 1..N sequence");
  }

  long slack_count = 0;
  for (long i = 0; i < n; ++i) {
    if (buses_[static_cast<std::size_t>(i)].kind == BusKind::Slack) {
      slack_index_ = i;
      ++slack_count;
    }
  }
  if (slack_count != 1)
    throw std::runtime_error("network must have exactly one slack bus, found " +
                             std::to_string(slack_count));

  for (const Line& l : lines_) {
    if (l.from == l.to)
      throw std::runtime_error("line endpoints coincide at bus " + std::to_string(l.from));
    if (l.from < 1 || l.from > n || l.to < 1 || l.to > n)
      throw std::runtime_error("line references unknown bus");
    if (l.g == 0.0 && l.b == 0.0)
      throw std::runtime_error("line " + std::to_string(l.from) + "-" +
                               std::to_string(l.to) + " has zero series admittance");
  }

  // connectivity (BFS over lines)
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<long> queue{0};
  seen[0] = 1;
  while (!queue.empty()) {
    long u = queue.back();
    queue.pop_back();
    for (const Line& l : lines_) {
      long a = l.from - 1, b = l.to - 1;
      if (a == u && !seen[static_cast<std::size_t>(b)]) {
        seen[static_cast<std::size_t>(b)] = 1;
        queue.push_back(b);
      } else if (b == u && !seen[static_cast<std::size_t>(a)]) {
        seen[static_cast<std::size_t>(a)] = 1;
        queue.push_back(a);
      }
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw std::runtime_error("network not connected");

  ybus_ = Eigen::MatrixXcd::Zero(n, n);
  for (const Line& l : lines_) {
    const long a = l.from - 1, b = l.to - 1;
    const std::complex<double> y(l.g, l.b);
    const std::complex<double> half_charge(0.0, l.charging / 2.0);
    ybus_(a, a) += y + half_charge;
    ybus_(b, b) += y + half_charge;
    ybus_(a, b) -= y;
    ybus_(b, a) -= y;
  }
  for (long i = 0; i < n; ++i)
    ybus_(i, i) += std::complex<double>(0.0, buses_[static_cast<std::size_t>(i)].shunt_b);
}

long Network::bus_index(int id) const {
  if (id < 1 || id > bus_count())
    throw std::runtime_error("bus id " + std::to_string(id) + " out of range");
  return id - 1;
}

Network Network::load(const std::string& dir) {
  csv::Table bt = csv::read_table(dir + "/buses.csv");
  const std::size_t c_id = bt.column("id");
  const std::size_t c_kind = bt.column("kind");
  const std::size_t c_shunt = bt.column("shunt_b");
  std::vector<Bus> buses;
  buses.reserve(bt.rows.size());
  for (std::size_t r = 0; r < bt.rows.size(); ++r) {
    Bus b;
    b.id = static_cast<int>(bt.integer(r, c_id));
    b.kind = parse_kind(bt.rows[r][c_kind]);
    b.shunt_b = bt.num(r, c_shunt);
    buses.push_back(b);
  }

  csv::Table lt = csv::read_table(dir + "/lines.csv");
  const std::size_t c_from = lt.column("from");
  const std::size_t c_to = lt.column("to");
  const std::size_t c_g = lt.column("g");
  const std::size_t c_b = lt.column("b");
  const std::size_t c_ch = lt.column("charging");
  std::vector<Line> lines;
  lines.reserve(lt.rows.size());
  for (std::size_t r = 0; r < lt.rows.size(); ++r) {
    Line l;
    l.from = static_cast<int>(lt.integer(r, c_from));
    l.to = static_cast<int>(lt.integer(r, c_to));
    l.g = lt.num(r, c_g);
    l.b = lt.num(r, c_b);
    l.charging = lt.num(r, c_ch);
    lines.push_back(l);
  }
  return Network(std::move(buses), std::move(lines));
}

void Network::save(const std::string& dir) const {
  {
    csv::Writer w(dir + "/buses.csv");
    w.header({"id", "kind", "shunt_b"});
    for (const Bus& b : buses_) {
      w.cell(static_cast<long>(b.id));
      w.cell(std::string(kind_name(b.kind)));
      w.cell(b.shunt_b);
      w.end_row();
    }
  }
  {
    csv::Writer w(dir + "/lines.csv");
    w.header({"from", "to", "g", "b", "charging"});
    for (const Line& l : lines_) {
      w.cell(static_cast<long>(l.from));
      w.cell(static_cast<long>(l.to));
      w.cell(l.g);
      w.cell(l.b);
      w.cell(l.charging);
      w.end_row();
    }
  }
}

std::pair<double, double> power_injection(const Network& net, const StateVector& v,
                                          int bus_id) {
  const long n = net.bus_index(bus_id);
  const Eigen::VectorXcd vc = v.complex();
  const std::complex<double> current = net.ybus().row(n) * vc;
  const std::complex<double> s = std::conj(vc(n)) * current;
  return {s.real(), s.imag()};
}

std::pair<double, double> line_flow(const Network& net, const StateVector& v,
                                    long line_index, LineEnd end) {
  if (line_index < 0 || line_index >= net.line_count())
    throw std::runtime_error("line index out of range");
  const Line& l = net.lines()[static_cast<std::size_t>(line_index)];
  const long a = net.bus_index(l.from);
  const long b = net.bus_index(l.to);
  const std::complex<double> y(l.g, l.b);
  const std::complex<double> half_charge(0.0, l.charging / 2.0);
  const std::complex<double> va(v.vr(a), v.vi(a));
  const std::complex<double> vb(v.vr(b), v.vi(b));
  std::complex<double> s;
  if (end == LineEnd::Forward) {
    s = std::conj(va) * (y * (va - vb) + half_charge * va);
  } else {
    s = std::conj(vb) * (y * (vb - va) + half_charge * vb);
  }
  return {s.real(), s.imag()};
}

}  // namespace gridse
