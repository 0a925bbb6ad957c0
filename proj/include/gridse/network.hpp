#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <utility>
#include <vector>

namespace gridse {

enum class BusKind { Slack, PV, PQ };

struct Bus {
  int id = 0;           // 1..N
  BusKind kind = BusKind::PQ;
  double shunt_b = 0.0; // per-unit susceptance to ground
};

struct Line {
  int from = 0;
  int to = 0;
  double g = 0.0;        // series conductance, per-unit
  double b = 0.0;        // series susceptance, per-unit
  double charging = 0.0; // total charging susceptance, half per end
};

/// Rectangular bus-voltage state: vr + j*vi per bus, per-unit.
/// The packed 2N layout interleaves components as [vr_1, vi_1, vr_2, ...].
struct StateVector {
  Eigen::VectorXd vr;
  Eigen::VectorXd vi;

  long buses() const { return vr.size(); }

  static StateVector flat(long n) {
    StateVector s;
    s.vr = Eigen::VectorXd::Ones(n);
    s.vi = Eigen::VectorXd::Zero(n);
    return s;
  }

  Eigen::VectorXd packed() const {
    Eigen::VectorXd x(2 * vr.size());
    for (long n = 0; n < vr.size(); ++n) {
      x(2 * n) = vr(n);
      x(2 * n + 1) = vi(n);
    }
    return x;
  }

  static StateVector from_packed(const Eigen::VectorXd& x) {
    StateVector s;
    const long n = x.size() / 2;
    s.vr.resize(n);
    s.vi.resize(n);
    for (long k = 0; k < n; ++k) {
      s.vr(k) = x(2 * k);
      s.vi(k) = x(2 * k + 1);
    }
    return s;
  }

  Eigen::VectorXcd complex() const {
    Eigen::VectorXcd v(vr.size());
    for (long n = 0; n < vr.size(); ++n) v(n) = {vr(n), vi(n)};
    return v;
  }
};

/// The power network graph. Immutable after construction; construction
/// validates the invariants (single slack, contiguous ids, connectivity)
/// and throws std::runtime_error on violation.
class Network {
 public:
  Network(std::vector<Bus> buses, std::vector<Line> lines, double base_mva = 100.0);

  long bus_count() const { return static_cast<long>(buses_.size()); }
  long line_count() const { return static_cast<long>(lines_.size()); }
  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Line>& lines() const { return lines_; }
  double base_mva() const { return base_mva_; }

  /// 0-based index of the bus with the given 1-based id.
  long bus_index(int id) const;
  long slack_index() const { return slack_index_; }

  const Eigen::MatrixXcd& ybus() const { return ybus_; }

  /// Loads buses.csv + lines.csv from a directory.
  static Network load(const std::string& dir);
  void save(const std::string& dir) const;

 private:
  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  double base_mva_;
  long slack_index_ = -1;
  Eigen::MatrixXcd ybus_;
};

enum class LineEnd { Forward, Terminal };

/// Complex power convention used throughout: (P, Q) = (Re, Im) of
/// conj(V) * I with I flowing from the bus into the network, so a shunt
/// +jb at a bus with |V| = 1 reads Q = +b.
std::pair<double, double> power_injection(const Network& net, const StateVector& v,
                                          int bus_id);

/// Pi-model branch power at the requested end; Forward is the `from` bus.
std::pair<double, double> line_flow(const Network& net, const StateVector& v,
                                    long line_index, LineEnd end);

}  // namespace gridse
