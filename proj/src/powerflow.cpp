#include "gridse/powerflow.hpp"

#include <cmath>

#include "gridse/csv.hpp"
#include "gridse/rng.hpp"

namespace gridse {

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

struct PolarState {
  Eigen::VectorXd theta;
  Eigen::VectorXd vmag;
};

// Injections in the library convention (see network.hpp):
//   P_n = sum_k V_n V_k (G cos d - B sin d),  d = theta_k - theta_n
//   Q_n = sum_k V_n V_k (G sin d + B cos d)
void polar_injections(const Eigen::MatrixXd& G, const Eigen::MatrixXd& B,
                      const PolarState& st, Eigen::VectorXd& p, Eigen::VectorXd& q) {
  const long n = st.theta.size();
  p.setZero(n);
  q.setZero(n);
  for (long i = 0; i < n; ++i) {
    for (long k = 0; k < n; ++k) {
      if (G(i, k) == 0.0 && B(i, k) == 0.0) continue;
      const double d = st.theta(k) - st.theta(i);
      const double vv = st.vmag(i) * st.vmag(k);
      p(i) += vv * (G(i, k) * std::cos(d) - B(i, k) * std::sin(d));
      q(i) += vv * (G(i, k) * std::sin(d) + B(i, k) * std::cos(d));
    }
  }
}

}  // namespace

InjectionTargets targets_for_slot(const Network& net, const LoadScenario& sc, long t) {
  if (t < 0 || t >= sc.T) throw std::runtime_error("scenario slot out of range");
  const long n = net.bus_count();
  InjectionTargets tg;
  tg.p = Eigen::VectorXd::Zero(n);
  tg.q = Eigen::VectorXd::Zero(n);
  tg.vset = Eigen::VectorXd::Ones(n);
  tg.vset(net.slack_index()) = sc.slack_voltage;
  for (std::size_t j = 0; j < sc.pq_buses.size(); ++j) {
    const long i = net.bus_index(sc.pq_buses[j]);
    // consumption -> injection: P flips sign; Q keeps it under the
    // conj(V)*I convention
    tg.p(i) = -sc.p_demand(t, static_cast<long>(j));
    tg.q(i) = sc.q_demand(t, static_cast<long>(j));
  }
  for (std::size_t j = 0; j < sc.pv_buses.size(); ++j) {
    const long i = net.bus_index(sc.pv_buses[j]);
    tg.p(i) = sc.pv_injection(t, static_cast<long>(j));
    tg.vset(i) = sc.pv_setpoint(t, static_cast<long>(j));
  }
  return tg;
}

StateVector solve_powerflow(const Network& net, const InjectionTargets& targets,
                            const PowerFlowOptions& opts,
                            std::vector<double>* mismatch_trace) {
  const long n = net.bus_count();
  const long slack = net.slack_index();
  const Eigen::MatrixXd G = net.ybus().real();
  const Eigen::MatrixXd B = net.ybus().imag();

  std::vector<long> ang_idx;  // buses with a free angle
  std::vector<long> mag_idx;  // buses with a free magnitude (PQ)
  for (long i = 0; i < n; ++i) {
    if (i == slack) continue;
    ang_idx.push_back(i);
    if (net.buses()[static_cast<std::size_t>(i)].kind == BusKind::PQ)
      mag_idx.push_back(i);
  }
  const long na = static_cast<long>(ang_idx.size());
  const long nm = static_cast<long>(mag_idx.size());
  const long dim = na + nm;

  PolarState st;
  st.theta = Eigen::VectorXd::Zero(n);
  st.vmag = Eigen::VectorXd::Ones(n);
  st.vmag(slack) = targets.vset(slack);
  for (long i = 0; i < n; ++i)
    if (net.buses()[static_cast<std::size_t>(i)].kind == BusKind::PV)
      st.vmag(i) = targets.vset(i);

  Eigen::VectorXd p(n), q(n);
  Eigen::VectorXd mismatch(dim);
  double norm = 0.0;

  auto eval_mismatch = [&]() {
    polar_injections(G, B, st, p, q);
    for (long a = 0; a < na; ++a) mismatch(a) = targets.p(ang_idx[a]) - p(ang_idx[a]);
    for (long m = 0; m < nm; ++m)
      mismatch(na + m) = targets.q(mag_idx[m]) - q(mag_idx[m]);
    norm = dim == 0 ? 0.0 : mismatch.cwiseAbs().maxCoeff();
    if (mismatch_trace) mismatch_trace->push_back(norm);
  };

  eval_mismatch();
  int iter = 0;
  while (norm > opts.tol) {
    if (iter >= opts.max_iter)
      throw PowerFlowError("power flow did not converge after " +
                               std::to_string(opts.max_iter) +
                               " iterations (mismatch " + csv::format_double(norm) + ")",
                           norm, iter);

    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, dim);
    auto fill_row = [&](long row, long i, bool is_q) {
      for (long a = 0; a < na; ++a) {
        const long k = ang_idx[a];
        double v;
        if (k == i) {
          v = is_q ? st.vmag(i) * st.vmag(i) * G(i, i) - p(i)
                   : q(i) - st.vmag(i) * st.vmag(i) * B(i, i);
        } else {
          const double d = st.theta(k) - st.theta(i);
          const double vv = st.vmag(i) * st.vmag(k);
          const double a_ik = G(i, k) * std::cos(d) - B(i, k) * std::sin(d);
          const double b_ik = G(i, k) * std::sin(d) + B(i, k) * std::cos(d);
          v = is_q ? vv * a_ik : -vv * b_ik;
        }
        jac(row, a) = v;
      }
      for (long m = 0; m < nm; ++m) {
        const long k = mag_idx[m];
        double v;
        if (k == i) {
          v = is_q ? st.vmag(i) * B(i, i) + q(i) / st.vmag(i)
                   : st.vmag(i) * G(i, i) + p(i) / st.vmag(i);
        } else {
          const double d = st.theta(k) - st.theta(i);
          const double a_ik = G(i, k) * std::cos(d) - B(i, k) * std::sin(d);
          const double b_ik = G(i, k) * std::sin(d) + B(i, k) * std::cos(d);
          v = is_q ? st.vmag(i) * b_ik : st.vmag(i) * a_ik;
        }
        jac(row, na + m) = v;
      }
    };
    for (long a = 0; a < na; ++a) fill_row(a, ang_idx[a], false);
    for (long m = 0; m < nm; ++m) fill_row(na + m, mag_idx[m], true);

    const Eigen::VectorXd step = jac.partialPivLu().solve(mismatch);
    if (!step.allFinite())
      throw PowerFlowError("power flow diverged (singular Jacobian)", norm, iter);
    for (long a = 0; a < na; ++a) st.theta(ang_idx[a]) += step(a);
    for (long m = 0; m < nm; ++m) st.vmag(mag_idx[m]) += step(na + m);
    if (!st.vmag.allFinite() || !st.theta.allFinite() || st.vmag.minCoeff() <= 0.0)
      throw PowerFlowError("power flow diverged", norm, iter);
    ++iter;
    eval_mismatch();
  }

  StateVector out;
  out.vr = st.vmag.array() * st.theta.array().cos();
  out.vi = st.vmag.array() * st.theta.array().sin();
  return out;
}

TimeSeriesData generate_timeseries(const Network& net, const LoadScenario& sc,
                                   const std::vector<MeasurementSpec>& plan,
                                   std::uint64_t seed, bool with_noise,
                                   const PowerFlowOptions& opts) {
  TimeSeriesData data;
  data.states.reserve(static_cast<std::size_t>(sc.T));
  data.measurements.reserve(static_cast<std::size_t>(sc.T));
  const Rng base(seed);
  for (long t = 0; t < sc.T; ++t) {
    StateVector v;
    try {
      v = solve_powerflow(net, targets_for_slot(net, sc, t), opts);
    } catch (const PowerFlowError& e) {
      throw PowerFlowError("slot " + std::to_string(t) + ": " + e.what(), e.mismatch,
                           e.iterations);
    }
    MeasurementSet ms =
        simulate_measurements(net, v, plan, base.fork(static_cast<std::uint64_t>(t)).seed(),
                              with_noise);
    ms.t = t;
    data.states.push_back(std::move(v));
    data.measurements.push_back(std::move(ms));
  }
  return data;
}

namespace {

double base_demand(int bus_id) { return 0.2 * (1.0 + 0.25 * ((bus_id - 1) % 3)); }

void scenario_skeleton(LoadScenario& sc, const Network& net, long T) {
  sc.T = T;
  for (const Bus& b : net.buses()) {
    if (b.kind == BusKind::PQ) sc.pq_buses.push_back(b.id);
    if (b.kind == BusKind::PV) sc.pv_buses.push_back(b.id);
  }
  sc.p_demand.resize(T, static_cast<long>(sc.pq_buses.size()));
  sc.q_demand.resize(T, static_cast<long>(sc.pq_buses.size()));
  sc.pv_injection.resize(T, static_cast<long>(sc.pv_buses.size()));
  sc.pv_setpoint = Eigen::MatrixXd::Constant(T, static_cast<long>(sc.pv_buses.size()), 1.02);
}

void fill_pv_series(LoadScenario& sc) {
  for (long t = 0; t < sc.T; ++t) {
    const double total = sc.p_demand.row(t).sum();
    const long npv = static_cast<long>(sc.pv_buses.size());
    for (long j = 0; j < npv; ++j) sc.pv_injection(t, j) = 0.5 * total / static_cast<double>(npv);
  }
}

}  // namespace

LoadScenario builtin_scenario(const std::string& name, const Network& net, long T,
                              std::uint64_t seed) {
  if (T < 1) throw std::runtime_error("scenario length must be at least 1");
  if (name != "constant" && name != "daily_sine" && name != "daily_sine_noisy")
    throw std::runtime_error("unknown scenario '" + name + "'");

  LoadScenario sc;
  scenario_skeleton(sc, net, T);
  Rng rng(seed);
  for (long t = 0; t < T; ++t) {
    double factor = 1.0;
    if (name != "constant") factor = 1.0 + 0.2 * std::sin(kTwoPi * static_cast<double>(t) / 24.0);
    for (std::size_t j = 0; j < sc.pq_buses.size(); ++j) {
      double f = factor;
      if (name == "daily_sine_noisy") f *= 1.0 + 0.02 * rng.uniform(-1.0, 1.0);
      const double p = base_demand(sc.pq_buses[j]) * f;
      sc.p_demand(t, static_cast<long>(j)) = p;
      sc.q_demand(t, static_cast<long>(j)) = 0.35 * p;
    }
  }
  fill_pv_series(sc);
  return sc;
}

LoadScenario load_scenario(const std::string& path, const Network& net) {
  csv::Table tab = csv::read_table(path);
  const std::size_t c_t = tab.column("t");
  const std::size_t c_bus = tab.column("bus_id");
  const std::size_t c_p = tab.column("P_demand");
  const std::size_t c_q = tab.column("Q_demand");

  long T = 0;
  for (std::size_t r = 0; r < tab.rows.size(); ++r)
    T = std::max(T, tab.integer(r, c_t) + 1);
  if (T == 0) throw std::runtime_error("scenario file has no rows");

  LoadScenario sc;
  scenario_skeleton(sc, net, T);
  sc.p_demand.setZero();
  sc.q_demand.setZero();

  std::map<int, long> pq_col;
  for (std::size_t j = 0; j < sc.pq_buses.size(); ++j)
    pq_col[sc.pq_buses[j]] = static_cast<long>(j);

  for (std::size_t r = 0; r < tab.rows.size(); ++r) {
    const long t = tab.integer(r, c_t);
    const int bus = static_cast<int>(tab.integer(r, c_bus));
    auto it = pq_col.find(bus);
    if (it == pq_col.end())
      throw std::runtime_error("scenario row " + std::to_string(r + 2) +
                               ": bus " + std::to_string(bus) + " is not a PQ bus");
    sc.p_demand(t, it->second) = tab.num(r, c_p);
    sc.q_demand(t, it->second) = tab.num(r, c_q);
  }
  fill_pv_series(sc);
  return sc;
}

void save_scenario(const std::string& path, const LoadScenario& sc) {
  csv::Writer w(path);
  w.header({"t", "bus_id", "P_demand", "Q_demand"});
  for (long t = 0; t < sc.T; ++t) {
    for (std::size_t j = 0; j < sc.pq_buses.size(); ++j) {
      w.cell(t);
      w.cell(static_cast<long>(sc.pq_buses[j]));
      w.cell(sc.p_demand(t, static_cast<long>(j)));
      w.cell(sc.q_demand(t, static_cast<long>(j)));
      w.end_row();
    }
  }
}

}  // namespace gridse
