#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridse/measurement.hpp"
#include "gridse/network.hpp"

namespace gridse {

/// Per-slot demand at PQ buses plus setpoint/injection series at PV buses.
/// Demands are consumption (positive = load); the solver converts them to
/// the library's injection convention internally.
struct LoadScenario {
  long T = 0;
  std::vector<int> pq_buses;     // ids
  Eigen::MatrixXd p_demand;      // T x n_pq, per-unit
  Eigen::MatrixXd q_demand;      // T x n_pq
  std::vector<int> pv_buses;     // ids
  Eigen::MatrixXd pv_injection;  // T x n_pv, active power injected
  Eigen::MatrixXd pv_setpoint;   // T x n_pv, |V| setpoints
  double slack_voltage = 1.0;
};

struct PowerFlowOptions {
  double tol = 1e-10;  // infinity norm of the power mismatch
  int max_iter = 20;
};

class PowerFlowError : public std::runtime_error {
 public:
  PowerFlowError(const std::string& what, double mismatch, int iterations)
      : std::runtime_error(what), mismatch(mismatch), iterations(iterations) {}
  double mismatch;
  int iterations;
};

/// Specified injections for a single slot, already in the library power
/// convention: p at every non-slack bus, q at PQ buses, |V| at PV + slack.
struct InjectionTargets {
  Eigen::VectorXd p;     // size N, ignored at slack
  Eigen::VectorXd q;     // size N, used at PQ buses only
  Eigen::VectorXd vset;  // size N, used at PV + slack buses
};

InjectionTargets targets_for_slot(const Network& net, const LoadScenario& sc, long t);

/// Newton-Raphson in polar coordinates from a flat start; the result is
/// converted to the rectangular StateVector. Throws PowerFlowError with the
/// final mismatch norm if max_iter is exhausted or the iteration leaves the
/// numeric range.
StateVector solve_powerflow(const Network& net, const InjectionTargets& targets,
                            const PowerFlowOptions& opts = {},
                            std::vector<double>* mismatch_trace = nullptr);

struct TimeSeriesData {
  std::vector<StateVector> states;
  std::vector<MeasurementSet> measurements;
};

/// Solves every slot of the scenario and simulates its measurements with a
/// per-slot derived seed, so results do not depend on evaluation order.
TimeSeriesData generate_timeseries(const Network& net, const LoadScenario& sc,
                                   const std::vector<MeasurementSpec>& plan,
                                   std::uint64_t seed, bool with_noise = true,
                                   const PowerFlowOptions& opts = {});

/// Closed-form demand profiles: `constant`; `daily_sine`, a 24-slot period
/// with +/-20% amplitude; `daily_sine_noisy`, the same plus seeded 2%
/// multiplicative uniform noise per entry. Base demand per PQ bus n is
/// 0.2 * (1 + 0.25 * ((n - 1) mod 3)) at 0.35 power-factor ratio; PV buses
/// inject half of total demand split evenly at |V| = 1.02.
LoadScenario builtin_scenario(const std::string& name, const Network& net, long T,
                              std::uint64_t seed);

/// Scenario CSV rows (t, bus_id, P_demand, Q_demand) cover PQ buses; PV
/// series are filled with the builtin defaults.
LoadScenario load_scenario(const std::string& path, const Network& net);
void save_scenario(const std::string& path, const LoadScenario& sc);

}  // namespace gridse
