#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "gridse/measurement.hpp"
#include "gridse/network.hpp"

namespace gridse {

struct EstimatorOptions {
  int max_outer = 50;
  double tol = 1e-8;      // stop when the accepted step norm falls below
  double prox_mu = 1.0;   // prox-linear step parameter
  double irls_eps = 1e-6; // smoothing floor for the IRLS weights
  int irls_max = 30;
  std::optional<StateVector> init;  // flat start when absent
};

struct EstimateReport {
  StateVector v_hat;
  bool converged = false;
  int iterations = 0;
  Eigen::VectorXd residuals;           // z_m - v' H_m v at the estimate
  std::vector<double> objective_trace; // initial value plus each accepted step
};

/// Gauss-Newton on sum((z_m - v'H_m v)^2 / sigma_m^2) with step halving.
/// The slack bus imaginary component is pinned to zero in both solvers,
/// removing the rotational null space of the quadratic model.
EstimateReport wls_gauss_newton(const MeasurementSet& ms,
                                const std::vector<QuadraticForm>& forms,
                                const Network& net, const EstimatorOptions& opts = {});

/// LAV criterion (1/M) sum |z_m - v'H_m v| solved by prox-linear outer
/// steps with an IRLS inner solver; mu is halved when a step fails to
/// decrease the true objective.
EstimateReport lav_prox_linear(const MeasurementSet& ms,
                               const std::vector<QuadraticForm>& forms,
                               const Network& net, const EstimatorOptions& opts = {});

struct BadDataResult {
  EstimateReport report;
  std::vector<long> removed;  // original indices, removal order
  std::vector<long> flagged;  // still Gross/Extreme when the loop stopped
};

/// Largest-normalized-residual rejection: WLS, classify, drop the worst
/// entry, repeat; stops when residuals are all Normal or the next removal
/// would break observability (that entry is retained and flagged).
BadDataResult bad_data_loop(const MeasurementSet& ms,
                            const std::vector<QuadraticForm>& forms, const Network& net,
                            const EstimatorOptions& opts = {});

}  // namespace gridse
