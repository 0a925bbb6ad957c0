#include "gridse/estimators.hpp"

#include <algorithm>
#include <cmath>

namespace gridse {

namespace {

// Both solvers work in the reduced space with the slack imaginary
// component eliminated; these map between full 2N and reduced 2N-1.
struct ReducedSpace {
  long dim_full;
  long pinned;

  Eigen::VectorXd reduce(const Eigen::VectorXd& x) const {
    Eigen::VectorXd r(dim_full - 1);
    long c = 0;
    for (long i = 0; i < dim_full; ++i)
      if (i != pinned) r(c++) = x(i);
    return r;
  }

  Eigen::VectorXd expand(const Eigen::VectorXd& r) const {
    Eigen::VectorXd x(dim_full);
    long c = 0;
    for (long i = 0; i < dim_full; ++i) x(i) = i == pinned ? 0.0 : r(c++);
    return x;
  }
};

Eigen::VectorXd initial_state(const Network& net, const EstimatorOptions& opts) {
  if (opts.init) {
    Eigen::VectorXd x = opts.init->packed();
    x(2 * net.slack_index() + 1) = 0.0;  // estimators live in the pinned gauge
    return x;
  }
  return StateVector::flat(net.bus_count()).packed();
}

Eigen::VectorXd residual_vector(const MeasurementSet& ms,
                                const std::vector<QuadraticForm>& forms,
                                const Eigen::VectorXd& x) {
  Eigen::VectorXd r(ms.size());
  for (long m = 0; m < ms.size(); ++m)
    r(m) = ms.z(m) - forms[static_cast<std::size_t>(m)].evaluate(x);
  return r;
}

void check_sizes(const MeasurementSet& ms, const std::vector<QuadraticForm>& forms) {
  if (ms.size() == 0) throw std::runtime_error("estimator: empty measurement set");
  if (static_cast<std::size_t>(ms.size()) != forms.size())
    throw std::runtime_error("estimator: measurement/form count mismatch");
}

}  // namespace

EstimateReport wls_gauss_newton(const MeasurementSet& ms,
                                const std::vector<QuadraticForm>& forms,
                                const Network& net, const EstimatorOptions& opts) {
  check_sizes(ms, forms);
  const long m_count = ms.size();
  const ReducedSpace rs{2 * net.bus_count(), 2 * net.slack_index() + 1};

  Eigen::VectorXd x = initial_state(net, opts);
  auto objective = [&](const Eigen::VectorXd& xx) {
    double acc = 0.0;
    for (long m = 0; m < m_count; ++m) {
      const double r = ms.z(m) - forms[static_cast<std::size_t>(m)].evaluate(xx);
      const double s = ms.specs[static_cast<std::size_t>(m)].sigma;
      acc += (r / s) * (r / s);
    }
    return acc;
  };

  EstimateReport rep;
  double obj = objective(x);
  rep.objective_trace.push_back(obj);

  Eigen::MatrixXd jac(m_count, rs.dim_full - 1);
  Eigen::VectorXd rhs(m_count);
  for (int it = 0; it < opts.max_outer; ++it) {
    for (long m = 0; m < m_count; ++m) {
      const QuadraticForm& f = forms[static_cast<std::size_t>(m)];
      const double s = ms.specs[static_cast<std::size_t>(m)].sigma;
      jac.row(m) = rs.reduce(f.gradient(x)) / s;
      rhs(m) = (ms.z(m) - f.evaluate(x)) / s;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac);
    if (qr.rank() < rs.dim_full - 1)
      throw std::runtime_error("unobservable or degenerate");
    const Eigen::VectorXd dir = qr.solve(rhs);

    // step halving until the objective does not increase
    double alpha = 1.0;
    Eigen::VectorXd x_new;
    double obj_new = obj;
    for (int h = 0; h <= 20; ++h) {
      x_new = x + alpha * rs.expand(dir);
      obj_new = objective(x_new);
      if (obj_new <= obj) break;
      alpha /= 2.0;
    }
    const double step_norm = (alpha * dir).lpNorm<Eigen::Infinity>();
    rep.iterations = it + 1;
    if (obj_new <= obj) {
      x = x_new;
      obj = obj_new;
      rep.objective_trace.push_back(obj);
    }
    if (step_norm < opts.tol) {
      rep.converged = true;
      break;
    }
  }

  rep.v_hat = StateVector::from_packed(x);
  rep.residuals = residual_vector(ms, forms, x);
  return rep;
}

EstimateReport lav_prox_linear(const MeasurementSet& ms,
                               const std::vector<QuadraticForm>& forms,
                               const Network& net, const EstimatorOptions& opts) {
  check_sizes(ms, forms);
  const long m_count = ms.size();
  const double inv_m = 1.0 / static_cast<double>(m_count);
  const ReducedSpace rs{2 * net.bus_count(), 2 * net.slack_index() + 1};
  const long rdim = rs.dim_full - 1;

  Eigen::VectorXd x = initial_state(net, opts);
  auto objective = [&](const Eigen::VectorXd& xx) {
    double acc = 0.0;
    for (long m = 0; m < m_count; ++m)
      acc += std::abs(ms.z(m) - forms[static_cast<std::size_t>(m)].evaluate(xx));
    return acc * inv_m;
  };

  EstimateReport rep;
  double obj = objective(x);
  rep.objective_trace.push_back(obj);

  // Linearized residual of measurement m at x + d is rho_m - g_m'd.
  Eigen::MatrixXd grads(m_count, rdim);
  Eigen::VectorXd rho(m_count);

  for (int it = 0; it < opts.max_outer; ++it) {
    for (long m = 0; m < m_count; ++m) {
      const QuadraticForm& f = forms[static_cast<std::size_t>(m)];
      grads.row(m) = rs.reduce(f.gradient(x));
      rho(m) = ms.z(m) - f.evaluate(x);
    }

    double mu = opts.prox_mu;
    bool accepted = false;
    Eigen::VectorXd d = Eigen::VectorXd::Zero(rdim);
    for (int h = 0; h <= 20 && !accepted; ++h) {
      // inner IRLS on (1/M) sum w_m (rho_m - g'd)^2 + (1/2mu)||d||^2
      d.setZero();
      for (int inner = 0; inner < opts.irls_max; ++inner) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(rdim, rdim) / mu;
        Eigen::VectorXd b = Eigen::VectorXd::Zero(rdim);
        for (long m = 0; m < m_count; ++m) {
          const double c = rho(m) - grads.row(m).dot(d);
          const double w = 1.0 / std::max(std::abs(c), opts.irls_eps);
          a.noalias() += (2.0 * inv_m * w) * grads.row(m).transpose() * grads.row(m);
          b.noalias() += (2.0 * inv_m * w * rho(m)) * grads.row(m).transpose();
        }
        const Eigen::VectorXd d_new = a.llt().solve(b);
        const double change = (d_new - d).lpNorm<Eigen::Infinity>();
        d = d_new;
        if (change < 0.1 * opts.tol) break;
      }

      const Eigen::VectorXd x_try = x + rs.expand(d);
      const double obj_try = objective(x_try);
      if (obj_try <= obj) {
        x = x_try;
        obj = obj_try;
        accepted = true;
      } else {
        mu /= 2.0;
      }
    }

    rep.iterations = it + 1;
    if (accepted) rep.objective_trace.push_back(obj);
    const double step_norm = accepted ? d.lpNorm<Eigen::Infinity>() : 0.0;
    if (!accepted || step_norm < opts.tol) {
      rep.converged = accepted || step_norm < opts.tol;
      break;
    }
  }

  rep.v_hat = StateVector::from_packed(x);
  rep.residuals = residual_vector(ms, forms, x);
  return rep;
}

BadDataResult bad_data_loop(const MeasurementSet& ms,
                            const std::vector<QuadraticForm>& forms, const Network& net,
                            const EstimatorOptions& opts) {
  check_sizes(ms, forms);
  std::vector<long> active(static_cast<std::size_t>(ms.size()));
  for (long m = 0; m < ms.size(); ++m) active[static_cast<std::size_t>(m)] = m;

  BadDataResult result;
  while (true) {
    MeasurementSet sub;
    sub.t = ms.t;
    std::vector<QuadraticForm> sub_forms;
    sub.z.resize(static_cast<long>(active.size()));
    for (std::size_t i = 0; i < active.size(); ++i) {
      sub.specs.push_back(ms.specs[static_cast<std::size_t>(active[i])]);
      sub.z(static_cast<long>(i)) = ms.z(active[i]);
      sub_forms.push_back(forms[static_cast<std::size_t>(active[i])]);
    }

    result.report = wls_gauss_newton(sub, sub_forms, net, opts);

    long worst = -1;
    double worst_ratio = 0.0;
    std::vector<long> gross;
    for (std::size_t i = 0; i < active.size(); ++i) {
      const double r = result.report.residuals(static_cast<long>(i));
      const double s = sub.specs[i].sigma;
      if (classify_error(r, s) != ErrorClass::Normal) {
        gross.push_back(active[i]);
        const double ratio = std::abs(r) / s;
        if (ratio > worst_ratio) {
          worst_ratio = ratio;
          worst = static_cast<long>(i);
        }
      }
    }
    if (gross.empty()) break;

    std::vector<MeasurementSpec> remaining;
    for (std::size_t i = 0; i < active.size(); ++i)
      if (static_cast<long>(i) != worst)
        remaining.push_back(ms.specs[static_cast<std::size_t>(active[i])]);
    if (remaining.empty() || !observability_check(net, remaining).observable) {
      result.flagged = gross;
      break;
    }
    result.removed.push_back(active[static_cast<std::size_t>(worst)]);
    active.erase(active.begin() + worst);
  }
  return result;
}

}  // namespace gridse
