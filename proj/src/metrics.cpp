#include "gridse/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace gridse {

MetricReport metric_nrmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw std::runtime_error("metric_nrmse: shape mismatch");
  if (pred.rows() == 0 || pred.cols() == 0)
    throw std::runtime_error("metric_nrmse: empty input");

  MetricReport rep;
  const double n_buses = static_cast<double>(pred.cols()) / 2.0;
  double sq_total = 0.0;
  rep.per_sample.reserve(static_cast<std::size_t>(pred.rows()));
  for (long r = 0; r < pred.rows(); ++r) {
    const double sq = (pred.row(r) - truth.row(r)).squaredNorm();
    rep.per_sample.push_back(sq / n_buses);
    rep.nrmse_paper += sq / n_buses;
    sq_total += sq;
  }
  rep.nrmse_paper /= static_cast<double>(pred.rows());
  rep.rmse_true = std::sqrt(sq_total / static_cast<double>(pred.rows() * pred.cols()));
  return rep;
}

}  // namespace gridse
