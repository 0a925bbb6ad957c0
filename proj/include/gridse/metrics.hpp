#pragma once

#include <Eigen/Dense>
#include <vector>

namespace gridse {

/// Two error figures over a batch of (prediction, truth) vector pairs:
/// nrmse_paper is the mean over samples of ||pred - truth||^2 / N with N
/// the bus count (half the vector length); rmse_true is the conventional
/// root-mean-square error over all entries.
struct MetricReport {
  double nrmse_paper = 0.0;
  double rmse_true = 0.0;
  std::vector<double> per_sample;  // squared norm over N, one per sample
};

MetricReport metric_nrmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

}  // namespace gridse
