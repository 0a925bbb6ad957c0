#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gridse/data.hpp"
#include "gridse/nn/cells.hpp"
#include "gridse/nn/layers.hpp"
#include "gridse/psse.hpp"

namespace gridse {

/// Sliding one-step-ahead windows over a state series: window i is rows
/// [i, i+r) and its target is row i+r.
struct WindowedDataset {
  Eigen::MatrixXd series;  // T x 2N
  long r = 10;

  long count() const { return series.rows() - r; }
  Eigen::MatrixXd window(long i) const { return series.middleRows(i, r); }
  Eigen::VectorXd target(long i) const { return series.row(i + r).transpose(); }
};

WindowedDataset make_windows(const Eigen::MatrixXd& series, long r);

struct ForecastSpec {
  std::string name = "simple_rnn_fase";
  long hidden = 32;
  long depth = 2;        // stacked variants only
  double dropout = 0.2;  // tdist variant only
  long epochs = 200;
  long batch_size = 32;
  double lr = 1e-3;
  long r = 10;
};

/// Registry names in report order; the *_plnet_* entries are reconstructions
/// (their exact source structures are not published) and are flagged as such
/// in every report.
const std::vector<std::string>& forecaster_registry();
bool forecaster_reconstructed(const std::string& name);

/// A stack of sequence stages (recurrent cells, per-step dense maps,
/// per-step dropout) unrolled over an r-step window, with an affine output
/// map of the final hidden state. Gradients flow by backpropagation through
/// time over the full window.
class Forecaster {
 public:
  Forecaster(const ForecastSpec& spec, long state_dim);

  const ForecastSpec& spec() const { return spec_; }
  long state_dim() const { return state_dim_; }

  void init_params(Rng& rng);
  std::vector<nn::Tensor*> parameters();
  std::vector<nn::Tensor*> gradients();
  void zero_grad();
  long parameter_count();

  /// windows (B, r, 2N) -> forecasts (B, 2N)
  nn::Tensor forward(const nn::Tensor& windows, nn::Mode mode, Rng* rng);
  void backward(const nn::Tensor& dy);

  void save(const std::string& path) const;
  static Forecaster load(const std::string& path);

  struct Stage;

 private:
  ForecastSpec spec_;
  long state_dim_;
  std::vector<std::unique_ptr<Stage>> stages_;
  std::unique_ptr<nn::Dense> output_;  // affine, no activation

  void build();
};

Forecaster build_forecaster(const ForecastSpec& spec, long state_dim);

std::vector<EpochRecord> train_forecaster(Forecaster& model, const WindowedDataset& wd,
                                          const ScalingInfo& scaling,
                                          std::uint64_t seed);

/// window (r, 2N) normalized rows -> denormalized next state row.
Eigen::VectorXd forecast_one_step(Forecaster& model, const Eigen::MatrixXd& window,
                                  const ScalingInfo& scaling);

/// The trivial baseline: tomorrow equals today.
Eigen::VectorXd persistence_baseline(const Eigen::MatrixXd& window);

struct ForecastEvalRow {
  std::string name;
  double nrmse = 0.0;
  bool reconstructed = false;
  bool ok = true;
  std::string error;
};

struct ForecastPlotData {
  long slot = 0;  // series index of the plotted target
  Eigen::VectorXd truth_mag, forecast_mag;
  Eigen::VectorXd truth_ang, forecast_ang;
};

struct ForecastEvaluation {
  std::vector<ForecastEvalRow> rows;  // registry order, then persistence
  std::vector<ForecastPlotData> plots;  // parallel to rows
};

/// Trains every requested registry model on the chronological 80% of the
/// windows, reports validation NRMSE (denormalized) per model plus the
/// persistence baseline, and captures per-bus magnitude/angle plot data at
/// the requested slot. A failing model yields a flagged row, not an abort.
ForecastEvaluation evaluate_forecasters(const std::vector<std::string>& names,
                                        const Eigen::MatrixXd& series_normalized,
                                        const ScalingInfo& scaling,
                                        LabelConvention convention,
                                        const ForecastSpec& base, std::uint64_t seed,
                                        long plot_slot = 200);

}  // namespace gridse
