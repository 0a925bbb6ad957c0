#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridse/data.hpp"
#include "gridse/metrics.hpp"
#include "gridse/nn/model.hpp"

namespace gridse {

/// Two Conv1D hidden layers with equal filter counts and ReLU, then a
/// linear dense output of width 2N.
struct CnnEstimatorSpec {
  long n_neurons = 215;  // filters in both hidden layers
  long input_len = 0;    // M
  long output_len = 0;   // 2N
  long kernel = 3;
  long epochs = 0;
  long batch_size = 32;
  double lr = 1e-3;
};

nn::Sequential build_cnn_estimator(const CnnEstimatorSpec& spec);
long cnn_parameter_count(const CnnEstimatorSpec& spec);

/// Glorot init from the run seed; shuffling and dropout during training
/// derive from the same seed so a run is one deterministic function of it.
void init_model(nn::Sequential& model, std::uint64_t seed);

struct EpochRecord {
  long epoch = 0;
  double train_mae = 0.0;
  double val_nrmse = 0.0;  // paper convention, denormalized values
  double seconds = 0.0;    // cumulative wall clock (non-deterministic)
};

/// Mini-batch Adam on MAE over a normalized SplitDataset. Validation NRMSE
/// is computed on denormalized values after every epoch. Aborts with the
/// epoch index if the loss goes non-finite.
std::vector<EpochRecord> train_estimator(nn::Sequential& model, const SplitDataset& data,
                                         const ScalingInfo& scaling,
                                         const CnnEstimatorSpec& spec,
                                         std::uint64_t seed);

/// Raw measurement vector in, denormalized state out.
StateVector estimate(nn::Sequential& model, const Eigen::VectorXd& z_raw,
                     const ScalingInfo& scaling, LabelConvention convention);

/// Batched inference on already-normalized inputs; rows are normalized
/// label predictions.
Eigen::MatrixXd predict_normalized(nn::Sequential& model, const Eigen::MatrixXd& inputs);

/// Unweighted k-nearest-neighbour regression under Euclidean distance on
/// the normalized inputs; distance ties break toward the lower train index.
Eigen::VectorXd knn_estimate(const Eigen::MatrixXd& train_inputs,
                             const Eigen::MatrixXd& train_labels,
                             const Eigen::VectorXd& query, long k);

struct NeuronSweepRow {
  long n_neurons = 0;
  double nrmse = 0.0;
};

struct EpochSweepRow {
  long epochs = 0;
  long n_neurons = 0;
  double nrmse = 0.0;
  double seconds = 0.0;
};

struct KSweepRow {
  long k = 0;
  double nrmse = 0.0;
  bool valid = false;
  std::string note;
};

/// Hidden-layer width grid; 185..230 step 5 plus the label width.
std::vector<long> default_neuron_values(long output_len);
std::vector<long> default_epoch_values();  // 200..700 step 50
std::vector<long> default_k_values();      // 0..9

std::vector<NeuronSweepRow> sweep_neurons(const std::vector<long>& values,
                                          const SplitDataset& data,
                                          const ScalingInfo& scaling,
                                          CnnEstimatorSpec base, std::uint64_t seed);

std::vector<EpochSweepRow> sweep_epochs(const std::vector<long>& epoch_values,
                                        const std::vector<long>& neuron_values,
                                        const SplitDataset& data,
                                        const ScalingInfo& scaling, CnnEstimatorSpec base,
                                        std::uint64_t seed);

std::vector<KSweepRow> sweep_k(const std::vector<long>& k_values,
                               const SplitDataset& data, const ScalingInfo& scaling);

/// Validation NRMSE of the model on a normalized split, denormalized.
double validation_nrmse(nn::Sequential& model, const SplitDataset& data,
                        const ScalingInfo& scaling);

}  // namespace gridse
