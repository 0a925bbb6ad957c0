#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gridse/network.hpp"
#include "gridse/nn/tensor.hpp"

namespace gridse {

/// Label row layout: first N columns are one voltage block, last N the
/// other. RectBlocks is [vr | vi] (simulator output); PolarBlocks is
/// [|V| | theta].
enum class LabelConvention { RectBlocks, PolarBlocks };

std::string convention_name(LabelConvention c);
LabelConvention convention_from_name(const std::string& s);

struct DatasetSchema {
  long n_features = 0;
  long n_labels = 0;
  long n_train = 0;
  long n_test = 0;
};

struct RawDataset {
  Eigen::MatrixXd inputs;  // n x M
  Eigen::MatrixXd labels;  // n x 2N
  LabelConvention convention = LabelConvention::RectBlocks;

  long size() const { return inputs.rows(); }
  DatasetSchema schema() const {
    return {inputs.cols(), labels.cols(), 0, 0};
  }
};

enum class SplitMode { Shuffled, Chronological };

struct SplitDataset {
  Eigen::MatrixXd train_inputs, train_labels;
  Eigen::MatrixXd valid_inputs, valid_labels;
  LabelConvention convention = LabelConvention::RectBlocks;
};

/// One affine map per label block; value_norm = (value - offset) / scale.
struct BlockScale {
  double offset = 0.0;
  double scale = 1.0;
};

struct ScalingInfo {
  BlockScale voltage_block;  // label columns [0, N)
  BlockScale angle_block;    // label columns [N, 2N)
  Eigen::VectorXd input_mean, input_std;
  std::string formula =
      "labels:minmax01-per-block;inputs:standardize-per-feature;train-stats-only";
};

RawDataset load_csv_dataset(const std::string& inputs_path,
                            const std::string& labels_path);

/// floor(0.8 n) train rows; shuffled split is seeded, chronological keeps
/// time order with validation strictly after training.
SplitDataset split_80_20(const RawDataset& ds, std::uint64_t seed, SplitMode mode);

/// Scales in place using train-split statistics only. Labels: each block
/// min-max to [0,1]; inputs: per-feature standardization. Zero-range
/// features get scale 1 and offset equal to the constant value.
ScalingInfo normalize(SplitDataset& ds);

Eigen::MatrixXd denormalize_labels(const Eigen::MatrixXd& rows, const ScalingInfo& info);
Eigen::VectorXd denormalize_label_row(const Eigen::VectorXd& row, const ScalingInfo& info);
Eigen::VectorXd normalize_label_row(const Eigen::VectorXd& row, const ScalingInfo& info);
Eigen::VectorXd normalize_input_row(const Eigen::VectorXd& row, const ScalingInfo& info);

/// (B, M) -> (B, M, 1) view for the convolutional front end.
nn::Tensor reshape_for_conv(const Eigen::MatrixXd& batch);

Eigen::VectorXd state_to_row(const StateVector& v, LabelConvention c);
StateVector row_to_state(const Eigen::VectorXd& row, LabelConvention c);

/// Dataset directory: inputs.csv, labels.csv and a key=value meta.txt
/// sidecar recording schema, convention, seed and scaling formula.
struct DatasetMeta {
  LabelConvention convention = LabelConvention::RectBlocks;
  std::uint64_t seed = 0;
  std::string source;  // free-form provenance
};

void save_dataset(const std::string& dir, const Eigen::MatrixXd& inputs,
                  const Eigen::MatrixXd& labels, const DatasetMeta& meta);
RawDataset load_dataset(const std::string& dir);
DatasetMeta load_dataset_meta(const std::string& dir);

}  // namespace gridse
