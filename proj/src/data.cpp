#include "gridse/data.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "gridse/csv.hpp"
#include "gridse/rng.hpp"

namespace gridse {

std::string convention_name(LabelConvention c) {
  return c == LabelConvention::RectBlocks ? "rect_blocks" : "polar_blocks";
}

LabelConvention convention_from_name(const std::string& s) {
  if (s == "rect_blocks") return LabelConvention::RectBlocks;
  if (s == "polar_blocks") return LabelConvention::PolarBlocks;
  throw std::runtime_error("unknown label convention '" + s + "'");
}

RawDataset load_csv_dataset(const std::string& inputs_path,
                            const std::string& labels_path) {
  RawDataset ds;
  ds.inputs = csv::read_matrix(inputs_path);
  ds.labels = csv::read_matrix(labels_path);
  if (ds.inputs.rows() != ds.labels.rows())
    throw std::runtime_error("dataset: inputs have " + std::to_string(ds.inputs.rows()) +
                             " rows but labels have " + std::to_string(ds.labels.rows()));
  if (ds.labels.cols() % 2 != 0)
    throw std::runtime_error("dataset: label width must be even, got " +
                             std::to_string(ds.labels.cols()));
  return ds;
}

SplitDataset split_80_20(const RawDataset& ds, std::uint64_t seed, SplitMode mode) {
  const long n = ds.size();
  if (n < 5) throw std::runtime_error("dataset too small to split (n < 5)");
  const long n_train = (n * 8) / 10;

  std::vector<long> order(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  if (mode == SplitMode::Shuffled) {
    Rng rng(seed);
    shuffle(order, rng);
  }

  SplitDataset out;
  out.convention = ds.convention;
  out.train_inputs.resize(n_train, ds.inputs.cols());
  out.train_labels.resize(n_train, ds.labels.cols());
  out.valid_inputs.resize(n - n_train, ds.inputs.cols());
  out.valid_labels.resize(n - n_train, ds.labels.cols());
  for (long i = 0; i < n_train; ++i) {
    out.train_inputs.row(i) = ds.inputs.row(order[static_cast<std::size_t>(i)]);
    out.train_labels.row(i) = ds.labels.row(order[static_cast<std::size_t>(i)]);
  }
  for (long i = n_train; i < n; ++i) {
    out.valid_inputs.row(i - n_train) = ds.inputs.row(order[static_cast<std::size_t>(i)]);
    out.valid_labels.row(i - n_train) = ds.labels.row(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

namespace {

BlockScale block_scale(const Eigen::MatrixXd& m, long col0, long cols) {
  const double lo = m.block(0, col0, m.rows(), cols).minCoeff();
  const double hi = m.block(0, col0, m.rows(), cols).maxCoeff();
  if (hi == lo) return {lo, 1.0};  // degenerate rule: constant block maps to 0
  return {lo, hi - lo};
}

void apply_block(Eigen::MatrixXd& m, long col0, long cols, const BlockScale& s) {
  m.block(0, col0, m.rows(), cols) =
      (m.block(0, col0, m.rows(), cols).array() - s.offset) / s.scale;
}

}  // namespace

ScalingInfo normalize(SplitDataset& ds) {
  ScalingInfo info;
  const long n_lab = ds.train_labels.cols();
  const long half = n_lab / 2;
  info.voltage_block = block_scale(ds.train_labels, 0, half);
  info.angle_block = block_scale(ds.train_labels, half, n_lab - half);
  apply_block(ds.train_labels, 0, half, info.voltage_block);
  apply_block(ds.train_labels, half, n_lab - half, info.angle_block);
  apply_block(ds.valid_labels, 0, half, info.voltage_block);
  apply_block(ds.valid_labels, half, n_lab - half, info.angle_block);

  const long m = ds.train_inputs.cols();
  info.input_mean.resize(m);
  info.input_std.resize(m);
  for (long c = 0; c < m; ++c) {
    const double mean = ds.train_inputs.col(c).mean();
    const double var = (ds.train_inputs.col(c).array() - mean).square().mean();
    const double sd = std::sqrt(var);
    info.input_mean(c) = mean;
    info.input_std(c) = sd > 0.0 ? sd : 1.0;
  }
  for (long c = 0; c < m; ++c) {
    ds.train_inputs.col(c) =
        (ds.train_inputs.col(c).array() - info.input_mean(c)) / info.input_std(c);
    ds.valid_inputs.col(c) =
        (ds.valid_inputs.col(c).array() - info.input_mean(c)) / info.input_std(c);
  }
  return info;
}

Eigen::MatrixXd denormalize_labels(const Eigen::MatrixXd& rows, const ScalingInfo& info) {
  Eigen::MatrixXd out = rows;
  const long half = rows.cols() / 2;
  out.block(0, 0, out.rows(), half) =
      out.block(0, 0, out.rows(), half).array() * info.voltage_block.scale +
      info.voltage_block.offset;
  out.block(0, half, out.rows(), rows.cols() - half) =
      out.block(0, half, out.rows(), rows.cols() - half).array() * info.angle_block.scale +
      info.angle_block.offset;
  return out;
}

Eigen::VectorXd denormalize_label_row(const Eigen::VectorXd& row, const ScalingInfo& info) {
  return denormalize_labels(row.transpose(), info).row(0).transpose();
}

Eigen::VectorXd normalize_label_row(const Eigen::VectorXd& row, const ScalingInfo& info) {
  Eigen::VectorXd out = row;
  const long half = row.size() / 2;
  out.head(half) = (out.head(half).array() - info.voltage_block.offset) /
                   info.voltage_block.scale;
  out.tail(row.size() - half) =
      (out.tail(row.size() - half).array() - info.angle_block.offset) /
      info.angle_block.scale;
  return out;
}

Eigen::VectorXd normalize_input_row(const Eigen::VectorXd& row, const ScalingInfo& info) {
  if (row.size() != info.input_mean.size())
    throw std::runtime_error("normalize_input_row: width mismatch");
  return (row - info.input_mean).cwiseQuotient(info.input_std);
}

nn::Tensor reshape_for_conv(const Eigen::MatrixXd& batch) {
  nn::Tensor t({batch.rows(), batch.cols(), 1});
  for (long r = 0; r < batch.rows(); ++r)
    for (long c = 0; c < batch.cols(); ++c) t(r, c, 0) = batch(r, c);
  return t;
}

Eigen::VectorXd state_to_row(const StateVector& v, LabelConvention c) {
  const long n = v.buses();
  Eigen::VectorXd row(2 * n);
  if (c == LabelConvention::RectBlocks) {
    row.head(n) = v.vr;
    row.tail(n) = v.vi;
  } else {
    for (long i = 0; i < n; ++i) {
      row(i) = std::hypot(v.vr(i), v.vi(i));
      row(n + i) = std::atan2(v.vi(i), v.vr(i));
    }
  }
  return row;
}

StateVector row_to_state(const Eigen::VectorXd& row, LabelConvention c) {
  const long n = row.size() / 2;
  StateVector v;
  v.vr.resize(n);
  v.vi.resize(n);
  if (c == LabelConvention::RectBlocks) {
    v.vr = row.head(n);
    v.vi = row.tail(n);
  } else {
    for (long i = 0; i < n; ++i) {
      v.vr(i) = row(i) * std::cos(row(n + i));
      v.vi(i) = row(i) * std::sin(row(n + i));
    }
  }
  return v;
}

void save_dataset(const std::string& dir, const Eigen::MatrixXd& inputs,
                  const Eigen::MatrixXd& labels, const DatasetMeta& meta) {
  csv::write_matrix(dir + "/inputs.csv", inputs, "z");
  csv::write_matrix(dir + "/labels.csv", labels, "v");
  std::ofstream os(dir + "/meta.txt");
  if (!os) throw std::runtime_error("cannot write '" + dir + "/meta.txt'");
  os << "n=" << inputs.rows() << '\n';
  os << "n_features=" << inputs.cols() << '\n';
  os << "n_labels=" << labels.cols() << '\n';
  os << "convention=" << convention_name(meta.convention) << '\n';
  os << "seed=" << meta.seed << '\n';
  os << "source=" << meta.source << '\n';
  os << "scaling=labels:minmax01-per-block;inputs:standardize-per-feature;train-stats-only\n";
}

DatasetMeta load_dataset_meta(const std::string& dir) {
  std::ifstream is(dir + "/meta.txt");
  if (!is) throw std::runtime_error("cannot open '" + dir + "/meta.txt'");
  DatasetMeta meta;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "convention") meta.convention = convention_from_name(val);
    if (key == "seed") meta.seed = std::strtoull(val.c_str(), nullptr, 10);
    if (key == "source") meta.source = val;
  }
  return meta;
}

RawDataset load_dataset(const std::string& dir) {
  RawDataset ds = load_csv_dataset(dir + "/inputs.csv", dir + "/labels.csv");
  ds.convention = load_dataset_meta(dir).convention;
  return ds;
}

}  // namespace gridse
