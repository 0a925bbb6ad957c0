#include "gridse/psse.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "gridse/nn/optim.hpp"

namespace gridse {

using nn::Mode;
using nn::Tensor;

nn::Sequential build_cnn_estimator(const CnnEstimatorSpec& spec) {
  if (spec.n_neurons < 1 || spec.input_len < 1 || spec.output_len < 2 ||
      spec.output_len % 2 != 0)
    throw std::runtime_error("invalid CNN estimator spec");
  nn::Sequential model;
  model.add(std::make_unique<nn::Conv1d>(1, spec.n_neurons, spec.kernel));
  model.add(std::make_unique<nn::Relu>());
  model.add(std::make_unique<nn::Conv1d>(spec.n_neurons, spec.n_neurons, spec.kernel));
  model.add(std::make_unique<nn::Relu>());
  model.add(std::make_unique<nn::Flatten>());
  model.add(std::make_unique<nn::Dense>(spec.input_len * spec.n_neurons, spec.output_len,
                                        nn::Activation::None));
  return model;
}

long cnn_parameter_count(const CnnEstimatorSpec& spec) {
  const long conv1 = spec.n_neurons * spec.kernel * 1 + spec.n_neurons;
  const long conv2 = spec.n_neurons * spec.kernel * spec.n_neurons + spec.n_neurons;
  const long dense =
      spec.input_len * spec.n_neurons * spec.output_len + spec.output_len;
  return conv1 + conv2 + dense;
}

void init_model(nn::Sequential& model, std::uint64_t seed) {
  Rng rng = Rng(seed).fork(0);
  model.init_params(rng);
}

Eigen::MatrixXd predict_normalized(nn::Sequential& model, const Eigen::MatrixXd& inputs) {
  Eigen::MatrixXd out;
  const long n = inputs.rows();
  constexpr long kChunk = 256;
  for (long start = 0; start < n; start += kChunk) {
    const long count = std::min(kChunk, n - start);
    Tensor x = reshape_for_conv(inputs.middleRows(start, count));
    Tensor y = model.forward(x, Mode::Infer, nullptr);
    if (out.size() == 0) out.resize(n, y.shape[1]);
    for (long r = 0; r < count; ++r)
      for (long c = 0; c < y.shape[1]; ++c) out(start + r, c) = y(r, c);
  }
  return out;
}

double validation_nrmse(nn::Sequential& model, const SplitDataset& data,
                        const ScalingInfo& scaling) {
  const Eigen::MatrixXd pred = predict_normalized(model, data.valid_inputs);
  return metric_nrmse(denormalize_labels(pred, scaling),
                      denormalize_labels(data.valid_labels, scaling))
      .nrmse_paper;
}

std::vector<EpochRecord> train_estimator(nn::Sequential& model, const SplitDataset& data,
                                         const ScalingInfo& scaling,
                                         const CnnEstimatorSpec& spec,
                                         std::uint64_t seed) {
  const long n = data.train_inputs.rows();
  if (n == 0) throw std::runtime_error("train_estimator: empty training split");
  Rng rng = Rng(seed).fork(1);

  nn::AdamState adam;
  adam.lr = spec.lr;
  adam.init_like(model.parameters());

  std::vector<long> order(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  std::vector<EpochRecord> history;
  const auto t0 = std::chrono::steady_clock::now();
  for (long epoch = 0; epoch < spec.epochs; ++epoch) {
    shuffle(order, rng);
    double mae_sum = 0.0;
    long batches = 0;
    for (long start = 0; start < n; start += spec.batch_size) {
      const long count = std::min(spec.batch_size, n - start);
      Eigen::MatrixXd bin(count, data.train_inputs.cols());
      Tensor target({count, data.train_labels.cols()});
      for (long r = 0; r < count; ++r) {
        const long src = order[static_cast<std::size_t>(start + r)];
        bin.row(r) = data.train_inputs.row(src);
        for (long c = 0; c < data.train_labels.cols(); ++c)
          target(r, c) = data.train_labels(src, c);
      }
      Tensor x = reshape_for_conv(bin);
      model.zero_grad();
      Tensor y = model.forward(x, Mode::Train, &rng);
      nn::LossResult l = nn::loss(nn::LossKind::MAE, y, target);
      if (!std::isfinite(l.value))
        throw std::runtime_error("training diverged (non-finite loss) at epoch " +
                                 std::to_string(epoch));
      model.backward(l.grad);
      adam_step(model.parameters(), model.gradients(), adam);
      mae_sum += l.value;
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mae = mae_sum / static_cast<double>(batches);
    rec.val_nrmse = validation_nrmse(model, data, scaling);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(rec);
  }
  return history;
}

StateVector estimate(nn::Sequential& model, const Eigen::VectorXd& z_raw,
                     const ScalingInfo& scaling, LabelConvention convention) {
  const Eigen::VectorXd z = normalize_input_row(z_raw, scaling);
  Eigen::MatrixXd one(1, z.size());
  one.row(0) = z;
  const Eigen::MatrixXd pred = predict_normalized(model, one);
  return row_to_state(denormalize_label_row(pred.row(0), scaling), convention);
}

Eigen::VectorXd knn_estimate(const Eigen::MatrixXd& train_inputs,
                             const Eigen::MatrixXd& train_labels,
                             const Eigen::VectorXd& query, long k) {
  const long n = train_inputs.rows();
  if (n == 0) throw std::runtime_error("knn: empty training set");
  if (k < 1 || k > n)
    throw std::runtime_error("knn: k = " + std::to_string(k) +
                             " outside [1, " + std::to_string(n) + "]");
  std::vector<std::pair<double, long>> dist(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i)
    dist[static_cast<std::size_t>(i)] = {(train_inputs.row(i).transpose() - query).squaredNorm(), i};
  std::sort(dist.begin(), dist.end());
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(train_labels.cols());
  for (long j = 0; j < k; ++j) acc += train_labels.row(dist[static_cast<std::size_t>(j)].second);
  return acc / static_cast<double>(k);
}

std::vector<long> default_neuron_values(long output_len) {
  std::vector<long> v;
  for (long x = 185; x <= 230; x += 5) v.push_back(x);
  v.push_back(output_len);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<long> default_epoch_values() {
  std::vector<long> v;
  for (long x = 200; x <= 700; x += 50) v.push_back(x);
  return v;
}

std::vector<long> default_k_values() {
  std::vector<long> v;
  for (long x = 0; x <= 9; ++x) v.push_back(x);
  return v;
}

std::vector<NeuronSweepRow> sweep_neurons(const std::vector<long>& values,
                                          const SplitDataset& data,
                                          const ScalingInfo& scaling,
                                          CnnEstimatorSpec base, std::uint64_t seed) {
  std::vector<NeuronSweepRow> rows;
  for (long f : values) {
    CnnEstimatorSpec spec = base;
    spec.n_neurons = f;
    nn::Sequential model = build_cnn_estimator(spec);
    init_model(model, seed);
    train_estimator(model, data, scaling, spec, seed);
    rows.push_back({f, validation_nrmse(model, data, scaling)});
  }
  std::sort(rows.begin(), rows.end(),
            [](const NeuronSweepRow& a, const NeuronSweepRow& b) {
              return a.n_neurons < b.n_neurons;
            });
  return rows;
}

std::vector<EpochSweepRow> sweep_epochs(const std::vector<long>& epoch_values,
                                        const std::vector<long>& neuron_values,
                                        const SplitDataset& data,
                                        const ScalingInfo& scaling, CnnEstimatorSpec base,
                                        std::uint64_t seed) {
  std::vector<EpochSweepRow> rows;
  for (long e : epoch_values) {
    for (long f : neuron_values) {
      CnnEstimatorSpec spec = base;
      spec.epochs = e;
      spec.n_neurons = f;
      nn::Sequential model = build_cnn_estimator(spec);
      init_model(model, seed);
      const auto t0 = std::chrono::steady_clock::now();
      train_estimator(model, data, scaling, spec, seed);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rows.push_back({e, f, validation_nrmse(model, data, scaling), secs});
    }
  }
  return rows;
}

std::vector<KSweepRow> sweep_k(const std::vector<long>& k_values,
                               const SplitDataset& data, const ScalingInfo& scaling) {
  const long n_train = data.train_inputs.rows();
  const long n_valid = data.valid_inputs.rows();
  std::vector<KSweepRow> rows;
  for (long k : k_values) {
    KSweepRow row;
    row.k = k;
    if (k < 1 || k > n_train) {
      row.valid = false;
      row.note = "invalid k (must be in [1, train size])";
      row.nrmse = std::nan("");
      rows.push_back(row);
      continue;
    }
    Eigen::MatrixXd pred(n_valid, data.valid_labels.cols());
    for (long i = 0; i < n_valid; ++i)
      pred.row(i) = knn_estimate(data.train_inputs, data.train_labels,
                                 data.valid_inputs.row(i).transpose(), k);
    row.valid = true;
    row.nrmse = metric_nrmse(denormalize_labels(pred, scaling),
                             denormalize_labels(data.valid_labels, scaling))
                    .nrmse_paper;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gridse
