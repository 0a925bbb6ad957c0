#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "gridse/nn/tensor.hpp"
#include "gridse/rng.hpp"

namespace gridse::nn {

enum class Mode { Train, Infer };

enum class Activation { None, Relu, Tanh, Sigmoid };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& s);

inline double act_apply(Activation a, double x) {
  switch (a) {
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Tanh: return std::tanh(x);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    default: return x;
  }
}

/// Derivative expressed through the activation output.
inline double act_deriv(Activation a, double y) {
  switch (a) {
    case Activation::Relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::Sigmoid: return y * (1.0 - y);
    default: return 1.0;
  }
}

/// Glorot-uniform fill: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
void glorot_fill(Tensor& w, long fan_in, long fan_out, Rng& rng);

/// One stage of a feed-forward stack. forward caches whatever backward
/// needs; backward returns d(loss)/d(input) and accumulates parameter
/// gradients until zero_grad.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, Mode mode, Rng* rng) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual std::vector<Tensor*> parameters() { return {}; }
  virtual std::vector<Tensor*> gradients() { return {}; }
  /// Non-trainable buffers that still belong in a checkpoint.
  virtual std::vector<Tensor*> state() { return {}; }
  virtual void init_params(Rng&) {}
  virtual std::string describe() const = 0;
  void zero_grad() {
    for (Tensor* g : gradients()) g->set_zero();
  }
};

/// y = x W' + b with an optional fused activation. Input (B, in).
class Dense : public Layer {
 public:
  Dense(long in, long out, Activation act = Activation::None);
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Tensor*> parameters() override { return {&w_, &b_}; }
  std::vector<Tensor*> gradients() override { return {&dw_, &db_}; }
  void init_params(Rng& rng) override;
  std::string describe() const override;

  Tensor w_, b_, dw_, db_;

 private:
  long in_, out_;
  Activation act_;
  Tensor x_cache_, y_cache_;
};

/// Causal 1-D convolution, stride 1, zero padding on the past side so the
/// output keeps the input length: y[l] = b + sum_k W_k x[l - k].
/// Input (B, L, C), output (B, L, F).
class Conv1d : public Layer {
 public:
  Conv1d(long in_channels, long filters, long kernel);
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Tensor*> parameters() override { return {&w_, &b_}; }
  std::vector<Tensor*> gradients() override { return {&dw_, &db_}; }
  void init_params(Rng& rng) override;
  std::string describe() const override;

  Tensor w_, b_, dw_, db_;  // w (F, K, C)

 private:
  long channels_, filters_, kernel_;
  Tensor x_cache_;
};

class Relu : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  std::string describe() const override { return "relu"; }

 private:
  Tensor y_cache_;
};

/// Inverted dropout: surviving units are scaled by 1/(1-rate) during
/// training; inference is the identity.
class Dropout : public Layer {
 public:
  explicit Dropout(double rate);
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  std::string describe() const override;

 private:
  double rate_;
  Tensor mask_;
};

/// Per-feature batch normalization over the batch axis of a (B, D) input.
class BatchNorm1d : public Layer {
 public:
  BatchNorm1d(long features, double momentum = 0.9, double eps = 1e-5);
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Tensor*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<Tensor*> gradients() override { return {&dgamma_, &dbeta_}; }
  std::vector<Tensor*> state() override { return {&running_mean_, &running_var_}; }
  std::string describe() const override;

  Tensor gamma_, beta_, dgamma_, dbeta_;
  Tensor running_mean_, running_var_;

 private:
  long features_;
  double momentum_, eps_;
  Mode last_mode_ = Mode::Train;
  Tensor xhat_cache_;
  Eigen::VectorXd inv_std_cache_;
};

/// (B, d1, d2) -> (B, d1*d2), values untouched.
class Flatten : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  std::string describe() const override { return "flatten"; }

 private:
  std::vector<long> in_shape_;
};

/// Applies the same affine map at every step of a (B, T, in) sequence.
class TimeDistributedDense : public Layer {
 public:
  TimeDistributedDense(long in, long out, Activation act = Activation::None);
  Tensor forward(const Tensor& x, Mode mode, Rng* rng) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<Tensor*> parameters() override { return {&w_, &b_}; }
  std::vector<Tensor*> gradients() override { return {&dw_, &db_}; }
  void init_params(Rng& rng) override;
  std::string describe() const override;

  Tensor w_, b_, dw_, db_;

 private:
  long in_, out_;
  Activation act_;
  Tensor x_cache_, y_cache_;
  std::vector<long> in_shape_;
};

std::unique_ptr<Layer> layer_from_description(const std::string& line);

}  // namespace gridse::nn
