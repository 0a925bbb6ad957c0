#include "gridse/nn/layers.hpp"

#include <sstream>
#include <utility>

namespace gridse::nn {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    default: return "none";
  }
}

Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "none") return Activation::None;
  throw std::runtime_error("unknown activation '" + s + "'");
}

void glorot_fill(Tensor& w, long fan_in, long fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : w.data) v = rng.uniform(-a, a);
}

namespace {

void check_last_dim(const Tensor& x, long want, const char* who) {
  if (x.shape.empty() || x.shape.back() != want)
    throw std::runtime_error(std::string(who) + ": input shape " + x.shape_str() +
                             " does not end in " + std::to_string(want));
}

// Shared affine core for Dense and TimeDistributedDense. Rows of xm are
// samples; w is (out, in).
Tensor affine_forward(const Tensor& x, long rows, long in, long out, const Tensor& w,
                      const Tensor& b, Activation act, Tensor& y_cache) {
  Tensor y({rows, out});
  y.mat(rows, out).noalias() = x.mat(rows, in) * w.mat(out, in).transpose();
  y.mat(rows, out).rowwise() += b.vec().transpose();
  if (act != Activation::None)
    for (double& v : y.data) v = act_apply(act, v);
  y_cache = y;
  return y;
}

Tensor affine_backward(const Tensor& dy, const Tensor& x_cache, const Tensor& y_cache,
                       long rows, long in, long out, const Tensor& w, Tensor& dw,
                       Tensor& db, Activation act) {
  Tensor dpre = dy;
  if (act != Activation::None)
    for (long i = 0; i < dpre.size(); ++i)
      dpre(i) *= act_deriv(act, y_cache.data[static_cast<std::size_t>(i)]);
  dw.mat(out, in).noalias() += dpre.mat(rows, out).transpose() * x_cache.mat(rows, in);
  db.vec().noalias() += dpre.mat(rows, out).colwise().sum().transpose();
  Tensor dx(x_cache.shape);
  dx.mat(rows, in).noalias() = dpre.mat(rows, out) * w.mat(out, in);
  return dx;
}

}  // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(long in, long out, Activation act)
    : w_({out, in}), b_({out}), dw_({out, in}), db_({out}), in_(in), out_(out), act_(act) {}

void Dense::init_params(Rng& rng) { glorot_fill(w_, in_, out_, rng); b_.set_zero(); }

Tensor Dense::forward(const Tensor& x, Mode, Rng*) {
  if (x.rank() != 2) throw std::runtime_error("dense: expected rank-2 input, got " + x.shape_str());
  check_last_dim(x, in_, "dense");
  x_cache_ = x;
  return affine_forward(x, x.shape[0], in_, out_, w_, b_, act_, y_cache_);
}

Tensor Dense::backward(const Tensor& dy) {
  return affine_backward(dy, x_cache_, y_cache_, x_cache_.shape[0], in_, out_, w_, dw_,
                         db_, act_);
}

std::string Dense::describe() const {
  return "dense " + std::to_string(in_) + " " + std::to_string(out_) + " " +
         activation_name(act_);
}

// --------------------------------------------------------------- Conv1d

Conv1d::Conv1d(long in_channels, long filters, long kernel)
    : w_({filters, kernel, in_channels}),
      b_({filters}),
      dw_({filters, kernel, in_channels}),
      db_({filters}),
      channels_(in_channels),
      filters_(filters),
      kernel_(kernel) {}

void Conv1d::init_params(Rng& rng) {
  glorot_fill(w_, kernel_ * channels_, kernel_ * filters_, rng);
  b_.set_zero();
}

Tensor Conv1d::forward(const Tensor& x, Mode, Rng*) {
  if (x.rank() != 3) throw std::runtime_error("conv1d: expected rank-3 input, got " + x.shape_str());
  check_last_dim(x, channels_, "conv1d");
  x_cache_ = x;
  const long batch = x.shape[0], len = x.shape[1];
  Tensor y({batch, len, filters_});

  // tap-k weight slice as a (F, C) matrix
  RowMat wk(filters_, channels_);
  ConstMatMap xm = x.mat(batch * len, channels_);
  MatMap ym = y.mat(batch * len, filters_);
  for (long k = 0; k < kernel_ && k < len; ++k) {
    for (long f = 0; f < filters_; ++f)
      for (long c = 0; c < channels_; ++c) wk(f, c) = w_(f, k, c);
    for (long b = 0; b < batch; ++b)
      ym.block(b * len + k, 0, len - k, filters_).noalias() +=
          xm.block(b * len, 0, len - k, channels_) * wk.transpose();
  }
  ym.rowwise() += b_.vec().transpose();
  return y;
}

Tensor Conv1d::backward(const Tensor& dy) {
  const long batch = x_cache_.shape[0], len = x_cache_.shape[1];
  Tensor dx(x_cache_.shape);
  ConstMatMap xm = std::as_const(x_cache_).mat(batch * len, channels_);
  ConstMatMap dym = dy.mat(batch * len, filters_);
  MatMap dxm = dx.mat(batch * len, channels_);

  db_.vec().noalias() += dym.colwise().sum().transpose();
  RowMat wk(filters_, channels_);
  RowMat dwk(filters_, channels_);
  for (long k = 0; k < kernel_ && k < len; ++k) {
    for (long f = 0; f < filters_; ++f)
      for (long c = 0; c < channels_; ++c) wk(f, c) = w_(f, k, c);
    dwk.setZero();
    for (long b = 0; b < batch; ++b) {
      dwk.noalias() += dym.block(b * len + k, 0, len - k, filters_).transpose() *
                       xm.block(b * len, 0, len - k, channels_);
      dxm.block(b * len, 0, len - k, channels_).noalias() +=
          dym.block(b * len + k, 0, len - k, filters_) * wk;
    }
    for (long f = 0; f < filters_; ++f)
      for (long c = 0; c < channels_; ++c) dw_(f, k, c) += dwk(f, c);
  }
  return dx;
}

std::string Conv1d::describe() const {
  return "conv1d " + std::to_string(channels_) + " " + std::to_string(filters_) + " " +
         std::to_string(kernel_);
}

// ----------------------------------------------------------------- Relu

Tensor Relu::forward(const Tensor& x, Mode, Rng*) {
  Tensor y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  y_cache_ = y;
  return y;
}

Tensor Relu::backward(const Tensor& dy) {
  Tensor dx = dy;
  for (long i = 0; i < dx.size(); ++i)
    if (!(y_cache_(i) > 0.0)) dx(i) = 0.0;
  return dx;
}

// -------------------------------------------------------------- Dropout

Dropout::Dropout(double rate) : rate_(rate) {
  if (rate < 0.0 || rate >= 1.0) throw std::runtime_error("dropout rate must be in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng* rng) {
  if (mode == Mode::Infer || rate_ == 0.0) {
    mask_ = Tensor(x.shape);
    std::fill(mask_.data.begin(), mask_.data.end(), 1.0);
    return x;
  }
  if (!rng) throw std::runtime_error("dropout: training forward needs an rng");
  mask_ = Tensor(x.shape);
  const double keep_scale = 1.0 / (1.0 - rate_);
  for (double& m : mask_.data) m = rng->uniform01() >= rate_ ? keep_scale : 0.0;
  Tensor y = x;
  for (long i = 0; i < y.size(); ++i) y(i) *= mask_(i);
  return y;
}

Tensor Dropout::backward(const Tensor& dy) {
  Tensor dx = dy;
  for (long i = 0; i < dx.size(); ++i) dx(i) *= mask_(i);
  return dx;
}

std::string Dropout::describe() const {
  std::ostringstream os;
  os << "dropout " << rate_;
  return os.str();
}

// ---------------------------------------------------------- BatchNorm1d

BatchNorm1d::BatchNorm1d(long features, double momentum, double eps)
    : gamma_({features}),
      beta_({features}),
      dgamma_({features}),
      dbeta_({features}),
      running_mean_({features}),
      running_var_({features}),
      features_(features),
      momentum_(momentum),
      eps_(eps) {
  std::fill(gamma_.data.begin(), gamma_.data.end(), 1.0);
  std::fill(running_var_.data.begin(), running_var_.data.end(), 1.0);
}

Tensor BatchNorm1d::forward(const Tensor& x, Mode mode, Rng*) {
  if (x.rank() != 2) throw std::runtime_error("batchnorm1d: expected rank-2 input");
  check_last_dim(x, features_, "batchnorm1d");
  last_mode_ = mode;
  const long batch = x.shape[0];
  ConstMatMap xm = x.mat(batch, features_);
  Tensor y(x.shape);
  MatMap ym = y.mat(batch, features_);

  if (mode == Mode::Infer) {
    for (long d = 0; d < features_; ++d) {
      const double scale = gamma_(d) / std::sqrt(running_var_(d) + eps_);
      for (long b = 0; b < batch; ++b)
        ym(b, d) = scale * (xm(b, d) - running_mean_(d)) + beta_(d);
    }
    return y;
  }

  const Eigen::VectorXd mean = xm.colwise().mean().transpose();
  Eigen::VectorXd var(features_);
  for (long d = 0; d < features_; ++d)
    var(d) = (xm.col(d).array() - mean(d)).square().mean();

  inv_std_cache_ = (var.array() + eps_).sqrt().inverse();
  xhat_cache_ = Tensor(x.shape);
  MatMap xh = xhat_cache_.mat(batch, features_);
  for (long d = 0; d < features_; ++d) {
    xh.col(d) = (xm.col(d).array() - mean(d)) * inv_std_cache_(d);
    ym.col(d) = gamma_(d) * xh.col(d).array() + beta_(d);
  }
  for (long d = 0; d < features_; ++d) {
    running_mean_(d) = momentum_ * running_mean_(d) + (1.0 - momentum_) * mean(d);
    running_var_(d) = momentum_ * running_var_(d) + (1.0 - momentum_) * var(d);
  }
  return y;
}

Tensor BatchNorm1d::backward(const Tensor& dy) {
  const long batch = dy.shape[0];
  Tensor dx(dy.shape);
  ConstMatMap dym = dy.mat(batch, features_);
  MatMap dxm = dx.mat(batch, features_);

  if (last_mode_ == Mode::Infer) {
    for (long d = 0; d < features_; ++d)
      dxm.col(d) = dym.col(d) * (gamma_(d) / std::sqrt(running_var_(d) + eps_));
    return dx;
  }

  ConstMatMap xh = std::as_const(xhat_cache_).mat(batch, features_);
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (long d = 0; d < features_; ++d) {
    const double sum_dy = dym.col(d).sum();
    const double sum_dy_xh = (dym.col(d).array() * xh.col(d).array()).sum();
    dgamma_(d) += sum_dy_xh;
    dbeta_(d) += sum_dy;
    dxm.col(d) = gamma_(d) * inv_std_cache_(d) * inv_b *
                 (static_cast<double>(batch) * dym.col(d).array() - sum_dy -
                  xh.col(d).array() * sum_dy_xh);
  }
  return dx;
}

std::string BatchNorm1d::describe() const {
  std::ostringstream os;
  os << "batchnorm1d " << features_ << " " << momentum_ << " " << eps_;
  return os.str();
}

// -------------------------------------------------------------- Flatten

Tensor Flatten::forward(const Tensor& x, Mode, Rng*) {
  if (x.rank() < 2) throw std::runtime_error("flatten: expected rank >= 2");
  in_shape_ = x.shape;
  return x.reshaped({x.shape[0], x.size() / x.shape[0]});
}

Tensor Flatten::backward(const Tensor& dy) { return dy.reshaped(in_shape_); }

// ------------------------------------------------- TimeDistributedDense

TimeDistributedDense::TimeDistributedDense(long in, long out, Activation act)
    : w_({out, in}), b_({out}), dw_({out, in}), db_({out}), in_(in), out_(out), act_(act) {}

void TimeDistributedDense::init_params(Rng& rng) {
  glorot_fill(w_, in_, out_, rng);
  b_.set_zero();
}

Tensor TimeDistributedDense::forward(const Tensor& x, Mode, Rng*) {
  if (x.rank() != 3) throw std::runtime_error("tdist_dense: expected rank-3 input");
  check_last_dim(x, in_, "tdist_dense");
  in_shape_ = x.shape;
  const long rows = x.shape[0] * x.shape[1];
  x_cache_ = x.reshaped({rows, in_});
  Tensor y = affine_forward(x_cache_, rows, in_, out_, w_, b_, act_, y_cache_);
  return y.reshaped({x.shape[0], x.shape[1], out_});
}

Tensor TimeDistributedDense::backward(const Tensor& dy) {
  const long rows = in_shape_[0] * in_shape_[1];
  Tensor dx = affine_backward(dy.reshaped({rows, out_}), x_cache_, y_cache_, rows, in_,
                              out_, w_, dw_, db_, act_);
  return dx.reshaped(in_shape_);
}

std::string TimeDistributedDense::describe() const {
  return "tdist_dense " + std::to_string(in_) + " " + std::to_string(out_) + " " +
         activation_name(act_);
}

// ---------------------------------------------------------- descriptions

std::unique_ptr<Layer> layer_from_description(const std::string& line) {
  std::istringstream is(line);
  std::string kind;
  is >> kind;
  if (kind == "dense" || kind == "tdist_dense") {
    long in, out;
    std::string act;
    is >> in >> out >> act;
    if (!is) throw std::runtime_error("bad layer description: " + line);
    if (kind == "dense")
      return std::make_unique<Dense>(in, out, activation_from_name(act));
    return std::make_unique<TimeDistributedDense>(in, out, activation_from_name(act));
  }
  if (kind == "conv1d") {
    long c, f, k;
    is >> c >> f >> k;
    if (!is) throw std::runtime_error("bad layer description: " + line);
    return std::make_unique<Conv1d>(c, f, k);
  }
  if (kind == "relu") return std::make_unique<Relu>();
  if (kind == "flatten") return std::make_unique<Flatten>();
  if (kind == "dropout") {
    double rate;
    is >> rate;
    if (!is) throw std::runtime_error("bad layer description: " + line);
    return std::make_unique<Dropout>(rate);
  }
  if (kind == "batchnorm1d") {
    long d;
    double momentum, eps;
    is >> d >> momentum >> eps;
    if (!is) throw std::runtime_error("bad layer description: " + line);
    return std::make_unique<BatchNorm1d>(d, momentum, eps);
  }
  throw std::runtime_error("unknown layer kind in '" + line + "'");
}

}  // namespace gridse::nn
