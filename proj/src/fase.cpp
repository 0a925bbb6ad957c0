#include "gridse/fase.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gridse/nn/model.hpp"
#include "gridse/nn/optim.hpp"

namespace gridse {

using nn::Mode;
using nn::Tensor;

WindowedDataset make_windows(const Eigen::MatrixXd& series, long r) {
  if (r < 1) throw std::runtime_error("make_windows: r must be at least 1");
  if (series.rows() <= r)
    throw std::runtime_error("make_windows: series length " +
                             std::to_string(series.rows()) +
                             " must exceed window length " + std::to_string(r));
  WindowedDataset wd;
  wd.series = series;
  wd.r = r;
  return wd;
}

const std::vector<std::string>& forecaster_registry() {
  static const std::vector<std::string> names = {
      "lstm_fase",
      "tdist_fase",
      "simple_rnn_fase",
      "stack_rnn_fase",
      "pretrained_rnn_plnet_fase",
      "rnn_plnet_fase",
      "simplified_rpln_fase",
  };
  return names;
}

bool forecaster_reconstructed(const std::string& name) {
  return name.find("plnet") != std::string::npos || name == "simplified_rpln_fase";
}

// ------------------------------------------------------------- stages

struct Forecaster::Stage {
  virtual ~Stage() = default;
  virtual long out_dim() const = 0;
  virtual void begin(long batch, long r) = 0;
  virtual Tensor step(const Tensor& x, long t, Mode mode, Rng* rng) = 0;
  virtual void begin_backward(long batch) = 0;
  virtual Tensor backstep(const Tensor& d_out, long t) = 0;
  virtual std::vector<Tensor*> parameters() = 0;
  virtual std::vector<Tensor*> gradients() = 0;
  virtual void init_params(Rng& rng) = 0;
  virtual std::string describe() const = 0;
};

namespace {

struct RnnStage final : Forecaster::Stage {
  nn::SimpleRnnCell cell;
  std::vector<nn::SimpleRnnCell::Cache> caches;
  Tensor state, d_carry;

  RnnStage(long in, long hidden) : cell(in, hidden) {}

  long out_dim() const override { return cell.hidden_size(); }

  void begin(long batch, long r) override {
    caches.assign(static_cast<std::size_t>(r), {});
    state = Tensor({batch, cell.hidden_size()});
  }

  Tensor step(const Tensor& x, long t, Mode, Rng*) override {
    state = cell.step(x, state, caches[static_cast<std::size_t>(t)]);
    return state;
  }

  void begin_backward(long batch) override { d_carry = Tensor({batch, cell.hidden_size()}); }

  Tensor backstep(const Tensor& d_out, long t) override {
    Tensor ds = d_out;
    ds.vec() += d_carry.vec();
    Tensor dx, ds_prev;
    cell.backward_step(caches[static_cast<std::size_t>(t)], ds, dx, ds_prev);
    d_carry = ds_prev;
    return dx;
  }

  std::vector<Tensor*> parameters() override { return cell.parameters(); }
  std::vector<Tensor*> gradients() override { return cell.gradients(); }
  void init_params(Rng& rng) override { cell.init_params(rng); }
  std::string describe() const override {
    return "rnn " + std::to_string(cell.input_size()) + " " +
           std::to_string(cell.hidden_size());
  }
};

struct LstmStage final : Forecaster::Stage {
  nn::LstmCell cell;
  std::vector<nn::LstmCell::Cache> caches;
  Tensor h, c, dh_carry, dc_carry;

  LstmStage(long in, long hidden) : cell(in, hidden) {}

  long out_dim() const override { return cell.hidden_size(); }

  void begin(long batch, long r) override {
    caches.assign(static_cast<std::size_t>(r), {});
    h = Tensor({batch, cell.hidden_size()});
    c = Tensor({batch, cell.hidden_size()});
  }

  Tensor step(const Tensor& x, long t, Mode, Rng*) override {
    Tensor h_new, c_new;
    cell.step(x, h, c, h_new, c_new, &caches[static_cast<std::size_t>(t)]);
    h = h_new;
    c = c_new;
    return h;
  }

  void begin_backward(long batch) override {
    dh_carry = Tensor({batch, cell.hidden_size()});
    dc_carry = Tensor({batch, cell.hidden_size()});
  }

  Tensor backstep(const Tensor& d_out, long t) override {
    Tensor dh = d_out;
    dh.vec() += dh_carry.vec();
    Tensor dx, dh_prev, dc_prev;
    cell.backward_step(caches[static_cast<std::size_t>(t)], dh, dc_carry, dx, dh_prev,
                       dc_prev);
    dh_carry = dh_prev;
    dc_carry = dc_prev;
    return dx;
  }

  std::vector<Tensor*> parameters() override { return cell.parameters(); }
  std::vector<Tensor*> gradients() override { return cell.gradients(); }
  void init_params(Rng& rng) override { cell.init_params(rng); }
  std::string describe() const override {
    return "lstm " + std::to_string(cell.input_size()) + " " +
           std::to_string(cell.hidden_size());
  }
};

// Shared-weight affine map applied independently at every step.
struct StepDenseStage final : Forecaster::Stage {
  long in, out;
  nn::Activation act;
  Tensor w, b, dw, db;
  std::vector<Tensor> x_cache, y_cache;

  StepDenseStage(long in, long out, nn::Activation act)
      : in(in), out(out), act(act), w({out, in}), b({out}), dw({out, in}), db({out}) {}

  long out_dim() const override { return out; }

  void begin(long, long r) override {
    x_cache.assign(static_cast<std::size_t>(r), {});
    y_cache.assign(static_cast<std::size_t>(r), {});
  }

  Tensor step(const Tensor& x, long t, Mode, Rng*) override {
    const long batch = x.shape[0];
    Tensor y({batch, out});
    y.mat2().noalias() = x.mat2() * w.mat2().transpose();
    y.mat2().rowwise() += b.vec().transpose();
    if (act != nn::Activation::None)
      for (double& v : y.data) v = nn::act_apply(act, v);
    x_cache[static_cast<std::size_t>(t)] = x;
    y_cache[static_cast<std::size_t>(t)] = y;
    return y;
  }

  void begin_backward(long) override {}

  Tensor backstep(const Tensor& d_out, long t) override {
    const Tensor& x = x_cache[static_cast<std::size_t>(t)];
    const Tensor& y = y_cache[static_cast<std::size_t>(t)];
    Tensor dpre = d_out;
    if (act != nn::Activation::None)
      for (long i = 0; i < dpre.size(); ++i)
        dpre(i) *= nn::act_deriv(act, y.data[static_cast<std::size_t>(i)]);
    dw.mat2().noalias() += dpre.mat2().transpose() * x.mat2();
    db.vec().noalias() += dpre.mat2().colwise().sum().transpose();
    Tensor dx({x.shape[0], in});
    dx.mat2().noalias() = dpre.mat2() * w.mat2();
    return dx;
  }

  std::vector<Tensor*> parameters() override { return {&w, &b}; }
  std::vector<Tensor*> gradients() override { return {&dw, &db}; }
  void init_params(Rng& rng) override {
    nn::glorot_fill(w, in, out, rng);
    b.set_zero();
  }
  std::string describe() const override {
    return "step_dense " + std::to_string(in) + " " + std::to_string(out) + " " +
           nn::activation_name(act);
  }
};

struct StepDropoutStage final : Forecaster::Stage {
  double rate;
  long width;
  std::vector<Tensor> masks;

  StepDropoutStage(double rate, long width) : rate(rate), width(width) {}

  long out_dim() const override { return width; }

  void begin(long, long r) override { masks.assign(static_cast<std::size_t>(r), {}); }

  Tensor step(const Tensor& x, long t, Mode mode, Rng* rng) override {
    Tensor& mask = masks[static_cast<std::size_t>(t)];
    mask = Tensor(x.shape);
    if (mode == Mode::Infer || rate == 0.0) {
      std::fill(mask.data.begin(), mask.data.end(), 1.0);
      return x;
    }
    if (!rng) throw std::runtime_error("dropout stage: training needs an rng");
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& m : mask.data) m = rng->uniform01() >= rate ? keep_scale : 0.0;
    Tensor y = x;
    for (long i = 0; i < y.size(); ++i) y(i) *= mask(i);
    return y;
  }

  void begin_backward(long) override {}

  Tensor backstep(const Tensor& d_out, long t) override {
    Tensor dx = d_out;
    const Tensor& mask = masks[static_cast<std::size_t>(t)];
    for (long i = 0; i < dx.size(); ++i) dx(i) *= mask(i);
    return dx;
  }

  std::vector<Tensor*> parameters() override { return {}; }
  std::vector<Tensor*> gradients() override { return {}; }
  void init_params(Rng&) override {}
  std::string describe() const override {
    std::ostringstream os;
    os << "step_dropout " << rate << " " << width;
    return os.str();
  }
};

}  // namespace

// ---------------------------------------------------------- Forecaster

Forecaster::Forecaster(const ForecastSpec& spec, long state_dim)
    : spec_(spec), state_dim_(state_dim) {
  build();
}

void Forecaster::build() {
  const long d = state_dim_;
  const long h = spec_.hidden;
  const std::string& name = spec_.name;

  auto rnn = [&](long in) { stages_.push_back(std::make_unique<RnnStage>(in, h)); };
  auto lstm = [&](long in) { stages_.push_back(std::make_unique<LstmStage>(in, h)); };
  auto dense = [&](long in, nn::Activation act) {
    stages_.push_back(std::make_unique<StepDenseStage>(in, h, act));
  };

  if (name == "lstm_fase") {
    lstm(d);
  } else if (name == "tdist_fase") {
    dense(d, nn::Activation::None);
    stages_.push_back(std::make_unique<StepDropoutStage>(spec_.dropout, h));
    lstm(h);
  } else if (name == "simple_rnn_fase") {
    rnn(d);
  } else if (name == "stack_rnn_fase") {
    if (spec_.depth < 1) throw std::runtime_error("stack_rnn_fase: depth must be >= 1");
    rnn(d);
    for (long l = 1; l < spec_.depth; ++l) rnn(h);
  } else if (name == "pretrained_rnn_plnet_fase" || name == "simplified_rpln_fase" ||
             name == "rnn_plnet_fase") {
    // reconstructed structures: stacked SimpleRNN with per-step dense
    // interlayers, depths 2/3/2; the simplified variant uses linear
    // interlayers
    const long depth = name == "rnn_plnet_fase" ? 3 : 2;
    const nn::Activation inter = name == "simplified_rpln_fase"
                                     ? nn::Activation::None
                                     : nn::Activation::Tanh;
    rnn(d);
    for (long l = 1; l < depth; ++l) {
      dense(h, inter);
      rnn(h);
    }
  } else {
    throw std::runtime_error("unknown forecaster '" + name + "'");
  }
  output_ = std::make_unique<nn::Dense>(h, d, nn::Activation::None);
}

void Forecaster::init_params(Rng& rng) {
  for (auto& s : stages_) s->init_params(rng);
  output_->init_params(rng);
}

std::vector<Tensor*> Forecaster::parameters() {
  std::vector<Tensor*> out;
  for (auto& s : stages_)
    for (Tensor* p : s->parameters()) out.push_back(p);
  for (Tensor* p : output_->parameters()) out.push_back(p);
  return out;
}

std::vector<Tensor*> Forecaster::gradients() {
  std::vector<Tensor*> out;
  for (auto& s : stages_)
    for (Tensor* g : s->gradients()) out.push_back(g);
  for (Tensor* g : output_->gradients()) out.push_back(g);
  return out;
}

void Forecaster::zero_grad() {
  for (Tensor* g : gradients()) g->set_zero();
}

long Forecaster::parameter_count() {
  long n = 0;
  for (Tensor* p : parameters()) n += p->size();
  return n;
}

Tensor Forecaster::forward(const Tensor& windows, Mode mode, Rng* rng) {
  if (windows.rank() != 3)
    throw std::runtime_error("forecaster: expected (B, r, 2N) input, got " +
                             windows.shape_str());
  if (windows.shape[1] != spec_.r)
    throw std::runtime_error("forecaster: window length " +
                             std::to_string(windows.shape[1]) + " != r = " +
                             std::to_string(spec_.r));
  if (windows.shape[2] != state_dim_)
    throw std::runtime_error("forecaster: state width mismatch");

  const long batch = windows.shape[0];
  for (auto& s : stages_) s->begin(batch, spec_.r);

  Tensor x;
  for (long t = 0; t < spec_.r; ++t) {
    x = Tensor({batch, state_dim_});
    for (long b = 0; b < batch; ++b)
      for (long c = 0; c < state_dim_; ++c) x(b, c) = windows(b, t, c);
    for (auto& s : stages_) x = s->step(x, t, mode, rng);
  }
  return output_->forward(x, mode, rng);
}

void Forecaster::backward(const Tensor& dy) {
  Tensor d_top = output_->backward(dy);
  const long batch = d_top.shape[0];
  for (auto& s : stages_) s->begin_backward(batch);
  const long top_width = stages_.back()->out_dim();
  for (long t = spec_.r - 1; t >= 0; --t) {
    Tensor d = t == spec_.r - 1 ? d_top : Tensor({batch, top_width});
    for (std::size_t i = stages_.size(); i-- > 0;) d = stages_[i]->backstep(d, t);
  }
}

void Forecaster::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  os << "gridse-forecaster v1\n";
  os << spec_.name << ' ' << spec_.hidden << ' ' << spec_.depth << ' ' << spec_.dropout
     << ' ' << spec_.epochs << ' ' << spec_.batch_size << ' ' << spec_.lr << ' '
     << spec_.r << ' ' << state_dim_ << '\n';
  auto* mut = const_cast<Forecaster*>(this);
  for (Tensor* p : mut->parameters()) nn::write_tensor(os, *p);
}

Forecaster Forecaster::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  std::string line;
  std::getline(is, line);
  if (line != "gridse-forecaster v1")
    throw std::runtime_error("unsupported checkpoint header '" + line + "'");
  ForecastSpec spec;
  long state_dim = 0;
  is >> spec.name >> spec.hidden >> spec.depth >> spec.dropout >> spec.epochs >>
      spec.batch_size >> spec.lr >> spec.r >> state_dim;
  if (!is) throw std::runtime_error("malformed forecaster checkpoint");
  Forecaster model(spec, state_dim);
  for (Tensor* p : model.parameters()) {
    Tensor t = nn::read_tensor(is);
    if (t.shape != p->shape) throw std::runtime_error("checkpoint: shape mismatch");
    *p = t;
  }
  return model;
}

Forecaster build_forecaster(const ForecastSpec& spec, long state_dim) {
  return Forecaster(spec, state_dim);
}

// ------------------------------------------------------------ training

namespace {

Tensor windows_tensor(const WindowedDataset& wd, const std::vector<long>& idx) {
  const long batch = static_cast<long>(idx.size());
  const long d = wd.series.cols();
  Tensor x({batch, wd.r, d});
  for (long b = 0; b < batch; ++b)
    for (long t = 0; t < wd.r; ++t)
      for (long c = 0; c < d; ++c) x(b, t, c) = wd.series(idx[static_cast<std::size_t>(b)] + t, c);
  return x;
}

Tensor targets_tensor(const WindowedDataset& wd, const std::vector<long>& idx) {
  const long batch = static_cast<long>(idx.size());
  const long d = wd.series.cols();
  Tensor y({batch, d});
  for (long b = 0; b < batch; ++b)
    for (long c = 0; c < d; ++c) y(b, c) = wd.series(idx[static_cast<std::size_t>(b)] + wd.r, c);
  return y;
}

Eigen::MatrixXd forecast_batch(Forecaster& model, const WindowedDataset& wd,
                               const std::vector<long>& idx) {
  Tensor y = model.forward(windows_tensor(wd, idx), Mode::Infer, nullptr);
  Eigen::MatrixXd out(y.shape[0], y.shape[1]);
  for (long r = 0; r < y.shape[0]; ++r)
    for (long c = 0; c < y.shape[1]; ++c) out(r, c) = y(r, c);
  return out;
}

}  // namespace

std::vector<EpochRecord> train_forecaster(Forecaster& model, const WindowedDataset& wd,
                                          const ScalingInfo& scaling,
                                          std::uint64_t seed) {
  const long n_windows = wd.count();
  if (n_windows < 1) throw std::runtime_error("train_forecaster: no windows");
  const long n_train = std::max(1L, (n_windows * 8) / 10);
  const ForecastSpec& spec = model.spec();

  std::vector<long> train_idx(static_cast<std::size_t>(n_train));
  for (long i = 0; i < n_train; ++i) train_idx[static_cast<std::size_t>(i)] = i;
  std::vector<long> valid_idx;
  for (long i = n_train; i < n_windows; ++i) valid_idx.push_back(i);

  Rng rng = Rng(seed).fork(1);
  nn::AdamState adam;
  adam.lr = spec.lr;
  adam.init_like(model.parameters());

  std::vector<EpochRecord> history;
  const auto t0 = std::chrono::steady_clock::now();
  for (long epoch = 0; epoch < spec.epochs; ++epoch) {
    shuffle(train_idx, rng);
    double mae_sum = 0.0;
    long batches = 0;
    for (long start = 0; start < n_train; start += spec.batch_size) {
      const long count = std::min(spec.batch_size, n_train - start);
      std::vector<long> idx(train_idx.begin() + start, train_idx.begin() + start + count);
      Tensor x = windows_tensor(wd, idx);
      Tensor target = targets_tensor(wd, idx);
      model.zero_grad();
      Tensor y = model.forward(x, Mode::Train, &rng);
      nn::LossResult l = nn::loss(nn::LossKind::MAE, y, target);
      if (!std::isfinite(l.value))
        throw std::runtime_error("forecaster training diverged at epoch " +
                                 std::to_string(epoch));
      model.backward(l.grad);
      adam_step(model.parameters(), model.gradients(), adam);
      mae_sum += l.value;
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mae = mae_sum / static_cast<double>(batches);
    if (!valid_idx.empty()) {
      const Eigen::MatrixXd pred = forecast_batch(model, wd, valid_idx);
      Eigen::MatrixXd truth(static_cast<long>(valid_idx.size()), wd.series.cols());
      for (std::size_t i = 0; i < valid_idx.size(); ++i)
        truth.row(static_cast<long>(i)) = wd.series.row(valid_idx[i] + wd.r);
      rec.val_nrmse = metric_nrmse(denormalize_labels(pred, scaling),
                                   denormalize_labels(truth, scaling))
                          .nrmse_paper;
    }
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(rec);
  }
  return history;
}

Eigen::VectorXd forecast_one_step(Forecaster& model, const Eigen::MatrixXd& window,
                                  const ScalingInfo& scaling) {
  if (window.rows() != model.spec().r)
    throw std::runtime_error("forecast_one_step: window has " +
                             std::to_string(window.rows()) + " rows, expected r = " +
                             std::to_string(model.spec().r));
  Tensor x({1, window.rows(), window.cols()});
  for (long t = 0; t < window.rows(); ++t)
    for (long c = 0; c < window.cols(); ++c) x(0, t, c) = window(t, c);
  Tensor y = model.forward(x, Mode::Infer, nullptr);
  Eigen::VectorXd row(y.shape[1]);
  for (long c = 0; c < y.shape[1]; ++c) row(c) = y(0, c);
  return denormalize_label_row(row, scaling);
}

Eigen::VectorXd persistence_baseline(const Eigen::MatrixXd& window) {
  if (window.rows() == 0) throw std::runtime_error("persistence: empty window");
  return window.row(window.rows() - 1).transpose();
}

// ---------------------------------------------------------- evaluation

ForecastEvaluation evaluate_forecasters(const std::vector<std::string>& names,
                                        const Eigen::MatrixXd& series_normalized,
                                        const ScalingInfo& scaling,
                                        LabelConvention convention,
                                        const ForecastSpec& base, std::uint64_t seed,
                                        long plot_slot) {
  ForecastEvaluation ev;
  const WindowedDataset wd = make_windows(series_normalized, base.r);
  const long n_windows = wd.count();
  const long n_train = std::max(1L, (n_windows * 8) / 10);
  std::vector<long> valid_idx;
  for (long i = n_train; i < n_windows; ++i) valid_idx.push_back(i);
  if (valid_idx.empty())
    throw std::runtime_error("evaluate_forecasters: series too short for a validation split");

  // clamp the plotted target into the validation segment
  long slot = plot_slot;
  const long min_slot = valid_idx.front() + wd.r;
  const long max_slot = valid_idx.back() + wd.r;
  if (slot < min_slot) slot = min_slot;
  if (slot > max_slot) slot = max_slot;
  const long plot_window = slot - wd.r;

  Eigen::MatrixXd truth(static_cast<long>(valid_idx.size()), wd.series.cols());
  for (std::size_t i = 0; i < valid_idx.size(); ++i)
    truth.row(static_cast<long>(i)) = wd.series.row(valid_idx[i] + wd.r);
  const Eigen::MatrixXd truth_denorm = denormalize_labels(truth, scaling);

  auto to_polar = [&](const Eigen::VectorXd& row, Eigen::VectorXd& mag,
                      Eigen::VectorXd& ang) {
    const long n = row.size() / 2;
    mag.resize(n);
    ang.resize(n);
    if (convention == LabelConvention::PolarBlocks) {
      mag = row.head(n);
      ang = row.tail(n);
    } else {
      for (long i = 0; i < n; ++i) {
        mag(i) = std::hypot(row(i), row(n + i));
        ang(i) = std::atan2(row(n + i), row(i));
      }
    }
  };

  auto make_plot = [&](const Eigen::VectorXd& forecast_denorm) {
    ForecastPlotData plot;
    plot.slot = slot;
    const Eigen::VectorXd truth_row =
        denormalize_label_row(wd.series.row(slot).transpose(), scaling);
    to_polar(truth_row, plot.truth_mag, plot.truth_ang);
    to_polar(forecast_denorm, plot.forecast_mag, plot.forecast_ang);
    return plot;
  };

  for (const std::string& name : names) {
    ForecastEvalRow row;
    row.name = name;
    row.reconstructed = forecaster_reconstructed(name);
    try {
      ForecastSpec spec = base;
      spec.name = name;
      Forecaster model(spec, wd.series.cols());
      Rng init_rng = Rng(seed).fork(0);
      model.init_params(init_rng);
      train_forecaster(model, wd, scaling, seed);

      const Eigen::MatrixXd pred = forecast_batch(model, wd, valid_idx);
      row.nrmse = metric_nrmse(denormalize_labels(pred, scaling), truth_denorm).nrmse_paper;
      ev.plots.push_back(
          make_plot(forecast_one_step(model, wd.window(plot_window), scaling)));
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
      row.nrmse = std::nan("");
      ev.plots.push_back(ForecastPlotData{});
    }
    ev.rows.push_back(row);
  }

  // persistence baseline, always last
  {
    ForecastEvalRow row;
    row.name = "persistence";
    Eigen::MatrixXd pred(static_cast<long>(valid_idx.size()), wd.series.cols());
    for (std::size_t i = 0; i < valid_idx.size(); ++i)
      pred.row(static_cast<long>(i)) = persistence_baseline(wd.window(valid_idx[i])).transpose();
    row.nrmse = metric_nrmse(denormalize_labels(pred, scaling), truth_denorm).nrmse_paper;
    ev.rows.push_back(row);
    ev.plots.push_back(make_plot(denormalize_label_row(
        persistence_baseline(wd.window(plot_window)), scaling)));
  }
  return ev;
}

}  // namespace gridse
