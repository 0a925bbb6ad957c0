#include "gridse/nn/cells.hpp"

namespace gridse::nn {

SimpleRnnCell::SimpleRnnCell(long input, long hidden, Activation act)
    : wx_({hidden, input}),
      ws_({hidden, hidden}),
      b_({hidden}),
      dwx_({hidden, input}),
      dws_({hidden, hidden}),
      db_({hidden}),
      input_(input),
      hidden_(hidden),
      act_(act) {}

void SimpleRnnCell::init_params(Rng& rng) {
  glorot_fill(wx_, input_, hidden_, rng);
  glorot_fill(ws_, hidden_, hidden_, rng);
  b_.set_zero();
}

Tensor SimpleRnnCell::step(const Tensor& x, const Tensor& s_prev) const {
  Cache scratch;
  return step(x, s_prev, scratch);
}

Tensor SimpleRnnCell::step(const Tensor& x, const Tensor& s_prev, Cache& cache) const {
  if (x.rank() != 2 || x.shape[1] != input_)
    throw std::runtime_error("rnn step: input shape " + x.shape_str() + " != (B," +
                             std::to_string(input_) + ")");
  if (s_prev.rank() != 2 || s_prev.shape[1] != hidden_ || s_prev.shape[0] != x.shape[0])
    throw std::runtime_error("rnn step: state shape mismatch");
  const long batch = x.shape[0];
  Tensor s({batch, hidden_});
  s.mat2().noalias() = x.mat2() * wx_.mat2().transpose();
  s.mat2().noalias() += s_prev.mat2() * ws_.mat2().transpose();
  s.mat2().rowwise() += b_.vec().transpose();
  for (double& v : s.data) v = act_apply(act_, v);
  cache.x = x;
  cache.s_prev = s_prev;
  cache.s = s;
  return s;
}

void SimpleRnnCell::backward_step(const Cache& cache, const Tensor& ds, Tensor& dx,
                                  Tensor& ds_prev) {
  const long batch = cache.x.shape[0];
  Tensor da({batch, hidden_});
  for (long i = 0; i < da.size(); ++i)
    da(i) = ds.data[static_cast<std::size_t>(i)] *
            act_deriv(act_, cache.s.data[static_cast<std::size_t>(i)]);
  dwx_.mat2().noalias() += da.mat2().transpose() * cache.x.mat2();
  dws_.mat2().noalias() += da.mat2().transpose() * cache.s_prev.mat2();
  db_.vec().noalias() += da.mat2().colwise().sum().transpose();
  dx = Tensor({batch, input_});
  dx.mat2().noalias() = da.mat2() * wx_.mat2();
  ds_prev = Tensor({batch, hidden_});
  ds_prev.mat2().noalias() = da.mat2() * ws_.mat2();
}

LstmCell::LstmCell(long input, long hidden)
    : wx_({4 * hidden, input}),
      wh_({4 * hidden, hidden}),
      b_({4 * hidden}),
      dwx_({4 * hidden, input}),
      dwh_({4 * hidden, hidden}),
      db_({4 * hidden}),
      input_(input),
      hidden_(hidden) {}

void LstmCell::init_params(Rng& rng) {
  glorot_fill(wx_, input_, 4 * hidden_, rng);
  glorot_fill(wh_, hidden_, 4 * hidden_, rng);
  b_.set_zero();
  for (long i = 0; i < hidden_; ++i) b_(hidden_ + i) = 1.0;  // forget gate
}

void LstmCell::step(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                    Tensor& h_out, Tensor& c_out, Cache* cache) const {
  if (x.rank() != 2 || x.shape[1] != input_)
    throw std::runtime_error("lstm step: input shape " + x.shape_str() + " != (B," +
                             std::to_string(input_) + ")");
  const long batch = x.shape[0];
  Tensor gates({batch, 4 * hidden_});
  gates.mat2().noalias() = x.mat2() * wx_.mat2().transpose();
  gates.mat2().noalias() += h_prev.mat2() * wh_.mat2().transpose();
  gates.mat2().rowwise() += b_.vec().transpose();

  c_out = Tensor({batch, hidden_});
  h_out = Tensor({batch, hidden_});
  Tensor tanh_c({batch, hidden_});
  for (long bi = 0; bi < batch; ++bi) {
    for (long j = 0; j < hidden_; ++j) {
      double& gi = gates(bi, j);
      double& gf = gates(bi, hidden_ + j);
      double& go = gates(bi, 2 * hidden_ + j);
      double& gg = gates(bi, 3 * hidden_ + j);
      gi = act_apply(Activation::Sigmoid, gi);
      gf = act_apply(Activation::Sigmoid, gf);
      go = act_apply(Activation::Sigmoid, go);
      gg = act_apply(Activation::Tanh, gg);
      const double c = gf * c_prev(bi, j) + gi * gg;
      c_out(bi, j) = c;
      tanh_c(bi, j) = std::tanh(c);
      h_out(bi, j) = go * tanh_c(bi, j);
    }
  }
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->c_prev = c_prev;
    cache->gates = gates;
    cache->c = c_out;
    cache->tanh_c = tanh_c;
  }
}

void LstmCell::backward_step(const Cache& cache, const Tensor& dh, const Tensor& dc,
                             Tensor& dx, Tensor& dh_prev, Tensor& dc_prev) {
  const long batch = cache.x.shape[0];
  Tensor da({batch, 4 * hidden_});
  dc_prev = Tensor({batch, hidden_});
  for (long bi = 0; bi < batch; ++bi) {
    for (long j = 0; j < hidden_; ++j) {
      const double gi = cache.gates(bi, j);
      const double gf = cache.gates(bi, hidden_ + j);
      const double go = cache.gates(bi, 2 * hidden_ + j);
      const double gg = cache.gates(bi, 3 * hidden_ + j);
      const double tc = cache.tanh_c(bi, j);
      const double dct = dc(bi, j) + dh(bi, j) * go * (1.0 - tc * tc);
      da(bi, j) = dct * gg * act_deriv(Activation::Sigmoid, gi);
      da(bi, hidden_ + j) = dct * cache.c_prev(bi, j) * act_deriv(Activation::Sigmoid, gf);
      da(bi, 2 * hidden_ + j) = dh(bi, j) * tc * act_deriv(Activation::Sigmoid, go);
      da(bi, 3 * hidden_ + j) = dct * gi * (1.0 - gg * gg);
      dc_prev(bi, j) = dct * gf;
    }
  }
  dwx_.mat2().noalias() += da.mat2().transpose() * cache.x.mat2();
  dwh_.mat2().noalias() += da.mat2().transpose() * cache.h_prev.mat2();
  db_.vec().noalias() += da.mat2().colwise().sum().transpose();
  dx = Tensor({batch, input_});
  dx.mat2().noalias() = da.mat2() * wx_.mat2();
  dh_prev = Tensor({batch, hidden_});
  dh_prev.mat2().noalias() = da.mat2() * wh_.mat2();
}

}  // namespace gridse::nn
