#pragma once

#include "gridse/nn/layers.hpp"
#include "gridse/nn/tensor.hpp"
#include "gridse/rng.hpp"

namespace gridse::nn {

/// Elman cell: s_t = f(Wx x_t + Ws s_{t-1} + b). Inputs and states are
/// batched as (B, dim) matrices.
class SimpleRnnCell {
 public:
  SimpleRnnCell(long input, long hidden, Activation act = Activation::Tanh);

  long input_size() const { return input_; }
  long hidden_size() const { return hidden_; }
  Activation activation() const { return act_; }

  void init_params(Rng& rng);
  std::vector<Tensor*> parameters() { return {&wx_, &ws_, &b_}; }
  std::vector<Tensor*> gradients() { return {&dwx_, &dws_, &db_}; }

  struct Cache {
    Tensor x, s_prev, s;
  };

  Tensor step(const Tensor& x, const Tensor& s_prev) const;
  Tensor step(const Tensor& x, const Tensor& s_prev, Cache& cache) const;

  /// Accumulates parameter gradients; ds is the total gradient arriving at
  /// the produced state (upstream plus through-time).
  void backward_step(const Cache& cache, const Tensor& ds, Tensor& dx,
                     Tensor& ds_prev);

  Tensor wx_, ws_, b_, dwx_, dws_, db_;

 private:
  long input_, hidden_;
  Activation act_;
};

/// Standard four-gate LSTM (sigmoid i/f/o, tanh candidate); the forget
/// gate bias starts at one.
class LstmCell {
 public:
  LstmCell(long input, long hidden);

  long input_size() const { return input_; }
  long hidden_size() const { return hidden_; }

  void init_params(Rng& rng);
  std::vector<Tensor*> parameters() { return {&wx_, &wh_, &b_}; }
  std::vector<Tensor*> gradients() { return {&dwx_, &dwh_, &db_}; }

  struct Cache {
    Tensor x, h_prev, c_prev;
    Tensor gates;  // (B, 4H) post-activation, order [i, f, o, g]
    Tensor c, tanh_c;
  };

  void step(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev, Tensor& h_out,
            Tensor& c_out, Cache* cache) const;

  void backward_step(const Cache& cache, const Tensor& dh, const Tensor& dc,
                     Tensor& dx, Tensor& dh_prev, Tensor& dc_prev);

  Tensor wx_, wh_, b_, dwx_, dwh_, db_;  // wx (4H, in), wh (4H, H), b (4H)

 private:
  long input_, hidden_;
};

}  // namespace gridse::nn
