#pragma once

#include <vector>

#include "gridse/nn/tensor.hpp"

namespace gridse::nn {

/// Bias-corrected Adam. One shared step counter; moments are keyed by
/// position in the parameter list.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<Tensor> m;  // first moments
  std::vector<Tensor> u;  // second moments

  void init_like(const std::vector<Tensor*>& params);
};

/// m <- b1 m + (1-b1) g;  u <- b2 u + (1-b2) g^2;
/// theta <- theta - lr * (m / (1-b1^t)) / (sqrt(u / (1-b2^t)) + eps).
/// The counter increments exactly once per call.
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads,
               AdamState& state);

enum class LossKind { MAE, MSE };

struct LossResult {
  double value;
  Tensor grad;  // dLoss/dy, same shape as y
};

/// MAE uses the subgradient sign(y - t)/n with 0 at exact ties.
LossResult loss(LossKind kind, const Tensor& y, const Tensor& target);

}  // namespace gridse::nn
