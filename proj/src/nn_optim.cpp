#include "gridse/nn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace gridse::nn {

void AdamState::init_like(const std::vector<Tensor*>& params) {
  m.clear();
  u.clear();
  for (const Tensor* p : params) {
    m.emplace_back(p->shape);
    u.emplace_back(p->shape);
  }
  t = 0;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor*>& grads,
               AdamState& state) {
  if (params.size() != grads.size())
    throw std::runtime_error("adam: parameter/gradient count mismatch");
  if (state.m.size() != params.size()) state.init_like(params);

  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = state.m[i];
    Tensor& u = state.u[i];
    if (!same_shape(p, g) || !same_shape(p, m))
      throw std::runtime_error("adam: shape mismatch at parameter " + std::to_string(i));
    for (long j = 0; j < p.size(); ++j) {
      const double gj = g(j);
      m(j) = state.beta1 * m(j) + (1.0 - state.beta1) * gj;
      u(j) = state.beta2 * u(j) + (1.0 - state.beta2) * gj * gj;
      const double mhat = m(j) / bc1;
      const double uhat = u(j) / bc2;
      p(j) -= state.lr * mhat / (std::sqrt(uhat) + state.eps);
    }
  }
}

LossResult loss(LossKind kind, const Tensor& y, const Tensor& target) {
  if (!same_shape(y, target))
    throw std::runtime_error("loss: shape mismatch " + y.shape_str() + " vs " +
                             target.shape_str());
  const double inv_n = 1.0 / static_cast<double>(y.size());
  LossResult res{0.0, Tensor(y.shape)};
  if (kind == LossKind::MAE) {
    for (long i = 0; i < y.size(); ++i) {
      const double d = y(i) - target(i);
      res.value += std::abs(d) * inv_n;
      res.grad(i) = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
    }
  } else {
    for (long i = 0; i < y.size(); ++i) {
      const double d = y(i) - target(i);
      res.value += d * d * inv_n;
      res.grad(i) = 2.0 * d * inv_n;
    }
  }
  return res;
}

}  // namespace gridse::nn
