#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tsfx/autograd.hpp"
#include "tsfx/tensor.hpp"

namespace tsfx {

// Adam moment estimates plus hyperparameters. m/v track the parameter list
// positionally; step increases by exactly 1 per update.
struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update. Parameters are rebound to fresh tensors;
// a parameter without a gradient entry gets a zero gradient.
inline void adam_step(std::vector<Tensor*>& params, const GradientMap& grads, AdamState& state) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i]->numel(), 0.0);
      state.v[i].assign(params[i]->numel(), 0.0);
    }
  }
  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor* g = grads.find(p.id());
    std::vector<double> next(p.data());
    std::vector<double>& m = state.m[i];
    std::vector<double>& v = state.v[i];
    for (std::size_t j = 0; j < next.size(); ++j) {
      double gj = g ? g->data()[j] : 0.0;
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      next[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
    p = Tensor(p.shape(), std::move(next), true);
  }
}

}  // namespace tsfx
