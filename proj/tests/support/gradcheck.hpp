#pragma once

#include <functional>
#include <vector>

#include "tsfx/autograd.hpp"
#include "tsfx/ops.hpp"
#include "tsfx/tensor.hpp"

namespace gradcheck {

// Central finite differences against the tape gradients for an arbitrary
// scalar-valued function of a list of input tensors. Error is relative to
// max(1, |analytic|, |numeric|) so near-zero gradients are judged on an
// absolute scale.
inline double max_rel_error(
    const std::function<tsfx::Tensor(const std::vector<tsfx::Tensor>&)>& f,
    std::vector<tsfx::Tensor> inputs, double h = 1e-5) {
  using namespace tsfx;
  for (auto& t : inputs) t = t.with_requires_grad(true);

  Tape tape;
  GradientMap grads;
  {
    Tape::Scope scope(&tape);
    Tensor loss = f(inputs);
    grads = backward(loss, tape);
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor& x = inputs[i];
    const Tensor& g = grads.at(x.id());
    for (std::size_t j = 0; j < x.numel(); ++j) {
      auto eval_at = [&](double delta) {
        std::vector<double> d(x.data());
        d[j] += delta;
        std::vector<Tensor> probe(inputs);
        probe[i] = Tensor(x.shape(), std::move(d));
        return f(probe).value();
      };
      double fd = (eval_at(h) - eval_at(-h)) / (2.0 * h);
      double ad = g.data()[j];
      double denom = std::max({1.0, std::abs(fd), std::abs(ad)});
      worst = std::max(worst, std::abs(fd - ad) / denom);
    }
  }
  return worst;
}

// Scalarizes a tensor-valued op via a fixed random projection so every
// output element contributes to the checked gradient.
inline std::function<tsfx::Tensor(const std::vector<tsfx::Tensor>&)> project(
    std::function<tsfx::Tensor(const std::vector<tsfx::Tensor>&)> op, tsfx::Tensor weights) {
  return [op = std::move(op), weights = std::move(weights)](const std::vector<tsfx::Tensor>& in) {
    return tsfx::sum(tsfx::mul(op(in), weights));
  };
}

}  // namespace gradcheck
