#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tsfx/ops.hpp"
#include "tsfx/rng.hpp"
#include "tsfx/tensor.hpp"

namespace tsfx::nn {

// Dense layer y = x W + b applied over the last axis of x.
struct Linear {
  Tensor W;  // (in, out)
  Tensor b;  // (out)

  Linear() = default;

  Linear(std::size_t in, std::size_t out, Rng& rng) {
    // Glorot-normal weights, zero bias.
    double stddev = std::sqrt(2.0 / static_cast<double>(in + out));
    W = Tensor::randn({in, out}, rng, stddev, true);
    b = Tensor::zeros({out}, true);
  }

  Tensor apply(const Tensor& x) const {
    std::size_t in = W.extent(0), out = W.extent(1);
    if (x.rank() == 2) return add(matmul(x, W), b);
    Shape os = x.shape();
    os.back() = out;
    Tensor flat = reshape(x, {x.numel() / in, in});
    return reshape(add(matmul(flat, W), b), std::move(os));
  }

  void collect(std::vector<Tensor*>& ps) {
    ps.push_back(&W);
    ps.push_back(&b);
  }

  std::size_t param_count() const { return W.numel() + b.numel(); }
};

}  // namespace tsfx::nn
