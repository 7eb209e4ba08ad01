#pragma once

#include <utility>
#include <vector>

#include "tsfx/datagen.hpp"
#include "tsfx/model.hpp"

namespace tsfx::nn {

// Batch-averaged attention matrices over the test range, one per
// attention layer in stack order: (T_win x T_win) for temporal layers,
// (N x N) for cross-sectional ones. Probabilities are averaged over all
// test windows and over heads; dropout is off.
inline std::vector<std::pair<BlockKind, Tensor>> extract_attention(TransformerModel& model,
                                                                   const datagen::Dataset& ds,
                                                                   std::size_t batch_size = 256) {
  std::size_t lo = ds.split_index;
  std::size_t hi = ds.X.extent(0);
  std::vector<std::vector<double>> sums;
  std::vector<Shape> shapes;
  double total_weight = 0.0;

  for (std::size_t off = lo; off < hi; off += batch_size) {
    std::size_t stop = std::min(hi, off + batch_size);
    std::vector<std::size_t> chunk(stop - off);
    for (std::size_t i = 0; i < chunk.size(); ++i) chunk[i] = off + i;
    auto [x, y] = datagen::gather_windows(ds, ds.spec.T_win, chunk);
    std::vector<Tensor> capture;
    model.forward_capture(x, /*training=*/false, 0, &capture);
    double w = static_cast<double>(chunk.size());
    if (sums.empty()) {
      sums.resize(capture.size());
      shapes.resize(capture.size());
      for (std::size_t li = 0; li < capture.size(); ++li) {
        sums[li].assign(capture[li].numel(), 0.0);
        shapes[li] = capture[li].shape();
      }
    }
    for (std::size_t li = 0; li < capture.size(); ++li) {
      const double* p = capture[li].raw();
      for (std::size_t i = 0; i < sums[li].size(); ++i) sums[li][i] += w * p[i];
    }
    total_weight += w;
  }

  std::vector<std::pair<BlockKind, Tensor>> out;
  for (std::size_t li = 0; li < sums.size(); ++li) {
    std::size_t H = shapes[li][0], L = shapes[li][1], L2 = shapes[li][2];
    std::vector<double> avg(L * L2, 0.0);
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t i = 0; i < L * L2; ++i) avg[i] += sums[li][h * L * L2 + i];
    double inv = 1.0 / (total_weight * static_cast<double>(H));
    for (double& v : avg) v *= inv;
    out.emplace_back(model.blocks[li].kind, Tensor({L, L2}, std::move(avg)));
  }
  return out;
}

}  // namespace tsfx::nn
