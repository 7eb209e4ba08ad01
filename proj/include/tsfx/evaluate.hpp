#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsfx/datagen.hpp"
#include "tsfx/stats.hpp"

namespace tsfx::eval {

// Out-of-sample scores of one prediction set. A correlation that is
// undefined (constant series) is reported missing, never as 0.
struct EvalResult {
  std::optional<double> corr_optimal;
  std::optional<double> corr_target;
  std::vector<std::pair<std::string, std::optional<double>>> corr_per_effect;
  std::size_t n_points = 0;
};

// predictions: (T_test, N) aligned to times [split_index, T).
inline EvalResult evaluate(const Tensor& predictions, const datagen::Dataset& ds) {
  std::size_t T = ds.X.extent(0), N = ds.X.extent(1);
  std::size_t T_test = T - ds.split_index;
  if (predictions.rank() != 2 || predictions.shape()[0] != T_test ||
      predictions.shape()[1] != N)
    throw ContractError("predictions must cover the test range: expected (" +
                        std::to_string(T_test) + "," + std::to_string(N) + "), got " +
                        shape_str(predictions.shape()));

  auto tail = [&](const Tensor& t) {
    return std::vector<double>(t.data().begin() + ds.split_index * N, t.data().end());
  };
  auto corr = [&](const std::vector<double>& truth) -> std::optional<double> {
    try {
      return stats::pearson(predictions.data(), truth);
    } catch (const DomainError&) {
      return std::nullopt;
    }
  };

  EvalResult r;
  r.n_points = predictions.numel();
  r.corr_optimal = corr(tail(ds.Y_opt));
  r.corr_target = corr(tail(ds.Y));
  for (const auto& [label, component] : ds.per_effect)
    r.corr_per_effect.emplace_back(label, corr(tail(component)));
  return r;
}

}  // namespace tsfx::eval
