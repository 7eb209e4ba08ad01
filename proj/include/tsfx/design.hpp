#pragma once

#include <cstdint>
#include <vector>

#include "tsfx/datagen.hpp"
#include "tsfx/errors.hpp"

namespace tsfx::baselines {

// Flattened window design over (lag, series, feature) with one logical row
// per (time, target series) example. Feature rows are stored once per
// usable time. In the global layout the series coordinate of a column is
// the cyclic offset from the target series: column (lag, d, j) of the row
// for target n reads X[t - lag, (n + d) mod N, j]. That is what lets one
// shared coefficient vector serve every target series. Per-time layouts
// (one model per series) use absolute series indices.
struct DesignMatrix {
  std::vector<double> features;     // times.size() x cols, absolute columns
  std::vector<std::size_t> times;   // time index per feature row
  std::size_t cols = 0;
  std::size_t T_win = 0, N = 0, F = 0;
  std::size_t n_series = 1;  // 1 = one logical row per time, N = global layout
  bool relative = false;     // global layout: series column is an offset

  static std::size_t column_of(std::size_t lag, std::size_t series, std::size_t feature,
                               std::size_t N, std::size_t F) {
    return lag * N * F + series * F + feature;
  }
  std::size_t column_index(std::size_t lag, std::size_t series, std::size_t feature) const {
    return column_of(lag, series, feature, N, F);
  }

  std::size_t row_count() const { return times.size() * n_series; }
  std::size_t time_row(std::size_t logical_row) const { return logical_row / n_series; }
  std::size_t series_of(std::size_t logical_row) const { return logical_row % n_series; }

  // Absolute storage column backing logical column c for target series n.
  std::size_t absolute_column(std::size_t c, std::size_t n) const {
    if (!relative || N <= 1) return c;
    std::size_t j = c % F;
    std::size_t ln = c / F;
    std::size_t delta = ln % N;
    std::size_t lag = ln / N;
    return (lag * N + (n + delta) % N) * F + j;
  }

  double at(std::size_t logical_row, std::size_t col) const {
    return features[time_row(logical_row) * cols +
                    absolute_column(col, series_of(logical_row))];
  }

  // Per-time row pointer; only meaningful for non-relative layouts.
  const double* row(std::size_t logical_row) const {
    return features.data() + time_row(logical_row) * cols;
  }

  // Wraps a plain dense matrix (row per observation, no replication).
  static DesignMatrix from_dense(std::vector<double> values, std::size_t rows, std::size_t cols) {
    if (values.size() != rows * cols) throw ShapeError("from_dense: size mismatch");
    DesignMatrix dm;
    dm.features = std::move(values);
    dm.cols = cols;
    dm.T_win = 1;
    dm.N = 1;
    dm.F = cols;
    dm.n_series = 1;
    dm.times.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) dm.times[i] = i;
    return dm;
  }
};

// Design over times t in [lo, hi): predictors X[t - lag, n', j] for
// lag in [0, T_win). global_rows replicates each time across the N
// target series and switches to offset-relative series columns.
inline DesignMatrix build_design(const datagen::Dataset& ds, std::size_t T_win, std::size_t lo,
                                 std::size_t hi, bool global_rows) {
  const Shape& xs = ds.X.shape();
  std::size_t T = xs[0], N = xs[1], F = xs[2];
  if (lo + 1 < T_win || hi > T || lo > hi)
    throw ParameterError("design range [" + std::to_string(lo) + "," + std::to_string(hi) +
                         ") out of bounds");
  DesignMatrix dm;
  dm.T_win = T_win;
  dm.N = N;
  dm.F = F;
  dm.cols = T_win * N * F;
  dm.n_series = global_rows ? N : 1;
  dm.relative = global_rows;
  dm.times.reserve(hi - lo);
  dm.features.resize((hi - lo) * dm.cols);
  const double* px = ds.X.raw();
  for (std::size_t t = lo; t < hi; ++t) {
    double* out = dm.features.data() + (t - lo) * dm.cols;
    for (std::size_t lag = 0; lag < T_win; ++lag)
      std::copy(px + (t - lag) * N * F, px + (t - lag + 1) * N * F, out + lag * N * F);
    dm.times.push_back(t);
  }
  return dm;
}

// Targets aligned with the logical rows: Y[t, n] for global layouts,
// Y[t, series] for per-time layouts.
inline std::vector<double> design_targets(const datagen::Dataset& ds, const DesignMatrix& dm,
                                          std::size_t series = 0) {
  std::vector<double> y(dm.row_count());
  const double* py = ds.Y.raw();
  std::size_t N = ds.Y.extent(1);
  for (std::size_t r = 0; r < y.size(); ++r) {
    std::size_t t = dm.times[dm.time_row(r)];
    std::size_t n = dm.n_series > 1 ? dm.series_of(r) : series;
    y[r] = py[t * N + n];
  }
  return y;
}

}  // namespace tsfx::baselines
