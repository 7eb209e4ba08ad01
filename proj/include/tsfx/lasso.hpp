#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "tsfx/design.hpp"
#include "tsfx/errors.hpp"

namespace tsfx::baselines {

inline double soft_threshold(double z, double lam) {
  if (lam < 0.0) throw ParameterError("soft_threshold needs lam >= 0");
  double a = std::abs(z) - lam;
  if (a <= 0.0) return 0.0;
  return z > 0.0 ? a : -a;
}

struct LassoModel {
  std::vector<double> betas;  // original scale, one per design column
  double intercept = 0.0;
  double lambda = 0.0;
  std::vector<std::pair<double, double>> cv_curve;  // (lambda, mean validation MSE)
  bool converged = true;
  std::vector<double> sweep_objectives;  // standardized objective after each sweep
};

namespace detail {

// Coordinate descent on a subset of logical rows. Columns are standardized
// internally (population moments over the subset), so the per-coordinate
// curvature is exactly 1 and the update is a single soft-threshold.
class LassoSolver {
 public:
  LassoSolver(const DesignMatrix& dm, const std::vector<double>& y,
              std::vector<std::uint32_t> rows)
      : dm_(dm), rows_(std::move(rows)) {
    std::size_t m = rows_.size();
    if (m < 2) throw ContractError("lasso needs at least two rows");
    tr_.resize(m);
    sn_.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      tr_[i] = static_cast<std::uint32_t>(dm_.time_row(rows_[i]));
      sn_[i] = static_cast<std::uint32_t>(dm_.series_of(rows_[i]));
    }
    y_.resize(m);
    for (std::size_t i = 0; i < m; ++i) y_[i] = y[rows_[i]];
    ymean_ = 0.0;
    for (double v : y_) ymean_ += v;
    ymean_ /= static_cast<double>(m);

    mu_.assign(dm.cols, 0.0);
    inv_sd_.assign(dm.cols, 0.0);
    std::vector<double> col(m);
    for (std::size_t j = 0; j < dm.cols; ++j) {
      gather_column(j, col);
      double s1 = 0.0, s2 = 0.0;
      for (double v : col) {
        s1 += v;
        s2 += v * v;
      }
      double mu = s1 / static_cast<double>(m);
      double var = s2 / static_cast<double>(m) - mu * mu;
      mu_[j] = mu;
      inv_sd_[j] = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;  // constant columns stay out
    }
    beta_.assign(dm.cols, 0.0);
    res_ = y_;
    for (double& v : res_) v -= ymean_;
  }

  double lambda_max() const {
    double mx = 0.0;
    std::size_t m = rows_.size();
    std::vector<double> col(m);
    for (std::size_t j = 0; j < dm_.cols; ++j) {
      if (inv_sd_[j] == 0.0) continue;
      gather_column(j, col);
      double dot = 0.0;
      for (std::size_t i = 0; i < m; ++i) dot += (col[i] - mu_[j]) * res_[i];
      mx = std::max(mx, std::abs(dot) * inv_sd_[j] / static_cast<double>(m));
    }
    return mx;
  }

  // Fits at `lambda`, warm-starting from current coefficients. Full sweeps
  // alternate with active-set sweeps until the largest coefficient change
  // falls below tol.
  std::vector<double> fit(double lambda, double tol, std::size_t max_sweeps, bool& converged) {
    std::vector<double> objectives;
    converged = false;
    std::size_t sweeps = 0;
    while (sweeps < max_sweeps) {
      double delta = sweep(lambda, /*active_only=*/false);
      ++sweeps;
      objectives.push_back(objective(lambda));
      if (delta < tol) {
        converged = true;
        break;
      }
      while (sweeps < max_sweeps) {
        double d2 = sweep(lambda, /*active_only=*/true);
        ++sweeps;
        objectives.push_back(objective(lambda));
        if (d2 < tol) break;
      }
    }
    return objectives;
  }

  // Validation MSE of the current coefficients on a disjoint row set.
  double mse_on(const std::vector<std::uint32_t>& rows, const std::vector<double>& y) const {
    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < dm_.cols; ++j)
      if (beta_[j] != 0.0) active.push_back(j);
    double se = 0.0;
    for (std::uint32_t r : rows) {
      double pred = ymean_;
      for (std::size_t j : active)
        pred += beta_[j] * (dm_.at(r, j) - mu_[j]) * inv_sd_[j];
      double d = y[r] - pred;
      se += d * d;
    }
    return se / static_cast<double>(rows.size());
  }

  // Maps the standardized coefficients back to the original scale.
  void export_model(LassoModel& m) const {
    m.betas.assign(dm_.cols, 0.0);
    m.intercept = ymean_;
    for (std::size_t j = 0; j < dm_.cols; ++j) {
      if (beta_[j] == 0.0) continue;
      m.betas[j] = beta_[j] * inv_sd_[j];
      m.intercept -= m.betas[j] * mu_[j];
    }
  }

 private:
  void gather_column(std::size_t j, std::vector<double>& out) const {
    const double* f = dm_.features.data();
    std::size_t cols = dm_.cols;
    if (dm_.n_series <= 1 || !dm_.relative) {
      for (std::size_t i = 0; i < rows_.size(); ++i) out[i] = f[tr_[i] * cols + j];
      return;
    }
    std::size_t rep = dm_.n_series;
    abs_cols_.resize(rep);
    for (std::size_t n = 0; n < rep; ++n) abs_cols_[n] = dm_.absolute_column(j, n);
    for (std::size_t i = 0; i < rows_.size(); ++i)
      out[i] = f[tr_[i] * cols + abs_cols_[sn_[i]]];
  }

  double sweep(double lambda, bool active_only) {
    std::size_t m = rows_.size();
    double inv_m = 1.0 / static_cast<double>(m);
    double max_delta = 0.0;
    std::vector<double>& col = scratch_;
    col.resize(m);
    for (std::size_t j = 0; j < dm_.cols; ++j) {
      if (inv_sd_[j] == 0.0) continue;
      if (active_only && beta_[j] == 0.0) continue;
      gather_column(j, col);
      double dot = 0.0;
      for (std::size_t i = 0; i < m; ++i) dot += (col[i] - mu_[j]) * res_[i];
      dot *= inv_sd_[j] * inv_m;
      double next = soft_threshold(dot + beta_[j], lambda);
      double delta = next - beta_[j];
      if (delta != 0.0) {
        double scaled = delta * inv_sd_[j];
        for (std::size_t i = 0; i < m; ++i) res_[i] -= scaled * (col[i] - mu_[j]);
        beta_[j] = next;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    return max_delta;
  }

  double objective(double lambda) const {
    double sse = 0.0;
    for (double v : res_) sse += v * v;
    double l1 = 0.0;
    for (double b : beta_) l1 += std::abs(b);
    return 0.5 * sse / static_cast<double>(rows_.size()) + lambda * l1;
  }

  const DesignMatrix& dm_;
  std::vector<std::uint32_t> rows_, tr_, sn_;
  std::vector<double> y_;
  std::vector<double> mu_, inv_sd_;
  std::vector<double> beta_;
  std::vector<double> res_;
  double ymean_ = 0.0;
  mutable std::vector<std::size_t> abs_cols_;
  std::vector<double> scratch_;
};

inline std::vector<std::uint32_t> all_rows(const DesignMatrix& dm) {
  std::vector<std::uint32_t> rows(dm.row_count());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<std::uint32_t>(i);
  return rows;
}

}  // namespace detail

// Smallest lambda that keeps every coefficient at zero.
inline double lasso_lambda_max(const DesignMatrix& dm, const std::vector<double>& y) {
  return detail::LassoSolver(dm, y, detail::all_rows(dm)).lambda_max();
}

// Descending log-spaced grid from lambda_max down to lambda_max * ratio.
inline std::vector<double> lasso_grid(const DesignMatrix& dm, const std::vector<double>& y,
                                      std::size_t count = 15, double ratio = 1e-3) {
  double top = lasso_lambda_max(dm, y);
  if (top <= 0.0) top = 1e-3;
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    double frac = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    grid[i] = top * std::pow(ratio, frac);
  }
  return grid;
}

// Cyclic coordinate descent for (1/2m)||y - Xb||^2 + lambda*||b||_1 with
// internally standardized columns; coefficients returned on the original
// scale.
inline LassoModel fit_lasso(const DesignMatrix& dm, const std::vector<double>& y, double lambda,
                            double tol = 1e-7, std::size_t max_sweeps = 1000) {
  if (y.size() != dm.row_count()) throw ShapeError("fit_lasso: target length mismatch");
  detail::LassoSolver solver(dm, y, detail::all_rows(dm));
  LassoModel m;
  m.lambda = lambda;
  m.sweep_objectives = solver.fit(lambda, tol, max_sweeps, m.converged);
  solver.export_model(m);
  return m;
}

// 5-fold cross-validation over contiguous time blocks (a fold is a block
// of times with all their series rows). Returns the lambda minimizing the
// mean validation MSE; ties resolve to the larger lambda. The grid is
// traversed in descending order with warm starts.
inline double cross_validate_lasso(const DesignMatrix& dm, const std::vector<double>& y,
                                   std::vector<double> grid, std::size_t folds = 5,
                                   std::vector<std::pair<double, double>>* curve = nullptr,
                                   double tol = 1e-7, std::size_t max_sweeps = 1000) {
  if (grid.empty()) throw ParameterError("cross_validate_lasso needs a non-empty grid");
  std::sort(grid.begin(), grid.end(), std::greater<double>());
  std::size_t UT = dm.times.size();
  folds = std::min(folds, UT);
  std::vector<double> mse(grid.size(), 0.0);

  for (std::size_t f = 0; f < folds; ++f) {
    std::size_t t_lo = f * UT / folds, t_hi = (f + 1) * UT / folds;
    std::vector<std::uint32_t> train_rows, val_rows;
    for (std::size_t r = 0; r < dm.row_count(); ++r) {
      std::size_t tr = dm.time_row(r);
      if (tr >= t_lo && tr < t_hi)
        val_rows.push_back(static_cast<std::uint32_t>(r));
      else
        train_rows.push_back(static_cast<std::uint32_t>(r));
    }
    detail::LassoSolver solver(dm, y, std::move(train_rows));
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      bool conv = false;
      solver.fit(grid[gi], tol, max_sweeps, conv);
      mse[gi] += solver.mse_on(val_rows, y);
    }
  }
  for (double& v : mse) v /= static_cast<double>(folds);

  std::size_t best = 0;
  for (std::size_t gi = 1; gi < grid.size(); ++gi)
    if (mse[gi] < mse[best]) best = gi;  // strict: ties keep the larger lambda
  if (curve) {
    curve->clear();
    for (std::size_t gi = 0; gi < grid.size(); ++gi) curve->emplace_back(grid[gi], mse[gi]);
  }
  return grid[best];
}

// Cross-validate, then refit on all rows at the chosen lambda.
inline LassoModel fit_lasso_cv(const DesignMatrix& dm, const std::vector<double>& y,
                               std::vector<double> grid = {}, std::size_t folds = 5,
                               double tol = 1e-7, std::size_t max_sweeps = 1000) {
  if (grid.empty()) grid = lasso_grid(dm, y);
  std::vector<std::pair<double, double>> curve;
  double lambda = cross_validate_lasso(dm, y, grid, folds, &curve, tol, max_sweeps);
  LassoModel m = fit_lasso(dm, y, lambda, tol, max_sweeps);
  m.cv_curve = std::move(curve);
  return m;
}

inline std::vector<double> lasso_predict(const DesignMatrix& dm, const LassoModel& m) {
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < dm.cols; ++j)
    if (m.betas[j] != 0.0) active.push_back(j);
  std::vector<double> out(dm.row_count());
  for (std::size_t r = 0; r < out.size(); ++r) {
    double pred = m.intercept;
    for (std::size_t j : active) pred += m.betas[j] * dm.at(r, j);
    out[r] = pred;
  }
  return out;
}

}  // namespace tsfx::baselines
