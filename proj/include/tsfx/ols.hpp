#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "tsfx/design.hpp"
#include "tsfx/errors.hpp"
#include "tsfx/rng.hpp"
#include "tsfx/stats.hpp"

namespace tsfx::baselines {

// Expected out-of-sample correlation of a per-series OLS fit to the
// optimal predictor: rho / sqrt(rho^2 + (1 - rho^2) * gamma / (1 - gamma)),
// where gamma is the feature-to-observation ratio.
inline double theo_correlation(double rho, double gamma) {
  if (rho < 0.0 || rho >= 1.0)
    throw DomainError("theo_correlation: rho = " + std::to_string(rho) + " outside [0, 1)");
  if (gamma < 0.0 || gamma >= 1.0)
    throw DomainError("theo_correlation: gamma = " + std::to_string(gamma) +
                      " outside [0, 1) (formula pole at 1)");
  if (rho == 0.0) return 0.0;
  if (gamma == 0.0) return rho;
  return rho / std::sqrt(rho * rho + (1.0 - rho * rho) * gamma / (1.0 - gamma));
}

struct OlsModel {
  std::vector<double> beta;
  bool rank_deficient = false;  // minimum-norm fallback was used
};

// Least squares via a rank-revealing complete orthogonal decomposition:
// full-rank designs get the unique solution, rank-deficient ones the
// minimum-norm solution with the flag set.
inline OlsModel fit_ols(const double* x, std::size_t rows, std::size_t cols,
                        const double* y) {
  using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const EMat> X(x, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  Eigen::Map<const Eigen::VectorXd> Y(y, static_cast<Eigen::Index>(rows));
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
  Eigen::VectorXd beta = cod.solve(Y);
  OlsModel m;
  m.beta.assign(beta.data(), beta.data() + cols);
  m.rank_deficient = cod.rank() < static_cast<Eigen::Index>(cols);
  return m;
}

inline OlsModel fit_ols(const std::vector<double>& x, std::size_t rows, std::size_t cols,
                        const std::vector<double>& y) {
  if (x.size() != rows * cols || y.size() != rows)
    throw ShapeError("fit_ols: data sizes do not match rows x cols");
  return fit_ols(x.data(), rows, cols, y.data());
}

inline std::vector<double> ols_predict(const double* x, std::size_t rows, std::size_t cols,
                                       const OlsModel& m) {
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = x + r * cols;
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += row[c] * m.beta[c];
    out[r] = s;
  }
  return out;
}

// Per-series OLS over a per-time design (the TheoC empirical counterpart).
inline OlsModel fit_ols_series(const DesignMatrix& dm, const datagen::Dataset& ds,
                               std::size_t series) {
  std::vector<double> y = design_targets(ds, dm, series);
  return fit_ols(dm.features.data(), dm.times.size(), dm.cols, y.data());
}

// Per-series OLS for every target series at once: the predictor rows are
// shared, so the normal-equation factorization happens once and only the
// right-hand side changes per series. Falls back to the rank-revealing
// solver when the gram matrix is not positive definite.
inline std::vector<OlsModel> fit_ols_all_series(const DesignMatrix& dm,
                                                const datagen::Dataset& ds) {
  using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  std::size_t rows = dm.times.size(), cols = dm.cols, N = ds.X.extent(1);
  Eigen::Map<const EMat> X(dm.features.data(), static_cast<Eigen::Index>(rows),
                           static_cast<Eigen::Index>(cols));
  Eigen::MatrixXd gram = X.transpose() * X;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  std::vector<OlsModel> models;
  for (std::size_t n = 0; n < N; ++n) {
    std::vector<double> y = design_targets(ds, dm, n);
    if (llt.info() == Eigen::Success) {
      Eigen::Map<const Eigen::VectorXd> Y(y.data(), static_cast<Eigen::Index>(rows));
      Eigen::VectorXd beta = llt.solve(X.transpose() * Y);
      OlsModel m;
      m.beta.assign(beta.data(), beta.data() + cols);
      models.push_back(std::move(m));
    } else {
      models.push_back(fit_ols(dm.features.data(), rows, cols, y.data()));
    }
  }
  return models;
}

// Monte Carlo version of the setting behind theo_correlation: random
// i.i.d. design, equal-weight linear signal at total strength rho, OLS fit
// on T rows, correlation to the noise-free target on T_o fresh rows.
// Returns the mean over replicates.
inline double ols_oos_mc(double rho, std::size_t n_features, std::size_t T, std::size_t T_o,
                         std::size_t replicates, std::uint64_t seed) {
  double total = 0.0;
  for (std::size_t rep = 0; rep < replicates; ++rep) {
    Rng rng(derive_seed(seed, rep));
    double w = rho / std::sqrt(static_cast<double>(n_features));
    std::vector<double> X(T * n_features), Xo(T_o * n_features);
    for (double& v : X) v = rng.next_gauss();
    for (double& v : Xo) v = rng.next_gauss();
    std::vector<double> y(T), ytil_o(T_o);
    double noise = std::sqrt(1.0 - rho * rho);
    for (std::size_t t = 0; t < T; ++t) {
      double s = 0.0;
      for (std::size_t j = 0; j < n_features; ++j) s += w * X[t * n_features + j];
      y[t] = s + noise * rng.next_gauss();
    }
    for (std::size_t t = 0; t < T_o; ++t) {
      double s = 0.0;
      for (std::size_t j = 0; j < n_features; ++j) s += w * Xo[t * n_features + j];
      ytil_o[t] = s;
    }
    OlsModel m = fit_ols(X.data(), T, n_features, y.data());
    std::vector<double> pred = ols_predict(Xo.data(), T_o, n_features, m);
    total += stats::pearson(pred, ytil_o);
  }
  return total / static_cast<double>(replicates);
}

}  // namespace tsfx::baselines
