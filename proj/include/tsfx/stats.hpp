#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tsfx/errors.hpp"

namespace tsfx::stats {

// Continued fraction for the regularized incomplete beta (modified Lentz).
inline double ibeta_cf(double a, double b, double x) {
  const double fpmin = 1e-300;
  const double eps = 1e-15;
  const int max_iter = 500;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  throw DomainError("incomplete beta continued fraction did not converge");
}

// Regularized incomplete beta I_x(a, b).
inline double reg_inc_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw DomainError("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                 b * std::log(1.0 - x);
  double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * ibeta_cf(a, b, x) / a;
  return 1.0 - bt * ibeta_cf(b, a, 1.0 - x) / b;
}

// Student-t CDF via I_x(df/2, 1/2) with x = df / (df + t^2). Above
// df = 1e6 the continued fraction converges too slowly and the normal
// limit is accurate to O(1/df), so we switch over.
inline double student_t_cdf(double t, double df) {
  if (df <= 0.0) throw DomainError("student_t_cdf needs df > 0");
  if (t == 0.0) return 0.5;
  if (df > 1e6) return 0.5 * std::erfc(-t * 0.7071067811865475244);
  double x = df / (df + t * t);
  double tail = 0.5 * reg_inc_beta(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

// Sample Pearson correlation. Throws on constant input so an undefined
// correlation is reported as missing rather than 0.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ContractError("pearson: length mismatch");
  std::size_t n = a.size();
  if (n < 2) throw ContractError("pearson needs at least two points");
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double da = a[i] - ma, db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa == 0.0 || sbb == 0.0)
    throw DomainError("pearson undefined: constant input series");
  return sab / std::sqrt(saa * sbb);
}

inline double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Unbiased sample variance.
inline double sample_var(const std::vector<double>& v) {
  double m = sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

enum class Alternative { Greater, TwoSided };

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

// Welch two-sample t test with Welch-Satterthwaite degrees of freedom.
// alternative = Greater tests mean(a) > mean(b). Both samples constant
// with equal means gives p = 1 for Greater (no evidence either way).
inline WelchResult welch_test(const std::vector<double>& a, const std::vector<double>& b,
                              Alternative alternative = Alternative::Greater) {
  if (a.size() < 2 || b.size() < 2) throw ContractError("welch_test needs >= 2 samples per side");
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double ma = sample_mean(a), mb = sample_mean(b);
  double va = sample_var(a), vb = sample_var(b);
  double se2 = va / na + vb / nb;

  WelchResult r;
  if (se2 == 0.0) {
    if (ma == mb) {
      r.t = 0.0;
      r.df = na + nb - 2.0;
      r.p = 1.0;
      if (alternative == Alternative::TwoSided) r.p = 1.0;
      return r;
    }
    r.t = ma > mb ? std::numeric_limits<double>::infinity()
                  : -std::numeric_limits<double>::infinity();
    r.df = na + nb - 2.0;
    r.p = alternative == Alternative::Greater ? (ma > mb ? 0.0 : 1.0) : 0.0;
    return r;
  }

  r.t = (ma - mb) / std::sqrt(se2);
  double num = se2 * se2;
  double den = (va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0);
  r.df = num / den;
  double cdf = student_t_cdf(r.t, r.df);
  if (alternative == Alternative::Greater)
    r.p = 1.0 - cdf;
  else
    r.p = 2.0 * std::min(cdf, 1.0 - cdf);
  return r;
}

}  // namespace tsfx::stats
