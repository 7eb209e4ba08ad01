#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tsfx/errors.hpp"
#include "tsfx/rng.hpp"
#include "tsfx/tensor.hpp"

namespace tsfx::datagen {

// Substream tags hanging off DatasetSpec::seed.
inline constexpr std::uint64_t kBaseStream = 1;
inline constexpr std::uint64_t kNoiseStream = 2;
inline constexpr std::uint64_t kEffectStream = 3;

enum class EffectKind { Lin, TSShift, CSShift, FeaNonlin, TSCSShift, TSNonlin, CSNonlin };

inline std::string to_string(EffectKind k) {
  switch (k) {
    case EffectKind::Lin: return "Lin";
    case EffectKind::TSShift: return "TS-Shift";
    case EffectKind::CSShift: return "CS-Shift";
    case EffectKind::FeaNonlin: return "Fea-Nonlin";
    case EffectKind::TSCSShift: return "TSCS-Shift";
    case EffectKind::TSNonlin: return "TS-Nonlin";
    case EffectKind::CSNonlin: return "CS-Nonlin";
  }
  throw SpecError("unknown effect kind");
}

inline EffectKind effect_kind_from_string(const std::string& s) {
  if (s == "Lin") return EffectKind::Lin;
  if (s == "TS-Shift") return EffectKind::TSShift;
  if (s == "CS-Shift") return EffectKind::CSShift;
  if (s == "Fea-Nonlin") return EffectKind::FeaNonlin;
  if (s == "TSCS-Shift") return EffectKind::TSCSShift;
  if (s == "TS-Nonlin") return EffectKind::TSNonlin;
  if (s == "CS-Nonlin") return EffectKind::CSNonlin;
  throw SpecError("unknown effect kind '" + s + "'");
}

// One additive component of the optimal predictor. weights / ts_shifts /
// cs_shifts may be empty (resolved to the documented defaults), sized per
// term (shared across series), or sized term*N for full (term, series)
// control. For Fea-Nonlin a "term" is a consecutive pair of active
// features combined as x_a * sign(x_b); for the other kinds it is one
// active feature.
struct EffectSpec {
  EffectKind kind = EffectKind::Lin;
  std::vector<std::size_t> active_features;
  std::vector<double> weights;
  std::vector<long> ts_shifts;
  std::vector<long> cs_shifts;
  std::string nonlinear_kind = "sign_pair";
  double effect_weight = 0.0;  // 0 -> resolved to rho / sqrt(#effects)
};

struct DatasetSpec {
  std::size_t T_train = 2500;
  std::size_t T_test = 1500;
  std::size_t T_win = 10;
  std::size_t N = 10;
  std::size_t F = 20;
  double rho = 0.1;
  std::vector<EffectSpec> effects;
  std::uint64_t seed = 0;

  std::size_t T() const { return T_train + T_test; }
};

// Generated data plus everything needed to score models against the
// ground truth.
struct Dataset {
  Tensor X;      // (T, N, F)
  Tensor Y;      // (T, N)
  Tensor Y_opt;  // (T, N)
  std::vector<std::pair<std::string, Tensor>> per_effect;  // label -> (T, N)
  std::size_t split_index = 0;  // first test row
  std::size_t warmup = 0;       // rows at the start that shifted reads clamp over
  DatasetSpec spec;             // resolved spec (explicit weights/shifts)

  const Tensor* find_effect(const std::string& label) const {
    for (const auto& [name, t] : per_effect)
      if (name == label) return &t;
    return nullptr;
  }
};

namespace detail {

inline bool needs_ts_shift(EffectKind k) {
  return k == EffectKind::TSShift || k == EffectKind::TSCSShift;
}
inline bool needs_cs_shift(EffectKind k) {
  return k == EffectKind::CSShift || k == EffectKind::TSCSShift;
}

inline std::size_t term_count(const EffectSpec& e) {
  if (e.kind == EffectKind::FeaNonlin) {
    if (e.active_features.size() < 2 || e.active_features.size() % 2 != 0)
      throw SpecError("Fea-Nonlin needs an even number (>= 2) of active features, got " +
                      std::to_string(e.active_features.size()));
    return e.active_features.size() / 2;
  }
  return e.active_features.size();
}

// Expands a field that may be empty / per-term / per-(term, series).
template <typename T>
std::vector<T> expand_field(const std::vector<T>& raw, std::size_t terms, std::size_t N,
                            T default_value, const char* name) {
  std::vector<T> full(terms * N);
  if (raw.empty()) {
    std::fill(full.begin(), full.end(), default_value);
  } else if (raw.size() == terms) {
    for (std::size_t j = 0; j < terms; ++j)
      for (std::size_t n = 0; n < N; ++n) full[j * N + n] = raw[j];
  } else if (raw.size() == terms * N) {
    full = raw;
  } else {
    throw SpecError(std::string(name) + " has " + std::to_string(raw.size()) +
                    " entries; expected 0, " + std::to_string(terms) + " or " +
                    std::to_string(terms * N));
  }
  return full;
}

}  // namespace detail

inline void validate_effect(const EffectSpec& e, std::size_t N, std::size_t F) {
  if (e.active_features.empty()) throw SpecError("effect has no active features");
  std::vector<std::size_t> sorted = e.active_features;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw SpecError("active_features must be distinct");
  if (sorted.back() >= F)
    throw SpecError("active feature " + std::to_string(sorted.back()) + " >= F=" +
                    std::to_string(F));
  for (long s : e.ts_shifts)
    if (s < 0)
      throw SpecError("causality violated: ts_shift " + std::to_string(s) + " < 0");
  if (!e.ts_shifts.empty() && !detail::needs_ts_shift(e.kind) && e.kind != EffectKind::TSNonlin)
    throw SpecError("ts_shifts given for effect kind " + to_string(e.kind));
  if (!e.cs_shifts.empty() && !detail::needs_cs_shift(e.kind))
    throw SpecError("cs_shifts given for effect kind " + to_string(e.kind));
  (void)N;
  detail::term_count(e);  // validates Fea-Nonlin arity
}

// Fills in every defaulted field: equal weights 1/sqrt(#terms), lag-1
// temporal shifts, and cross-sectional shifts drawn uniformly from
// {1, ..., N-1} per (term, series) off the dataset seed.
inline EffectSpec resolve_effect(const EffectSpec& e, const DatasetSpec& spec,
                                 std::size_t effect_index) {
  validate_effect(e, spec.N, spec.F);
  std::size_t terms = detail::term_count(e);
  std::size_t N = spec.N;
  EffectSpec r = e;
  double w0 = 1.0 / std::sqrt(static_cast<double>(terms));
  r.weights = detail::expand_field(e.weights, terms, N, w0, "weights");
  if (detail::needs_ts_shift(e.kind) || e.kind == EffectKind::TSNonlin)
    r.ts_shifts = detail::expand_field(e.ts_shifts, terms, N, 1L, "ts_shifts");
  else
    r.ts_shifts.clear();
  if (detail::needs_cs_shift(e.kind)) {
    if (e.cs_shifts.empty()) {
      Rng rng(derive_seed(derive_seed(spec.seed, kEffectStream), effect_index));
      r.cs_shifts.resize(terms * N);
      for (auto& k : r.cs_shifts)
        k = 1 + static_cast<long>(rng.next_below(std::max<std::uint64_t>(1, N - 1)));
    } else {
      r.cs_shifts = detail::expand_field(e.cs_shifts, terms, N, 1L, "cs_shifts");
    }
  } else {
    r.cs_shifts.clear();
  }
  if (r.effect_weight == 0.0)
    r.effect_weight = spec.rho / std::sqrt(static_cast<double>(std::max<std::size_t>(
                                  1, spec.effects.size())));
  return r;
}

// Largest temporal lag this effect reads back.
inline std::size_t effect_max_lag(const EffectSpec& resolved) {
  long m = 0;
  for (long s : resolved.ts_shifts) m = std::max(m, s);
  if (resolved.kind == EffectKind::TSNonlin && resolved.ts_shifts.empty()) m = 1;
  return static_cast<std::size_t>(m);
}

// (T, N, F) of i.i.d. standard normals, deterministic in spec.seed.
inline Tensor sample_base(const DatasetSpec& spec) {
  Rng rng(derive_seed(spec.seed, kBaseStream));
  return Tensor::randn({spec.T(), spec.N, spec.F}, rng);
}

// Raw effect series scaled to unit variance. Every kind sums terms over
// distinct features, and the sign-pair nonlinearity x_a * sign(x_b) has
// exact unit variance for independent standard normals, so the population
// variance per series is sum(w^2) and the scaling is analytic. Shifted
// reads at t < lag clamp to row 0.
inline Tensor apply_effect(const Tensor& X, const EffectSpec& effect) {
  const Shape& xs = X.shape();
  if (xs.size() != 3) throw ShapeError("apply_effect expects X of shape (T, N, F)");
  std::size_t T = xs[0], N = xs[1], F = xs[2];
  std::size_t terms = detail::term_count(effect);
  if (effect.weights.size() != terms * N)
    throw SpecError("apply_effect needs resolved weights (" + std::to_string(terms * N) +
                    " entries)");
  for (long s : effect.ts_shifts)
    if (s < 0)
      throw SpecError("causality violated: ts_shift " + std::to_string(s) + " < 0");
  bool needs_ts = detail::needs_ts_shift(effect.kind) || effect.kind == EffectKind::TSNonlin;
  bool needs_cs = detail::needs_cs_shift(effect.kind);
  if (needs_ts && effect.ts_shifts.size() != terms * N)
    throw SpecError("apply_effect needs resolved ts_shifts");
  if (needs_cs && effect.cs_shifts.size() != terms * N)
    throw SpecError("apply_effect needs resolved cs_shifts");
  if (effect.kind == EffectKind::FeaNonlin || effect.kind == EffectKind::TSNonlin ||
      effect.kind == EffectKind::CSNonlin) {
    if (effect.nonlinear_kind != "sign_pair")
      throw SpecError("unknown nonlinear_kind '" + effect.nonlinear_kind + "'");
  }

  const double* px = X.raw();
  auto x_at = [&](std::size_t t, std::size_t n, std::size_t f) {
    return px[(t * N + n) * F + f];
  };
  auto wrap = [&](long n) {
    long m = n % static_cast<long>(N);
    return static_cast<std::size_t>(m < 0 ? m + static_cast<long>(N) : m);
  };
  auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };

  std::vector<double> out(T * N, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t j = 0; j < terms; ++j) {
      double w = effect.weights[j * N + n];
      if (w == 0.0) continue;
      switch (effect.kind) {
        case EffectKind::Lin: {
          std::size_t f = effect.active_features[j];
          for (std::size_t t = 0; t < T; ++t) out[t * N + n] += w * x_at(t, n, f);
          break;
        }
        case EffectKind::TSShift: {
          std::size_t f = effect.active_features[j];
          long s = effect.ts_shifts[j * N + n];
          for (std::size_t t = 0; t < T; ++t) {
            std::size_t ts = t >= static_cast<std::size_t>(s) ? t - s : 0;
            out[t * N + n] += w * x_at(ts, n, f);
          }
          break;
        }
        case EffectKind::CSShift: {
          std::size_t f = effect.active_features[j];
          std::size_t src = wrap(static_cast<long>(n) + effect.cs_shifts[j * N + n]);
          for (std::size_t t = 0; t < T; ++t) out[t * N + n] += w * x_at(t, src, f);
          break;
        }
        case EffectKind::TSCSShift: {
          std::size_t f = effect.active_features[j];
          long s = effect.ts_shifts[j * N + n];
          std::size_t src = wrap(static_cast<long>(n) + effect.cs_shifts[j * N + n]);
          for (std::size_t t = 0; t < T; ++t) {
            std::size_t ts = t >= static_cast<std::size_t>(s) ? t - s : 0;
            out[t * N + n] += w * x_at(ts, src, f);
          }
          break;
        }
        case EffectKind::FeaNonlin: {
          std::size_t fa = effect.active_features[2 * j];
          std::size_t fb = effect.active_features[2 * j + 1];
          for (std::size_t t = 0; t < T; ++t)
            out[t * N + n] += w * x_at(t, n, fa) * sign(x_at(t, n, fb));
          break;
        }
        case EffectKind::TSNonlin: {
          std::size_t f = effect.active_features[j];
          long s = effect.ts_shifts[j * N + n];
          for (std::size_t t = 0; t < T; ++t) {
            std::size_t ts = t >= static_cast<std::size_t>(s) ? t - s : 0;
            out[t * N + n] += w * x_at(t, n, f) * sign(x_at(ts, n, f));
          }
          break;
        }
        case EffectKind::CSNonlin: {
          std::size_t f = effect.active_features[j];
          std::size_t src = wrap(static_cast<long>(n) + 1);
          for (std::size_t t = 0; t < T; ++t)
            out[t * N + n] += w * x_at(t, n, f) * sign(x_at(t, src, f));
          break;
        }
      }
    }
  }

  for (std::size_t n = 0; n < N; ++n) {
    double ssq = 0.0;
    for (std::size_t j = 0; j < terms; ++j)
      ssq += effect.weights[j * N + n] * effect.weights[j * N + n];
    if (ssq <= 0.0) throw SpecError("effect has all-zero weights for series " + std::to_string(n));
    double inv = 1.0 / std::sqrt(ssq);
    for (std::size_t t = 0; t < T; ++t) out[t * N + n] *= inv;
  }
  return Tensor({T, N}, std::move(out));
}

// Y_opt = sum_e rho_e * component_e; Y = Y_opt + sqrt(1 - rho^2) * Z.
inline std::pair<Tensor, Tensor> compose_target(
    const std::vector<std::pair<Tensor, double>>& components, double rho,
    std::uint64_t noise_seed) {
  if (rho < 0.0 || rho >= 1.0)
    throw ParameterError("rho = " + std::to_string(rho) + " outside [0, 1)");
  double ssq = 0.0;
  for (const auto& [t, w] : components) ssq += w * w;
  if (std::abs(ssq - rho * rho) > 1e-12)
    throw SpecError("effect weights give sum rho_e^2 = " + std::to_string(ssq) +
                    ", expected rho^2 = " + std::to_string(rho * rho));
  if (components.empty() && rho != 0.0)
    throw SpecError("no effects but rho > 0");

  Shape shape = components.empty() ? Shape{0, 0} : components.front().first.shape();
  for (const auto& [t, w] : components)
    if (t.shape() != shape) throw ShapeError("effect components disagree in shape");

  std::size_t n = shape_numel(shape);
  std::vector<double> yopt(n, 0.0);
  for (const auto& [t, w] : components) {
    const double* p = t.raw();
    for (std::size_t i = 0; i < n; ++i) yopt[i] += w * p[i];
  }
  Rng rng(noise_seed);
  double noise_scale = std::sqrt(1.0 - rho * rho);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = yopt[i] + noise_scale * rng.next_gauss();
  return {Tensor(shape, std::move(yopt)), Tensor(shape, std::move(y))};
}

inline void validate_spec(const DatasetSpec& spec) {
  if (spec.T_train == 0 || spec.T_test == 0 || spec.N == 0 || spec.F == 0 || spec.T_win == 0)
    throw SpecError("dataset dimensions must be positive");
  if (spec.T_win > spec.T_train) throw SpecError("T_win exceeds T_train");
  if (spec.rho < 0.0 || spec.rho >= 1.0)
    throw ParameterError("rho = " + std::to_string(spec.rho) + " outside [0, 1)");
  for (const auto& e : spec.effects) validate_effect(e, spec.N, spec.F);
}

// Three-step construction: base normals, one unit-variance series per
// effect, then the noisy target at signal-to-noise rho.
inline Dataset make_dataset(const DatasetSpec& spec) {
  validate_spec(spec);
  Dataset ds;
  ds.spec = spec;
  ds.spec.effects.clear();
  ds.X = sample_base(spec);
  ds.split_index = spec.T_train;

  std::vector<std::pair<Tensor, double>> components;
  std::map<std::string, int> label_counts;
  for (std::size_t i = 0; i < spec.effects.size(); ++i) {
    EffectSpec resolved = resolve_effect(spec.effects[i], spec, i);
    Tensor comp = apply_effect(ds.X, resolved);
    std::string label = to_string(resolved.kind);
    int c = ++label_counts[label];
    if (c > 1) label += "#" + std::to_string(c);
    ds.per_effect.emplace_back(label, comp);
    components.emplace_back(comp, resolved.effect_weight);
    ds.warmup = std::max(ds.warmup, effect_max_lag(resolved));
    ds.spec.effects.push_back(std::move(resolved));
  }

  if (components.empty()) {
    if (spec.rho != 0.0) throw SpecError("no effects but rho > 0");
    Rng rng(derive_seed(spec.seed, kNoiseStream));
    ds.Y_opt = Tensor::zeros({spec.T(), spec.N});
    ds.Y = Tensor::randn({spec.T(), spec.N}, rng);
  } else {
    auto [yopt, y] = compose_target(components, spec.rho, derive_seed(spec.seed, kNoiseStream));
    ds.Y_opt = std::move(yopt);
    ds.Y = std::move(y);
  }
  return ds;
}

// First time index usable for fitting: windows need T_win - 1 rows of
// history and shifted effects clamp over the first `warmup` rows.
inline std::size_t first_usable_time(const Dataset& ds, std::size_t T_win) {
  return std::max(ds.warmup, T_win - 1);
}

// Stacks windows for t in [lo, hi): window rows s in [t - T_win + 1, t],
// target Y[t, :]. Returns ((B, T_win, N, F), (B, N)).
inline std::pair<Tensor, Tensor> gather_windows(const Dataset& ds, std::size_t T_win,
                                                const std::vector<std::size_t>& times) {
  const Shape& xs = ds.X.shape();
  std::size_t T = xs[0], N = xs[1], F = xs[2];
  std::size_t B = times.size();
  std::vector<double> xw(B * T_win * N * F);
  std::vector<double> yw(B * N);
  const double* px = ds.X.raw();
  const double* py = ds.Y.raw();
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t t = times[b];
    if (t + 1 < T_win || t >= T)
      throw ParameterError("window time " + std::to_string(t) + " out of range");
    std::size_t start = t + 1 - T_win;
    std::copy(px + start * N * F, px + (t + 1) * N * F, xw.begin() + b * T_win * N * F);
    std::copy(py + t * N, py + (t + 1) * N, yw.begin() + b * N);
  }
  return {Tensor({B, T_win, N, F}, std::move(xw)), Tensor({B, N}, std::move(yw))};
}

// Like gather_windows but pairs each window with the targets of every
// window position: ((B, T_win, N, F), (B, T_win, N)). Used for
// per-position training of causal models.
inline std::pair<Tensor, Tensor> gather_windows_all_targets(
    const Dataset& ds, std::size_t T_win, const std::vector<std::size_t>& times) {
  const Shape& xs = ds.X.shape();
  std::size_t T = xs[0], N = xs[1], F = xs[2];
  std::size_t B = times.size();
  std::vector<double> xw(B * T_win * N * F);
  std::vector<double> yw(B * T_win * N);
  const double* px = ds.X.raw();
  const double* py = ds.Y.raw();
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t t = times[b];
    if (t + 1 < T_win || t >= T)
      throw ParameterError("window time " + std::to_string(t) + " out of range");
    std::size_t start = t + 1 - T_win;
    std::copy(px + start * N * F, px + (t + 1) * N * F, xw.begin() + b * T_win * N * F);
    std::copy(py + start * N, py + (t + 1) * N, yw.begin() + b * T_win * N);
  }
  return {Tensor({B, T_win, N, F}, std::move(xw)), Tensor({B, T_win, N}, std::move(yw))};
}

inline std::pair<Tensor, Tensor> windowize(const Dataset& ds, std::size_t T_win, std::size_t lo,
                                           std::size_t hi) {
  if (lo + 1 < T_win || hi > ds.X.extent(0) || lo > hi)
    throw ParameterError("window range [" + std::to_string(lo) + "," + std::to_string(hi) +
                         ") out of bounds for T_win=" + std::to_string(T_win));
  std::vector<std::size_t> times(hi - lo);
  for (std::size_t i = 0; i < times.size(); ++i) times[i] = lo + i;
  return gather_windows(ds, T_win, times);
}

}  // namespace tsfx::datagen
