// Acceptance suite: one pass/fail line per criterion. Heavy criteria use
// the worker pool internally; run a single criterion with --criterion N.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "support/gradcheck.hpp"
#include "support/t_quadrature.hpp"
#include "tsfx/analysis.hpp"
#include "tsfx/boosting.hpp"
#include "tsfx/bootstrap.hpp"
#include "tsfx/csv.hpp"
#include "tsfx/experiment.hpp"
#include "tsfx/lasso.hpp"
#include "tsfx/ols.hpp"
#include "tsfx/presets.hpp"

using namespace tsfx;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream detail;

  template <typename T>
  Check& operator<<(const T& v) {
    detail << v;
    return *this;
  }
  void expect(bool cond, const std::string& what) {
    if (!cond) ok = false;
    detail << (cond ? " [ok] " : " [BAD] ") << what << ";";
  }
};

datagen::DatasetSpec paper_spec(datagen::EffectKind kind, double rho, std::uint64_t seed) {
  datagen::DatasetSpec s;
  s.T_train = 2500;
  s.T_test = 1500;
  s.T_win = 10;
  s.N = 10;
  s.F = 20;
  s.rho = rho;
  s.seed = seed;
  datagen::EffectSpec e;
  e.kind = kind;
  e.active_features = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  s.effects.push_back(e);
  return s;
}

double lasso_test_corr(const datagen::Dataset& ds) {
  std::size_t lo = datagen::first_usable_time(ds, ds.spec.T_win);
  baselines::DesignMatrix train =
      baselines::build_design(ds, ds.spec.T_win, lo, ds.split_index, true);
  std::vector<double> y = baselines::design_targets(ds, train);
  baselines::LassoModel lm = baselines::fit_lasso_cv(train, y);
  baselines::DesignMatrix test =
      baselines::build_design(ds, ds.spec.T_win, ds.split_index, ds.X.extent(0), true);
  std::vector<double> pred = baselines::lasso_predict(test, lm);
  std::vector<double> truth(test.row_count());
  for (std::size_t r = 0; r < truth.size(); ++r)
    truth[r] = ds.Y_opt.at(test.times[test.time_row(r)], test.series_of(r));
  return stats::pearson(pred, truth);
}

double model_test_corr(const std::string& kind, const datagen::Dataset& ds, std::uint64_t seed,
                       const nn::TrainConfig& tc) {
  bench::ModelEntry entry;
  entry.name = kind;
  entry.kind = kind;
  eval::EvalResult ev = bench::detail::run_model_once(entry, ds, tc, seed, nullptr, nullptr);
  return ev.corr_optimal.value_or(std::nan(""));
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// ---------------------------------------------------------------------------

Check criterion1() {
  Check c;
  const double rhos[] = {0.02, 0.05, 0.10, 0.20, 0.50};
  const double expected[] = {0.010, 0.025, 0.050, 0.102, 0.277};
  for (int i = 0; i < 5; ++i) {
    double v = std::round(baselines::theo_correlation(rhos[i], 0.8) * 1000.0) / 1000.0;
    c.expect(std::abs(v - expected[i]) < 1e-9,
             "theo(" + std::to_string(rhos[i]) + ")=" + std::to_string(v));
  }
  return c;
}

Check criterion2() {
  Check c;
  for (double rho : {0.1, 0.3, 0.5}) {
    double mc = baselines::ols_oos_mc(rho, 50, 500, 500, 50, 20260811);
    double theo = baselines::theo_correlation(rho, 0.1);
    c.expect(std::abs(mc - theo) <= 0.02,
             "rho=" + std::to_string(rho) + " mc=" + std::to_string(mc) + " theo=" +
                 std::to_string(theo));
  }
  return c;
}

Check criterion3() {
  Check c;
  {
    datagen::Dataset ds = datagen::make_dataset(paper_spec(datagen::EffectKind::Lin, 0.5, 31001));
    double corr = lasso_test_corr(ds);
    c.expect(corr >= 0.98, "lasso corr at rho=0.5: " + std::to_string(corr));
  }
  {
    datagen::Dataset ds = datagen::make_dataset(paper_spec(datagen::EffectKind::Lin, 0.1, 31002));
    double corr = lasso_test_corr(ds);
    c.expect(corr >= 0.70, "lasso corr at rho=0.1: " + std::to_string(corr));
  }
  return c;
}

Check criterion4() {
  Check c;
  std::vector<std::function<void()>> tasks;
  const double rhos[] = {0.02, 0.05, 0.10, 0.20, 0.50};
  double corrs[5];
  for (int i = 0; i < 5; ++i)
    tasks.push_back([&, i] {
      datagen::Dataset ds =
          datagen::make_dataset(paper_spec(datagen::EffectKind::FeaNonlin, rhos[i], 41000 + i));
      corrs[i] = lasso_test_corr(ds);
    });
  run_parallel(tasks);
  for (int i = 0; i < 5; ++i)
    c.expect(std::abs(corrs[i]) <= 0.05,
             "rho=" + std::to_string(rhos[i]) + " corr=" + std::to_string(corrs[i]));
  return c;
}

// Shared engine for criteria 5-7: median over 3 dataset seeds per model.
struct EffectStudy {
  std::vector<double> trans, mlp, lasso, boost;
};

EffectStudy run_effect_study(datagen::EffectKind kind, std::uint64_t base_seed,
                             bool with_classics) {
  EffectStudy st;
  st.trans.resize(3);
  st.mlp.resize(3);
  if (with_classics) {
    st.lasso.resize(3);
    st.boost.resize(3);
  }
  nn::TrainConfig tc;
  std::vector<std::function<void()>> tasks;
  for (int rep = 0; rep < 3; ++rep) {
    tasks.push_back([&, rep] {
      datagen::Dataset ds =
          datagen::make_dataset(paper_spec(kind, 0.5, derive_seed(base_seed, rep)));
      nn::TrainConfig local = tc;
      st.trans[rep] = model_test_corr("transformer", ds, derive_seed(base_seed, 100 + rep), local);
      st.mlp[rep] = model_test_corr("mlp", ds, derive_seed(base_seed, 200 + rep), local);
      if (with_classics) {
        st.lasso[rep] = model_test_corr("lasso", ds, 0, local);
        st.boost[rep] = model_test_corr("boosting", ds, 0, local);
      }
    });
  }
  run_parallel(tasks);
  return st;
}

std::string fmt3(const std::vector<double>& v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "{%.3f,%.3f,%.3f}", v[0], v[1], v[2]);
  return buf;
}

Check criterion5() {
  Check c;
  EffectStudy st = run_effect_study(datagen::EffectKind::FeaNonlin, 51000, true);
  double tm = median3(st.trans), lm = median3(st.lasso), bm = median3(st.boost),
         mm = median3(st.mlp);
  c << "trans=" << fmt3(st.trans);
  c.expect(tm >= 0.35, "trans median " + std::to_string(tm) + " >= 0.35");
  c.expect(tm > lm, "beats lasso " + std::to_string(lm));
  c.expect(tm > bm, "beats boosting " + std::to_string(bm));
  c.expect(tm > mm, "beats mlp " + std::to_string(mm));
  return c;
}

Check criterion6() {
  Check c;
  EffectStudy st = run_effect_study(datagen::EffectKind::CSShift, 61000, true);
  double tm = median3(st.trans), lm = median3(st.lasso), bm = median3(st.boost),
         mm = median3(st.mlp);
  double theo = baselines::theo_correlation(0.5, 0.8);
  c << "trans=" << fmt3(st.trans);
  c.expect(tm >= 0.45, "trans median " + std::to_string(tm) + " >= 0.45");
  c.expect(tm > lm, "beats lasso " + std::to_string(lm));
  c.expect(tm > bm, "beats boosting " + std::to_string(bm));
  c.expect(tm > mm, "beats mlp " + std::to_string(mm));
  c.expect(tm > theo, "beats theo " + std::to_string(theo));
  return c;
}

Check criterion7() {
  Check c;
  EffectStudy st = run_effect_study(datagen::EffectKind::TSCSShift, 71000, false);
  double tm = median3(st.trans), mm = median3(st.mlp);
  c << "trans=" << fmt3(st.trans) << " mlp=" << fmt3(st.mlp);
  c.expect(tm <= 0.10, "trans median " + std::to_string(tm) + " <= 0.10");
  c.expect(mm >= 0.30, "mlp median " + std::to_string(mm) + " >= 0.30");
  return c;
}

eval::BootstrapExperiment sparse_experiment(datagen::EffectKind kind, double rho,
                                            bool with_deterministic) {
  eval::BootstrapExperiment exp;
  exp.dataset = paper_spec(kind, rho, 0);
  bench::ExperimentConfig preset_cfg = bench::preset("table8-sparse-ts");
  for (const auto& m : preset_cfg.models) {
    if (!with_deterministic && m.name == "deterministic_sparse") continue;
    eval::BootstrapVariant v;
    v.name = m.name;
    v.config = m.config;
    exp.variants.push_back(std::move(v));
  }
  return exp;
}

Check criterion8() {
  Check c;
  eval::BootstrapExperiment exp =
      sparse_experiment(datagen::EffectKind::TSShift, 0.015, /*with_deterministic=*/true);
  eval::BootstrapReport rep = eval::bootstrap_run(exp, 20, 88001);
  double full = rep.means[0], maxs = rep.means[1], det = rep.means[2];
  char buf[160];
  std::snprintf(buf, sizeof(buf), "means full=%.4f max=%.4f det=%.4f p=%.4f failed=%zu", full,
                maxs, det, rep.p_value, rep.failed);
  c << buf;
  c.expect(det > maxs, "deterministic > max_sparse");
  c.expect(maxs > full, "max_sparse > full");
  c.expect(rep.p_value < 0.15, "one-sided welch p < 0.15");
  return c;
}

Check criterion9() {
  Check c;
  eval::BootstrapExperiment exp =
      sparse_experiment(datagen::EffectKind::Lin, 0.1, /*with_deterministic=*/false);
  eval::BootstrapReport rep = eval::bootstrap_run(exp, 20, 99001);
  double full = rep.means[0], maxs = rep.means[1];
  char buf[120];
  std::snprintf(buf, sizeof(buf), "means full=%.4f max=%.4f failed=%zu", full, maxs, rep.failed);
  c << buf;
  c.expect(std::abs(maxs - full) <= 0.2 * full, "parity within 20% of full");
  return c;
}

Check criterion10() {
  Check c;
  datagen::Dataset ds =
      datagen::make_dataset(paper_spec(datagen::EffectKind::TSShift, 0.1, 101001));
  nn::ModelConfig cfg;
  cfg.block_string = "TC";
  cfg.heads = 1;
  cfg.attention_mode = attn::AttentionMode::MaxSparse;
  nn::TransformerModel model(cfg, ds.spec.T_win, ds.spec.N, ds.spec.F, 101002);
  nn::TrainConfig tc;
  tc.seed = 101003;
  nn::train(model, ds, tc);

  auto mats = nn::extract_attention(model, ds);
  const Tensor& tm = mats[0].second;
  std::size_t L = tm.shape()[0];
  std::size_t hits = 0;
  for (std::size_t i = 1; i < L; ++i) {
    double best = -1.0;
    std::size_t arg = 0;
    for (std::size_t j = 0; j < L; ++j)
      if (tm.at(i, j) > best) {
        best = tm.at(i, j);
        arg = j;
      }
    if (arg == i - 1) ++hits;
  }
  c << "subdiag row-max hits " << hits << "/" << (L - 1);
  c.expect(hits * 10 >= 7 * (L - 1), "sub-diagonal is the row max in >= 70% of rows");

  // dump and verify exact zeros above the diagonal
  std::string dir = (std::filesystem::temp_directory_path() / "tsfx_accept10").string();
  std::filesystem::create_directories(dir);
  std::vector<std::string> header;
  for (std::size_t j = 0; j < L; ++j) header.push_back(std::to_string(j));
  csv::write_matrix(dir + "/attn_T.csv", header, tm.raw(), L, L);
  csv::Table back = csv::read_matrix(dir + "/attn_T.csv");
  bool zeros = true;
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = i + 1; j < L; ++j) zeros = zeros && back.rows[i][j] == 0.0;
  c.expect(zeros, "dumped matrix has exact zeros above the diagonal");
  std::filesystem::remove_all(dir);
  return c;
}

Check criterion11() {
  Check c;

  // gradient checks on every differentiable op
  {
    Rng rng(3);
    auto W = [&](Shape s) { return Tensor::randn(std::move(s), rng); };
    double worst = 0.0;
    using F = std::function<Tensor(const std::vector<Tensor>&)>;
    auto chk = [&](F f, std::vector<Tensor> in) {
      worst = std::max(worst, gradcheck::max_rel_error(f, std::move(in)));
    };
    chk(gradcheck::project([](const std::vector<Tensor>& i) { return add(i[0], i[1]); },
                           W({3, 4})),
        {W({3, 4}), W({4})});
    chk(gradcheck::project([](const std::vector<Tensor>& i) { return mul(i[0], i[1]); },
                           W({3, 4})),
        {W({3, 4}), W({3, 4})});
    chk(gradcheck::project([](const std::vector<Tensor>& i) { return matmul(i[0], i[1]); },
                           W({3, 2})),
        {W({3, 5}), W({5, 2})});
    chk(gradcheck::project([](const std::vector<Tensor>& i) { return matmul_nt(i[0], i[1]); },
                           W({2, 3, 3})),
        {W({2, 3, 4}), W({2, 3, 4})});
    chk(gradcheck::project([](const std::vector<Tensor>& i) { return gelu(i[0]); }, W({4, 4})),
        {W({4, 4})});
    Tensor bias({5}, {0, 0, kMaskedBias, 0, 0});
    chk(gradcheck::project(
            [bias](const std::vector<Tensor>& i) { return masked_softmax(i[0], bias); },
            W({4, 5})),
        {W({4, 5})});
    chk(gradcheck::project(
            [](const std::vector<Tensor>& i) { return layer_norm(i[0], i[1], i[2], 1e-5); },
            W({5, 6})),
        {W({5, 6}), W({6}), W({6})});
    chk(gradcheck::project(
            [](const std::vector<Tensor>& i) { return dropout(i[0], 0.3, true, 5); }, W({5, 5})),
        {W({5, 5})});
    c.expect(worst < 1e-4, "gradient checks, worst rel err " + std::to_string(worst));
  }

  // masked softmax row stochasticity
  {
    Rng rng(5);
    Tensor logits = Tensor::randn({4, 6, 6}, rng, 2.0);
    Tensor probs = masked_softmax(logits, attn::causal_bias(6).b);
    bool ok = true;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t r = 0; r < 6; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < 6; ++j) {
          ok = ok && probs.at(b, r, j) >= 0.0;
          s += probs.at(b, r, j);
        }
        ok = ok && std::abs(s - 1.0) < 1e-12;
      }
    c.expect(ok, "masked_softmax rows stochastic");
  }

  // sparsity monotonicity in K and argmax preservation
  {
    Rng rng(7);
    Tensor probs = masked_softmax(Tensor::randn({4, 5, 5}, rng, 2.0), attn::causal_bias(5).b);
    Tensor pbar = attn::batch_mean_probs(probs, 1);
    Tensor prev;
    bool mono = true, argmax_kept = true;
    bool first = true;
    for (double K : {0.05, 0.3, 0.7}) {
      attn::SparsityDecision d = attn::max_threshold_mask(pbar, K);
      if (!first)
        for (std::size_t i = 0; i < d.mask.numel(); ++i) mono = mono && d.mask[i] <= prev[i];
      for (std::size_t r = 0; r < 5; ++r) {
        double best = -1;
        std::size_t arg = 0;
        for (std::size_t j = 0; j < 5; ++j)
          if (pbar.at(std::size_t{0}, r, j) > best) {
            best = pbar.at(std::size_t{0}, r, j);
            arg = j;
          }
        argmax_kept = argmax_kept && d.mask.at(std::size_t{0}, r, arg) == 1.0;
      }
      prev = d.mask;
      first = false;
    }
    c.expect(mono, "mask monotone in K");
    c.expect(argmax_kept, "row argmax always survives");
  }

  // lasso objective monotonicity
  {
    Rng rng(9);
    std::size_t rows = 60, cols = 20;
    std::vector<double> x(rows * cols), y(rows);
    for (double& v : x) v = rng.next_gauss();
    for (double& v : y) v = rng.next_gauss();
    baselines::DesignMatrix dm = baselines::DesignMatrix::from_dense(x, rows, cols);
    baselines::LassoModel lm = baselines::fit_lasso(dm, y, 0.03);
    bool mono = true;
    for (std::size_t i = 1; i < lm.sweep_objectives.size(); ++i)
      mono = mono && lm.sweep_objectives[i] <= lm.sweep_objectives[i - 1] + 1e-12;
    c.expect(mono, "lasso objective non-increasing per sweep");
  }

  // boosting staged MSE monotonicity
  {
    Rng rng(11);
    std::size_t rows = 300, cols = 5;
    std::vector<double> x(rows * cols), y(rows);
    for (double& v : x) v = rng.next_gauss();
    for (std::size_t r = 0; r < rows; ++r) y[r] = x[r * cols] + 0.5 * rng.next_gauss();
    baselines::DesignMatrix dm = baselines::DesignMatrix::from_dense(x, rows, cols);
    baselines::BoostModel bm = baselines::fit_boosting(dm, y, {.trees = 40});
    bool mono = true;
    for (std::size_t i = 1; i < bm.staged_train_mse.size(); ++i)
      mono = mono && bm.staged_train_mse[i] <= bm.staged_train_mse[i - 1] + 1e-12;
    c.expect(mono, "boosting staged MSE non-increasing");
  }

  // welch p vs quadrature oracle
  {
    stats::WelchResult w =
        stats::welch_test({1, 2, 3, 4}, {0, 1, 2, 3}, stats::Alternative::Greater);
    double oracle = t_quadrature::upper_tail(w.t, w.df);
    c.expect(std::abs(w.p - oracle) < 1e-6,
             "welch p vs quadrature: " + std::to_string(std::abs(w.p - oracle)));
  }

  // datagen causality mutation
  {
    bool causal = true;
    for (datagen::EffectKind kind :
         {datagen::EffectKind::Lin, datagen::EffectKind::TSShift, datagen::EffectKind::CSShift,
          datagen::EffectKind::FeaNonlin, datagen::EffectKind::TSCSShift,
          datagen::EffectKind::TSNonlin, datagen::EffectKind::CSNonlin}) {
      datagen::DatasetSpec s;
      s.T_train = 25;
      s.T_test = 10;
      s.T_win = 4;
      s.N = 3;
      s.F = 5;
      s.rho = 0.2;
      s.seed = 13;
      datagen::EffectSpec e;
      e.kind = kind;
      e.active_features = kind == datagen::EffectKind::FeaNonlin
                              ? std::vector<std::size_t>{0, 1}
                              : std::vector<std::size_t>{0, 1, 2};
      datagen::EffectSpec r = datagen::resolve_effect(e, s, 0);
      Tensor X = datagen::sample_base(s);
      Tensor before = datagen::apply_effect(X, r);
      std::vector<double> mut(X.data());
      std::size_t row = s.N * s.F, cut = 20;
      for (std::size_t t = cut + 1; t < s.T(); ++t)
        for (std::size_t i = 0; i < row; ++i) mut[t * row + i] = 0.0;
      Tensor after = datagen::apply_effect(Tensor(X.shape(), std::move(mut)), r);
      for (std::size_t t = 0; t <= cut; ++t)
        for (std::size_t n = 0; n < s.N; ++n)
          causal = causal && before.at(t, n) == after.at(t, n);
    }
    c.expect(causal, "zeroing the future never changes the present");
  }

  // end-to-end determinism of run()
  {
    bench::ExperimentConfig cfg;
    cfg.name = "determinism";
    cfg.dataset.T_train = 80;
    cfg.dataset.T_test = 40;
    cfg.dataset.T_win = 4;
    cfg.dataset.N = 3;
    cfg.dataset.F = 3;
    cfg.dataset.rho = 0.3;
    cfg.dataset.seed = 5;
    datagen::EffectSpec e;
    e.kind = datagen::EffectKind::Lin;
    e.active_features = {0, 1};
    cfg.dataset.effects.push_back(e);
    bench::ModelEntry trans;
    trans.name = "Trans";
    trans.kind = "transformer";
    trans.config.block_string = "T";
    trans.config.heads = 1;
    trans.config.d_model = 8;
    trans.config.ffn_dim = 16;
    cfg.models.push_back(trans);
    cfg.seeds_per_cell = 2;
    cfg.train.epochs = 2;
    bench::RunArtifacts a1 = bench::run(cfg, 1);
    bench::RunArtifacts a2 = bench::run(cfg, 2);
    c.expect(a1.table.values == a2.table.values,
             "run() identical across worker counts");
  }

  return c;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  int only = 0;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);

  struct Entry {
    int id;
    const char* label;
    Check (*fn)();
  };
  const Entry entries[] = {
      {1, "analytic formula row (gamma 0.8)", criterion1},
      {2, "OLS Monte Carlo vs analytic curve", criterion2},
      {3, "lasso on the linear effect", criterion3},
      {4, "lasso blindness to Fea-Nonlin", criterion4},
      {5, "transformer beats baselines on Fea-Nonlin", criterion5},
      {6, "transformer beats baselines on CS-Shift", criterion6},
      {7, "TSCS failure reproduction", criterion7},
      {8, "sparsity ordering on TS-Shift (n=20)", criterion8},
      {9, "sparsity parity on Linear (n=20)", criterion9},
      {10, "learned attention shape on TS-Shift", criterion10},
      {11, "property suites", criterion11},
  };

  int failures = 0;
  for (const Entry& e : entries) {
    if (only != 0 && e.id != only) continue;
    Check c;
    try {
      c = e.fn();
    } catch (const std::exception& ex) {
      c.ok = false;
      c << " exception: " << ex.what();
    }
    std::printf("[%s] criterion %d: %s |%s\n", c.ok ? "PASS" : "FAIL", e.id, e.label,
                c.detail.str().c_str());
    std::fflush(stdout);
    if (!c.ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
