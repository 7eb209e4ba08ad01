#pragma once

#include <string>
#include <vector>

#include "tsfx/experiment.hpp"

namespace tsfx::bench {

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{
      "table1-lin",       "table2-ts",        "table3-cs",       "table4-nonlin",
      "table5-tscs",      "table6-all-rho05", "table7-all-rho02", "table8-sparse-ts",
      "table9-sparse-cs", "table10-sparse-all", "table11-sparse-lin", "appendixA-attn",
      "appendixB-mc"};
  return names;
}

namespace detail {

inline datagen::DatasetSpec paper_dataset(double rho, std::uint64_t seed) {
  datagen::DatasetSpec s;
  s.T_train = 2500;
  s.T_test = 1500;
  s.T_win = 10;
  s.N = 10;
  s.F = 20;
  s.rho = rho;
  s.seed = seed;
  return s;
}

inline datagen::EffectSpec effect(datagen::EffectKind kind, std::vector<std::size_t> features) {
  datagen::EffectSpec e;
  e.kind = kind;
  e.active_features = std::move(features);
  return e;
}

// Half the features drive the effect, the other half stay noise.
inline std::vector<std::size_t> first_half_features() {
  return {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
}

inline datagen::DatasetSpec superposition_dataset(double rho, std::uint64_t seed) {
  datagen::DatasetSpec s = paper_dataset(rho, seed);
  s.effects.push_back(effect(datagen::EffectKind::Lin, {0, 1}));
  s.effects.push_back(effect(datagen::EffectKind::TSShift, {2, 3}));
  s.effects.push_back(effect(datagen::EffectKind::CSShift, {4, 5}));
  s.effects.push_back(effect(datagen::EffectKind::FeaNonlin, {6, 7}));
  s.effects.push_back(effect(datagen::EffectKind::TSCSShift, {8, 9}));
  return s;
}

inline ModelEntry theo_entry() {
  ModelEntry m;
  m.name = "TheoC";
  m.kind = "theo";
  return m;
}

inline std::vector<ModelEntry> classic_models() {
  std::vector<ModelEntry> ms;
  ms.push_back(theo_entry());
  ModelEntry lasso;
  lasso.name = "Lasso";
  lasso.kind = "lasso";
  ms.push_back(lasso);
  ModelEntry boost;
  boost.name = "Boosting";
  boost.kind = "boosting";
  ms.push_back(boost);
  ModelEntry mlp;
  mlp.name = "MLP";
  mlp.kind = "mlp";
  ms.push_back(mlp);
  ModelEntry trans;
  trans.name = "Trans";
  trans.kind = "transformer";
  ms.push_back(trans);
  return ms;
}

// One temporal plus one cross-sectional attention layer, one head each:
// the configuration of the sparsity study.
inline nn::ModelConfig sparse_study_config(attn::AttentionMode mode) {
  nn::ModelConfig c;
  c.block_string = "TC";
  c.heads = 1;
  c.attention_mode = mode;
  return c;
}

inline std::vector<ModelEntry> sparse_variants(bool with_deterministic) {
  std::vector<ModelEntry> ms;
  ModelEntry full;
  full.name = "full_attention";
  full.kind = "transformer";
  full.config = sparse_study_config(attn::AttentionMode::Full);
  ms.push_back(full);
  ModelEntry mx;
  mx.name = "max_sparse";
  mx.kind = "transformer";
  mx.config = sparse_study_config(attn::AttentionMode::MaxSparse);
  ms.push_back(mx);
  if (with_deterministic) {
    ModelEntry det;
    det.name = "deterministic_sparse";
    det.kind = "transformer";
    det.config = sparse_study_config(attn::AttentionMode::DeterministicSparse);
    ms.push_back(det);
  }
  return ms;
}

inline ExperimentConfig single_effect_table(const std::string& name, datagen::EffectKind kind) {
  ExperimentConfig c;
  c.name = name;
  c.dataset = paper_dataset(0.1, 20260227);
  c.dataset.effects.push_back(effect(kind, first_half_features()));
  c.rho_grid = {0.02, 0.05, 0.10, 0.20, 0.50};
  c.models = classic_models();
  c.seeds_per_cell = 3;
  return c;
}

inline ExperimentConfig sparse_table(const std::string& name, datagen::DatasetSpec dataset,
                                     bool with_deterministic) {
  ExperimentConfig c;
  c.name = name;
  c.dataset = std::move(dataset);
  c.rho_grid = {0.015, 0.03, 0.1};
  c.models = sparse_variants(with_deterministic);
  c.bootstrap.n = 90;
  c.bootstrap.seed = 90902;
  return c;
}

}  // namespace detail

// Fully specified reproductions of the benchmark experiments; scale the
// bootstrap size and epoch budget down for desk-scale runs.
inline ExperimentConfig preset(const std::string& name) {
  using datagen::EffectKind;
  if (name == "table1-lin") return detail::single_effect_table(name, EffectKind::Lin);
  if (name == "table2-ts") return detail::single_effect_table(name, EffectKind::TSShift);
  if (name == "table3-cs") return detail::single_effect_table(name, EffectKind::CSShift);
  if (name == "table4-nonlin") return detail::single_effect_table(name, EffectKind::FeaNonlin);
  if (name == "table5-tscs") return detail::single_effect_table(name, EffectKind::TSCSShift);
  if (name == "table6-all-rho05" || name == "table7-all-rho02") {
    ExperimentConfig c;
    c.name = name;
    double rho = name == "table6-all-rho05" ? 0.05 : 0.2;
    c.dataset = detail::superposition_dataset(rho, 20260611);
    c.models = detail::classic_models();
    c.models.erase(c.models.begin());  // no TheoC row in the superposition tables
    c.seeds_per_cell = 3;
    return c;
  }
  if (name == "table8-sparse-ts") {
    datagen::DatasetSpec d = detail::paper_dataset(0.1, 20260808);
    d.effects.push_back(detail::effect(EffectKind::TSShift, detail::first_half_features()));
    return detail::sparse_table(name, std::move(d), /*with_deterministic=*/true);
  }
  if (name == "table9-sparse-cs") {
    datagen::DatasetSpec d = detail::paper_dataset(0.1, 20260909);
    d.effects.push_back(detail::effect(EffectKind::CSShift, detail::first_half_features()));
    return detail::sparse_table(name, std::move(d), /*with_deterministic=*/false);
  }
  if (name == "table10-sparse-all")
    return detail::sparse_table(name, detail::superposition_dataset(0.1, 20261010),
                                /*with_deterministic=*/false);
  if (name == "table11-sparse-lin") {
    datagen::DatasetSpec d = detail::paper_dataset(0.1, 20261111);
    d.effects.push_back(detail::effect(EffectKind::Lin, detail::first_half_features()));
    return detail::sparse_table(name, std::move(d), /*with_deterministic=*/false);
  }
  if (name == "appendixA-attn") {
    ExperimentConfig c;
    c.name = name;
    c.dataset = detail::paper_dataset(0.03, 20261212);
    c.dataset.effects.push_back(
        detail::effect(EffectKind::TSShift, detail::first_half_features()));
    ModelEntry m;
    m.name = "max_sparse";
    m.kind = "transformer";
    m.config = detail::sparse_study_config(attn::AttentionMode::MaxSparse);
    c.models.push_back(std::move(m));
    c.seeds_per_cell = 1;
    c.outputs.attention = true;
    c.outputs.checkpoints = true;
    return c;
  }
  if (name == "appendixB-mc") {
    ExperimentConfig c;
    c.name = name;
    c.dataset = detail::paper_dataset(0.0, 1);  // unused by the analytic/MC rows
    c.dataset.T_train = 20;
    c.dataset.T_test = 4;
    c.dataset.T_win = 2;
    c.dataset.N = 2;
    c.dataset.F = 2;
    c.rho_grid = {0.1, 0.3, 0.5};
    ModelEntry theo = detail::theo_entry();
    theo.gamma = 0.1;  // features / fit rows of the MC setup
    c.models.push_back(std::move(theo));
    ModelEntry mc;
    mc.name = "OLS";
    mc.kind = "ols_mc";
    c.models.push_back(std::move(mc));
    c.seeds_per_cell = 1;
    return c;
  }
  throw SpecError("unknown preset '" + name + "'");
}

// Desk-scale knobs: multiply the bootstrap sample count and epoch budget.
inline void apply_scales(ExperimentConfig& c, double scale_bootstrap, double scale_epochs) {
  if (scale_bootstrap != 1.0 && c.bootstrap.n > 0)
    c.bootstrap.n = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(c.bootstrap.n * scale_bootstrap)));
  if (scale_epochs != 1.0)
    c.train.epochs = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(c.train.epochs * scale_epochs)));
}

}  // namespace tsfx::bench
