#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsfx/analysis.hpp"
#include "tsfx/boosting.hpp"
#include "tsfx/bootstrap.hpp"
#include "tsfx/checkpoint.hpp"
#include "tsfx/csv.hpp"
#include "tsfx/datagen.hpp"
#include "tsfx/dataset_io.hpp"
#include "tsfx/design.hpp"
#include "tsfx/evaluate.hpp"
#include "tsfx/lasso.hpp"
#include "tsfx/models_io.hpp"
#include "tsfx/ols.hpp"
#include "tsfx/train.hpp"
#include "tsfx/workers.hpp"

namespace tsfx::baselines {

inline void to_json(nlohmann::json& j, const BoostParams& p) {
  j = {{"trees", p.trees},
       {"depth", p.depth},
       {"learning_rate", p.learning_rate},
       {"min_samples_leaf", p.min_samples_leaf},
       {"max_bins", p.max_bins}};
}
inline void from_json(const nlohmann::json& j, BoostParams& p) {
  p = BoostParams{};
  p.trees = j.value("trees", p.trees);
  p.depth = j.value("depth", p.depth);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.min_samples_leaf = j.value("min_samples_leaf", p.min_samples_leaf);
  p.max_bins = j.value("max_bins", p.max_bins);
}

}  // namespace tsfx::baselines

namespace tsfx::nn {

inline void to_json(nlohmann::json& j, const TrainConfig& t) {
  j = {{"epochs", t.epochs},     {"batch_size", t.batch_size},
       {"lr", t.lr},             {"patience", t.patience},
       {"validation_fraction", t.validation_fraction}};
  if (!t.debug_dump_dir.empty()) j["debug_dump_dir"] = t.debug_dump_dir;
}
inline void from_json(const nlohmann::json& j, TrainConfig& t) {
  t = TrainConfig{};
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.lr = j.value("lr", t.lr);
  t.patience = j.value("patience", t.patience);
  t.validation_fraction = j.value("validation_fraction", t.validation_fraction);
  t.debug_dump_dir = j.value("debug_dump_dir", std::string{});
}

}  // namespace tsfx::nn

namespace tsfx::bench {

struct McParams {
  std::size_t features = 50;
  std::size_t T = 500;
  std::size_t T_o = 500;
  std::size_t replicates = 50;
};

struct ModelEntry {
  std::string name;
  std::string kind;  // theo | ols | lasso | boosting | mlp | transformer | ols_mc
  nn::ModelConfig config;          // transformer
  baselines::BoostParams boost;    // boosting
  McParams mc;                     // ols_mc
  std::optional<double> gamma;     // theo: override the dataset-derived ratio
};

struct BootstrapConfig {
  std::size_t n = 0;  // > 0 switches the run into bootstrap mode
  std::uint64_t seed = 1;
};

struct OutputConfig {
  std::string dir = "out";
  bool checkpoints = false;
  bool attention = false;
  bool models_json = false;  // serialized lasso/boosting coefficients
};

struct ExperimentConfig {
  std::string name = "experiment";
  datagen::DatasetSpec dataset;
  std::vector<double> rho_grid;  // empty: just dataset.rho
  std::vector<ModelEntry> models;
  std::size_t seeds_per_cell = 3;
  nn::TrainConfig train;
  BootstrapConfig bootstrap;
  OutputConfig outputs;
};

inline const std::vector<std::string>& known_model_kinds() {
  static const std::vector<std::string> kinds{"theo",     "ols", "lasso", "boosting",
                                              "mlp",      "transformer", "ols_mc"};
  return kinds;
}

inline void validate_config(const ExperimentConfig& c) {
  datagen::validate_spec(c.dataset);
  if (c.models.empty()) throw SpecError("models: at least one model is required");
  for (std::size_t i = 0; i < c.models.size(); ++i) {
    const ModelEntry& m = c.models[i];
    if (m.name.empty()) throw SpecError("models[" + std::to_string(i) + "].name: empty");
    const auto& kinds = known_model_kinds();
    if (std::find(kinds.begin(), kinds.end(), m.kind) == kinds.end())
      throw SpecError("models[" + std::to_string(i) + "].kind: unknown model kind '" + m.kind +
                      "'");
    for (std::size_t j = 0; j < i; ++j)
      if (c.models[j].name == m.name)
        throw SpecError("models[" + std::to_string(i) + "].name: duplicate '" + m.name + "'");
    if (m.kind == "transformer") m.config.validate();
  }
  for (double rho : c.rho_grid)
    if (rho < 0.0 || rho >= 1.0)
      throw SpecError("rho_grid: value " + std::to_string(rho) + " outside [0, 1)");
  if (c.seeds_per_cell == 0) throw SpecError("seeds_per_cell: must be positive");
  c.train.validate();
}

// ---------------------------------------------------------------------------
// JSON bindings
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const McParams& m) {
  j = {{"features", m.features}, {"T", m.T}, {"T_o", m.T_o}, {"replicates", m.replicates}};
}
inline void from_json(const nlohmann::json& j, McParams& m) {
  m = McParams{};
  m.features = j.value("features", m.features);
  m.T = j.value("T", m.T);
  m.T_o = j.value("T_o", m.T_o);
  m.replicates = j.value("replicates", m.replicates);
}

inline void to_json(nlohmann::json& j, const ModelEntry& m) {
  j = {{"name", m.name}, {"kind", m.kind}};
  if (m.kind == "transformer") j["config"] = m.config;
  if (m.kind == "boosting") j["params"] = m.boost;
  if (m.kind == "ols_mc") j["mc"] = m.mc;
  if (m.gamma) j["gamma"] = *m.gamma;
}
inline void from_json(const nlohmann::json& j, ModelEntry& m) {
  m = ModelEntry{};
  m.name = j.at("name").get<std::string>();
  m.kind = j.at("kind").get<std::string>();
  if (j.contains("config")) m.config = j.at("config").get<nn::ModelConfig>();
  if (j.contains("params")) m.boost = j.at("params").get<baselines::BoostParams>();
  if (j.contains("mc")) m.mc = j.at("mc").get<McParams>();
  if (j.contains("gamma")) m.gamma = j.at("gamma").get<double>();
}

inline void to_json(nlohmann::json& j, const BootstrapConfig& b) {
  j = {{"n", b.n}, {"seed", b.seed}};
}
inline void from_json(const nlohmann::json& j, BootstrapConfig& b) {
  b = BootstrapConfig{};
  b.n = j.value("n", b.n);
  b.seed = j.value("seed", b.seed);
}

inline void to_json(nlohmann::json& j, const OutputConfig& o) {
  j = {{"dir", o.dir},
       {"checkpoints", o.checkpoints},
       {"attention", o.attention},
       {"models_json", o.models_json}};
}
inline void from_json(const nlohmann::json& j, OutputConfig& o) {
  o = OutputConfig{};
  o.dir = j.value("dir", o.dir);
  o.checkpoints = j.value("checkpoints", o.checkpoints);
  o.attention = j.value("attention", o.attention);
  o.models_json = j.value("models_json", o.models_json);
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"name", c.name},
       {"dataset", c.dataset},
       {"rho_grid", c.rho_grid},
       {"models", c.models},
       {"seeds_per_cell", c.seeds_per_cell},
       {"train", c.train},
       {"bootstrap", c.bootstrap},
       {"outputs", c.outputs}};
}
inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  c.name = j.value("name", c.name);
  c.dataset = j.at("dataset").get<datagen::DatasetSpec>();
  c.rho_grid = j.value("rho_grid", std::vector<double>{});
  c.models = j.at("models").get<std::vector<ModelEntry>>();
  c.seeds_per_cell = j.value("seeds_per_cell", c.seeds_per_cell);
  if (j.contains("train")) c.train = j.at("train").get<nn::TrainConfig>();
  if (j.contains("bootstrap")) c.bootstrap = j.at("bootstrap").get<BootstrapConfig>();
  if (j.contains("outputs")) c.outputs = j.at("outputs").get<OutputConfig>();
}

inline std::string config_hash(const ExperimentConfig& c) {
  std::string dump = nlohmann::json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Result table
// ---------------------------------------------------------------------------

struct CellProvenance {
  std::vector<std::uint64_t> seeds;
  std::vector<double> values;  // per surviving repetition
  std::size_t failed = 0;
};

struct ResultTable {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::vector<double>> values;  // NaN = missing
  std::vector<std::vector<CellProvenance>> provenance;
  std::string config_hash;
};

inline std::string format_cell(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

inline void write_table_csv(const ResultTable& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ContractError("cannot open " + path);
  out << "model";
  for (const auto& c : t.col_labels) out << "," << c;
  out << "\n";
  for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
    out << t.row_labels[r];
    for (std::size_t c = 0; c < t.col_labels.size(); ++c)
      out << "," << (std::isnan(t.values[r][c]) ? "" : csv::g17(t.values[r][c]));
    out << "\n";
  }
}

inline std::string render_markdown(const ResultTable& t) {
  std::string md = "| model |";
  for (const auto& c : t.col_labels) md += " " + c + " |";
  md += "\n|---|";
  for (std::size_t c = 0; c < t.col_labels.size(); ++c) md += "---|";
  md += "\n";
  for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
    md += "| " + t.row_labels[r] + " |";
    for (std::size_t c = 0; c < t.col_labels.size(); ++c)
      md += " " + format_cell(t.values[r][c]) + " |";
    md += "\n";
  }
  return md;
}

// ---------------------------------------------------------------------------
// Cell runners
// ---------------------------------------------------------------------------

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Fits/trains one model on one dataset; returns the evaluation and
// optionally hands back a trained transformer for checkpoint/attention
// artifacts.
inline eval::EvalResult run_model_once(const ModelEntry& entry, const datagen::Dataset& ds,
                                       const nn::TrainConfig& train_cfg, std::uint64_t seed,
                                       std::unique_ptr<nn::TransformerModel>* keep,
                                       nlohmann::json* model_json) {
  const datagen::DatasetSpec& spec = ds.spec;
  std::size_t lo = datagen::first_usable_time(ds, spec.T_win);
  std::size_t T = ds.X.extent(0), N = ds.X.extent(1);

  if (entry.kind == "lasso" || entry.kind == "boosting") {
    baselines::DesignMatrix train_dm =
        baselines::build_design(ds, spec.T_win, lo, ds.split_index, /*global_rows=*/true);
    std::vector<double> y = baselines::design_targets(ds, train_dm);
    baselines::DesignMatrix test_dm =
        baselines::build_design(ds, spec.T_win, ds.split_index, T, /*global_rows=*/true);
    std::vector<double> pred;
    if (entry.kind == "lasso") {
      baselines::LassoModel lm = baselines::fit_lasso_cv(train_dm, y);
      pred = baselines::lasso_predict(test_dm, lm);
      if (model_json) *model_json = baselines::lasso_to_json(lm, train_dm);
    } else {
      baselines::BoostModel bm = baselines::fit_boosting(train_dm, y, entry.boost);
      pred = baselines::boost_predict(test_dm, bm);
      if (model_json) *model_json = baselines::boost_to_json(bm);
    }
    // global rows are (t, n) with n innermost, exactly the (T_test, N) layout
    return eval::evaluate(Tensor({T - ds.split_index, N}, std::move(pred)), ds);
  }

  if (entry.kind == "ols") {
    baselines::DesignMatrix train_dm =
        baselines::build_design(ds, spec.T_win, lo, ds.split_index, /*global_rows=*/false);
    baselines::DesignMatrix test_dm =
        baselines::build_design(ds, spec.T_win, ds.split_index, T, /*global_rows=*/false);
    std::vector<baselines::OlsModel> models = baselines::fit_ols_all_series(train_dm, ds);
    std::size_t T_test = T - ds.split_index;
    std::vector<double> pred(T_test * N);
    for (std::size_t n = 0; n < N; ++n) {
      std::vector<double> pn = baselines::ols_predict(test_dm.features.data(), T_test,
                                                      test_dm.cols, models[n]);
      for (std::size_t t = 0; t < T_test; ++t) pred[t * N + n] = pn[t];
    }
    return eval::evaluate(Tensor({T_test, N}, std::move(pred)), ds);
  }

  std::unique_ptr<nn::ForecastModel> model;
  if (entry.kind == "transformer")
    model = std::make_unique<nn::TransformerModel>(entry.config, spec.T_win, N, spec.F,
                                                   derive_seed(seed, 11));
  else if (entry.kind == "mlp")
    model = std::make_unique<nn::MlpModel>(spec.T_win, N, spec.F, derive_seed(seed, 11));
  else
    throw SpecError("unknown model kind '" + entry.kind + "'");

  nn::TrainConfig tc = train_cfg;
  tc.seed = derive_seed(seed, 13);
  nn::train(*model, ds, tc);
  Tensor pred = nn::predict_range(*model, ds, ds.split_index, T);
  eval::EvalResult ev = eval::evaluate(pred, ds);
  if (keep && entry.kind == "transformer") {
    keep->reset(static_cast<nn::TransformerModel*>(model.release()));
  }
  return ev;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// run()
// ---------------------------------------------------------------------------

struct RunArtifacts {
  ResultTable table;
  std::vector<std::pair<double, eval::BootstrapReport>> bootstrap_reports;
  nlohmann::json report;
  std::vector<std::string> errors;
};

inline RunArtifacts run(const ExperimentConfig& config, std::size_t workers = 0) {
  validate_config(config);
  tune_allocator();
  RunArtifacts art;
  std::string hash = config_hash(config);
  auto now_iso = [] {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return std::string(buf);
  };
  std::string started = now_iso();

  std::vector<double> rhos = config.rho_grid.empty() ? std::vector<double>{config.dataset.rho}
                                                     : config.rho_grid;

  if (config.bootstrap.n > 0) {
    // Bootstrap mode: rows are the transformer variants plus the p-value.
    eval::BootstrapExperiment bexp;
    bexp.train = config.train;
    for (const ModelEntry& m : config.models) {
      if (m.kind != "transformer" && m.kind != "mlp") continue;
      eval::BootstrapVariant v;
      v.name = m.name;
      v.kind = m.kind;
      v.config = m.config;
      bexp.variants.push_back(std::move(v));
    }
    if (bexp.variants.size() < 2)
      throw SpecError("bootstrap mode needs at least two trainable variants");

    ResultTable table;
    table.config_hash = hash;
    for (const auto& v : bexp.variants) table.row_labels.push_back(v.name);
    table.row_labels.push_back("p_value");
    table.values.assign(table.row_labels.size(), {});
    for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
      table.col_labels.push_back(format_cell(rhos[ri]));
      bexp.dataset = config.dataset;
      bexp.dataset.rho = rhos[ri];
      eval::BootstrapReport report = eval::bootstrap_run(
          bexp, config.bootstrap.n, derive_seed(config.bootstrap.seed, ri), workers);
      for (std::size_t vi = 0; vi < bexp.variants.size(); ++vi)
        table.values[vi].push_back(report.means[vi]);
      table.values[bexp.variants.size()].push_back(report.p_value);
      if (report.failed > 0)
        art.errors.push_back("rho=" + std::to_string(rhos[ri]) + ": " +
                             std::to_string(report.failed) + " bootstrap iterations failed");
      art.bootstrap_reports.emplace_back(rhos[ri], std::move(report));
    }
    art.table = std::move(table);
  } else {
    // Median-over-seeds table mode.
    bool effect_columns = config.dataset.effects.size() >= 2 && rhos.size() == 1;
    std::vector<std::string> effect_labels;
    if (effect_columns) {
      datagen::DatasetSpec probe = config.dataset;
      probe.seed = derive_seed(config.dataset.seed, 0xBEEF);
      probe.T_train = std::max<std::size_t>(probe.T_win + 2, 16);
      probe.T_test = 4;
      datagen::Dataset tiny = datagen::make_dataset(probe);
      for (const auto& [label, t] : tiny.per_effect) effect_labels.push_back(label);
    }

    std::size_t n_cols = effect_columns ? 1 + effect_labels.size() : rhos.size();
    ResultTable table;
    table.config_hash = hash;
    for (const ModelEntry& m : config.models) table.row_labels.push_back(m.name);
    if (effect_columns) {
      table.col_labels.push_back("Optimal");
      for (const auto& l : effect_labels) table.col_labels.push_back(l);
    } else {
      for (double rho : rhos) table.col_labels.push_back(format_cell(rho));
    }
    table.values.assign(config.models.size(), std::vector<double>(n_cols, std::nan("")));
    table.provenance.assign(config.models.size(), std::vector<CellProvenance>(n_cols));

    struct Job {
      std::size_t ri, mi, rep;
      std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t ri = 0; ri < rhos.size(); ++ri)
      for (std::size_t mi = 0; mi < config.models.size(); ++mi) {
        const ModelEntry& m = config.models[mi];
        if (m.kind == "theo") continue;  // analytic, filled below
        std::size_t reps = m.kind == "ols_mc" ? 1 : config.seeds_per_cell;
        for (std::size_t rep = 0; rep < reps; ++rep)
          jobs.push_back({ri, mi, rep,
                          derive_seed(derive_seed(config.dataset.seed, ri), rep)});
      }

    struct JobResult {
      bool ok = false;
      std::string error;
      std::vector<double> cols;  // one value per table column
    };
    std::vector<JobResult> results(jobs.size());

    std::vector<std::function<void()>> tasks;
    tasks.reserve(jobs.size());
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      tasks.push_back([&, j] {
        const Job& job = jobs[j];
        const ModelEntry& m = config.models[job.mi];
        JobResult& out = results[j];
        try {
          if (m.kind == "ols_mc") {
            double gamma_val = static_cast<double>(m.mc.features) / static_cast<double>(m.mc.T);
            (void)gamma_val;
            double mc = baselines::ols_oos_mc(rhos[job.ri], m.mc.features, m.mc.T, m.mc.T_o,
                                              m.mc.replicates, job.seed);
            out.cols.assign(n_cols, std::nan(""));
            out.cols[effect_columns ? 0 : job.ri] = mc;
            out.ok = true;
            return;
          }
          datagen::DatasetSpec spec = config.dataset;
          spec.rho = rhos[job.ri];
          spec.seed = job.seed;
          datagen::Dataset ds = datagen::make_dataset(spec);

          bool want_artifacts = job.rep == 0 && job.ri == 0 &&
                                (config.outputs.checkpoints || config.outputs.attention) &&
                                m.kind == "transformer";
          std::unique_ptr<nn::TransformerModel> kept;
          nlohmann::json mjson;
          eval::EvalResult ev = detail::run_model_once(
              m, ds, config.train, derive_seed(job.seed, job.mi),
              want_artifacts ? &kept : nullptr,
              config.outputs.models_json ? &mjson : nullptr);

          out.cols.assign(n_cols, std::nan(""));
          if (effect_columns) {
            if (ev.corr_optimal) out.cols[0] = *ev.corr_optimal;
            for (std::size_t ei = 0; ei < ev.corr_per_effect.size(); ++ei)
              if (ev.corr_per_effect[ei].second)
                out.cols[1 + ei] = *ev.corr_per_effect[ei].second;
          } else {
            if (ev.corr_optimal) out.cols[job.ri] = *ev.corr_optimal;
          }
          out.ok = true;

          if (want_artifacts && kept) {
            std::filesystem::create_directories(config.outputs.dir);
            if (config.outputs.checkpoints)
              nn::save_checkpoint(*kept, config.outputs.dir + "/" + m.name + ".ckpt");
            if (config.outputs.attention) {
              auto mats = nn::extract_attention(*kept, ds);
              for (std::size_t li = 0; li < mats.size(); ++li) {
                std::vector<std::string> header;
                for (std::size_t c = 0; c < mats[li].second.shape()[1]; ++c)
                  header.push_back(std::to_string(c));
                std::string kindc = mats[li].first == nn::BlockKind::Temporal ? "T" : "C";
                csv::write_matrix(config.outputs.dir + "/attn_" + m.name + "_layer" +
                                      std::to_string(li) + "_" + kindc + ".csv",
                                  header, mats[li].second.raw(), mats[li].second.shape()[0],
                                  mats[li].second.shape()[1]);
              }
            }
          }
          if (config.outputs.models_json && !mjson.is_null() && job.rep == 0 && job.ri == 0) {
            std::filesystem::create_directories(config.outputs.dir);
            std::ofstream mo(config.outputs.dir + "/model_" + m.name + ".json");
            mo << mjson.dump(2) << "\n";
          }
        } catch (const std::exception& e) {
          out.ok = false;
          out.error = e.what();
        }
      });
    }
    run_parallel(tasks, workers);

    // theo rows
    for (std::size_t mi = 0; mi < config.models.size(); ++mi) {
      const ModelEntry& m = config.models[mi];
      if (m.kind != "theo") continue;
      double gamma = m.gamma ? *m.gamma
                             : static_cast<double>(config.dataset.T_win * config.dataset.N *
                                                   config.dataset.F) /
                                   static_cast<double>(config.dataset.T_train);
      for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
        double v = baselines::theo_correlation(rhos[ri], gamma);
        if (effect_columns)
          table.values[mi][0] = v;
        else
          table.values[mi][ri] = v;
      }
    }

    // reduce repetitions to medians
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      const Job& job = jobs[j];
      const JobResult& res = results[j];
      for (std::size_t c = 0; c < n_cols; ++c) {
        CellProvenance& prov = table.provenance[job.mi][c];
        if (!res.ok) {
          if (c == 0) {
            prov.failed += 1;
            art.errors.push_back(config.models[job.mi].name + " rho=" +
                                 format_cell(rhos[job.ri]) + " rep=" +
                                 std::to_string(job.rep) + ": " + res.error);
          }
          continue;
        }
        if (std::isnan(res.cols[c])) continue;
        prov.seeds.push_back(job.seed);
        prov.values.push_back(res.cols[c]);
      }
    }
    for (std::size_t mi = 0; mi < config.models.size(); ++mi) {
      if (config.models[mi].kind == "theo") continue;
      for (std::size_t c = 0; c < n_cols; ++c) {
        const CellProvenance& prov = table.provenance[mi][c];
        if (!prov.values.empty()) table.values[mi][c] = detail::median(prov.values);
      }
    }
    art.table = std::move(table);
  }

  // JSON report with provenance.
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t r = 0; r < art.table.row_labels.size(); ++r)
    for (std::size_t c = 0; c < art.table.col_labels.size(); ++c) {
      nlohmann::json cell{{"row", art.table.row_labels[r]},
                          {"col", art.table.col_labels[c]},
                          {"value", art.table.values[r][c]}};
      if (r < art.table.provenance.size() && c < art.table.provenance[r].size()) {
        cell["seeds"] = art.table.provenance[r][c].seeds;
        cell["rep_values"] = art.table.provenance[r][c].values;
        cell["failed"] = art.table.provenance[r][c].failed;
      }
      cells.push_back(std::move(cell));
    }
  nlohmann::json breport = nlohmann::json::array();
  for (const auto& [rho, rep] : art.bootstrap_reports)
    breport.push_back({{"rho", rho}, {"report", rep}});
  art.report = nlohmann::json{{"name", config.name},
                              {"config", config},
                              {"config_hash", hash},
                              {"started", started},
                              {"finished", now_iso()},
                              {"cells", cells},
                              {"bootstrap", breport},
                              {"errors", art.errors}};
  return art;
}

// Writes results.csv / results.md / report.json (and error_manifest.json
// when anything failed) under outputs.dir.
inline void write_artifacts(const RunArtifacts& art, const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(config.outputs.dir);
  write_table_csv(art.table, config.outputs.dir + "/results.csv");
  std::ofstream md(config.outputs.dir + "/results.md");
  md << render_markdown(art.table);
  nlohmann::json report = art.report;
  std::ofstream js(config.outputs.dir + "/report.json");
  js << report.dump(2) << "\n";
  if (!art.errors.empty()) {
    std::ofstream em(config.outputs.dir + "/error_manifest.json");
    em << nlohmann::json(art.errors).dump(2) << "\n";
  }
}

}  // namespace tsfx::bench
