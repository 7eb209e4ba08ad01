#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsfx/datagen.hpp"
#include "tsfx/evaluate.hpp"
#include "tsfx/model.hpp"
#include "tsfx/stats.hpp"
#include "tsfx/train.hpp"
#include "tsfx/workers.hpp"

namespace tsfx::eval {

struct BootstrapVariant {
  std::string name;
  std::string kind = "transformer";  // transformer | mlp
  nn::ModelConfig config;
};

struct BootstrapExperiment {
  datagen::DatasetSpec dataset;  // seed is re-derived per iteration
  std::vector<BootstrapVariant> variants;
  nn::TrainConfig train;
  // the tested pair: one-sided p for mean(compare_a) > mean(compare_b)
  std::string compare_a = "max_sparse";
  std::string compare_b = "full_attention";
};

struct BootstrapReport {
  std::vector<std::string> variant_names;
  std::vector<std::vector<double>> samples;  // per variant, one value per kept iteration
  std::vector<double> means;
  double t_stat = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;       // requested iterations
  std::size_t failed = 0;  // iterations excluded (training abort / undefined corr)
  std::string compare_a, compare_b;
};

inline void to_json(nlohmann::json& j, const BootstrapReport& r) {
  j = nlohmann::json{{"variants", r.variant_names}, {"samples", r.samples},
                     {"means", r.means},           {"t_stat", r.t_stat},
                     {"p_value", r.p_value},       {"n", r.n},
                     {"failed", r.failed},         {"compare_a", r.compare_a},
                     {"compare_b", r.compare_b}};
}

inline std::unique_ptr<nn::ForecastModel> build_variant_model(const BootstrapVariant& v,
                                                              const datagen::DatasetSpec& spec,
                                                              std::uint64_t seed) {
  if (v.kind == "transformer")
    return std::make_unique<nn::TransformerModel>(v.config, spec.T_win, spec.N, spec.F, seed);
  if (v.kind == "mlp") return std::make_unique<nn::MlpModel>(spec.T_win, spec.N, spec.F, seed);
  throw SpecError("unknown bootstrap variant kind '" + v.kind + "'");
}

// Paired bootstrap: each iteration regenerates the dataset from a derived
// seed, every variant trains on that same dataset (init seeds derive from
// the iteration and the variant index), and the out-of-sample correlation
// to the optimal predictor is collected. Iterations where any variant
// fails are dropped wholesale so sample counts stay equal.
inline BootstrapReport bootstrap_run(const BootstrapExperiment& exp, std::size_t n,
                                     std::uint64_t seed, std::size_t workers = 0) {
  if (n < 2) throw ParameterError("bootstrap needs n >= 2 iterations");
  if (exp.variants.empty()) throw SpecError("bootstrap needs at least one variant");

  std::size_t V = exp.variants.size();
  std::vector<std::vector<double>> values(n, std::vector<double>(V, 0.0));
  std::vector<char> ok(n, 0);

  std::vector<std::function<void()>> tasks;
  tasks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    tasks.push_back([&, i] {
      std::uint64_t iter_seed = derive_seed(seed, i);
      datagen::DatasetSpec spec = exp.dataset;
      spec.seed = iter_seed;
      datagen::Dataset ds = datagen::make_dataset(spec);
      bool good = true;
      for (std::size_t vi = 0; vi < V && good; ++vi) {
        try {
          auto model =
              build_variant_model(exp.variants[vi], spec, derive_seed(iter_seed, 1000 + vi));
          nn::TrainConfig tc = exp.train;
          tc.seed = derive_seed(iter_seed, 2000 + vi);
          nn::train(*model, ds, tc);
          Tensor pred = nn::predict_range(*model, ds, ds.split_index, ds.X.extent(0));
          EvalResult ev = evaluate(pred, ds);
          if (!ev.corr_optimal) {
            good = false;
          } else {
            values[i][vi] = *ev.corr_optimal;
          }
        } catch (const TrainingError&) {
          good = false;
        }
      }
      ok[i] = good ? 1 : 0;
    });
  }
  run_parallel(tasks, workers);

  BootstrapReport report;
  report.n = n;
  for (const auto& v : exp.variants) report.variant_names.push_back(v.name);
  report.samples.assign(V, {});
  for (std::size_t i = 0; i < n; ++i) {
    if (!ok[i]) {
      ++report.failed;
      continue;
    }
    for (std::size_t vi = 0; vi < V; ++vi) report.samples[vi].push_back(values[i][vi]);
  }
  for (std::size_t vi = 0; vi < V; ++vi)
    report.means.push_back(report.samples[vi].empty() ? std::nan("")
                                                      : stats::sample_mean(report.samples[vi]));

  // resolve the compared pair: named variants if present, else the first two
  auto index_of = [&](const std::string& name) -> long {
    for (std::size_t vi = 0; vi < V; ++vi)
      if (report.variant_names[vi] == name) return static_cast<long>(vi);
    return -1;
  };
  long a = index_of(exp.compare_a), b = index_of(exp.compare_b);
  if ((a < 0 || b < 0) && V >= 2) {
    a = 0;
    b = 1;
    report.compare_a = report.variant_names[0];
    report.compare_b = report.variant_names[1];
  } else {
    report.compare_a = exp.compare_a;
    report.compare_b = exp.compare_b;
  }
  if (a >= 0 && b >= 0 && report.samples[a].size() >= 2) {
    stats::WelchResult w =
        stats::welch_test(report.samples[a], report.samples[b], stats::Alternative::Greater);
    report.t_stat = w.t;
    report.p_value = w.p;
  }
  return report;
}

}  // namespace tsfx::eval
