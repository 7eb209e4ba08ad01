#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsfx/csv.hpp"
#include "tsfx/datagen.hpp"

namespace tsfx::datagen {

inline void to_json(nlohmann::json& j, const EffectSpec& e) {
  j = nlohmann::json{{"kind", to_string(e.kind)},
                     {"active_features", e.active_features},
                     {"effect_weight", e.effect_weight}};
  if (!e.weights.empty()) j["weights"] = e.weights;
  if (!e.ts_shifts.empty()) j["ts_shifts"] = e.ts_shifts;
  if (!e.cs_shifts.empty()) j["cs_shifts"] = e.cs_shifts;
  if (e.nonlinear_kind != "sign_pair") j["nonlinear_kind"] = e.nonlinear_kind;
}

inline void from_json(const nlohmann::json& j, EffectSpec& e) {
  e = EffectSpec{};
  e.kind = effect_kind_from_string(j.at("kind").get<std::string>());
  e.active_features = j.at("active_features").get<std::vector<std::size_t>>();
  e.effect_weight = j.value("effect_weight", 0.0);
  e.weights = j.value("weights", std::vector<double>{});
  e.ts_shifts = j.value("ts_shifts", std::vector<long>{});
  e.cs_shifts = j.value("cs_shifts", std::vector<long>{});
  e.nonlinear_kind = j.value("nonlinear_kind", std::string("sign_pair"));
}

inline void to_json(nlohmann::json& j, const DatasetSpec& s) {
  j = nlohmann::json{{"T_train", s.T_train}, {"T_test", s.T_test}, {"T_win", s.T_win},
                     {"N", s.N},             {"F", s.F},           {"rho", s.rho},
                     {"seed", s.seed},       {"effects", s.effects}};
}

inline void from_json(const nlohmann::json& j, DatasetSpec& s) {
  s = DatasetSpec{};
  s.T_train = j.at("T_train").get<std::size_t>();
  s.T_test = j.at("T_test").get<std::size_t>();
  s.T_win = j.at("T_win").get<std::size_t>();
  s.N = j.at("N").get<std::size_t>();
  s.F = j.at("F").get<std::size_t>();
  s.rho = j.at("rho").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("effects")) s.effects = j.at("effects").get<std::vector<EffectSpec>>();
}

// Directory layout: spec.json (resolved DatasetSpec echo), X.csv with
// columns n{n}_f{j}, Y.csv / Y_opt.csv with columns n{n}, and one
// effect_{i}.csv per stored component. Values round-trip exactly at 17
// significant digits.
inline void export_dataset(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::size_t T = ds.X.extent(0), N = ds.X.extent(1), F = ds.X.extent(2);

  std::vector<std::string> xcols;
  xcols.reserve(N * F);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t f = 0; f < F; ++f)
      xcols.push_back("n" + std::to_string(n) + "_f" + std::to_string(f));
  csv::write_matrix(dir + "/X.csv", xcols, ds.X.raw(), T, N * F);

  std::vector<std::string> ycols;
  for (std::size_t n = 0; n < N; ++n) ycols.push_back("n" + std::to_string(n));
  csv::write_matrix(dir + "/Y.csv", ycols, ds.Y.raw(), T, N);
  csv::write_matrix(dir + "/Y_opt.csv", ycols, ds.Y_opt.raw(), T, N);
  for (std::size_t i = 0; i < ds.per_effect.size(); ++i)
    csv::write_matrix(dir + "/effect_" + std::to_string(i) + ".csv", ycols,
                      ds.per_effect[i].second.raw(), T, N);

  std::ofstream spec_out(dir + "/spec.json");
  spec_out << nlohmann::json(ds.spec).dump(2) << "\n";
}

inline Dataset import_dataset(const std::string& dir) {
  std::ifstream spec_in(dir + "/spec.json");
  if (!spec_in) throw ContractError("missing " + dir + "/spec.json");
  nlohmann::json j = nlohmann::json::parse(spec_in);
  DatasetSpec spec = j.get<DatasetSpec>();

  Dataset ds;
  ds.spec = spec;
  ds.split_index = spec.T_train;
  std::size_t T = spec.T(), N = spec.N, F = spec.F;

  auto load = [&](const std::string& name, std::size_t cols) {
    csv::Table t = csv::read_matrix(dir + "/" + name);
    if (t.rows.size() != T || (T > 0 && t.rows.front().size() != cols))
      throw ContractError(name + " shape mismatch vs spec.json");
    std::vector<double> data(T * cols);
    for (std::size_t r = 0; r < T; ++r)
      for (std::size_t c = 0; c < cols; ++c) data[r * cols + c] = t.rows[r][c];
    return data;
  };

  ds.X = Tensor({T, N, F}, load("X.csv", N * F));
  ds.Y = Tensor({T, N}, load("Y.csv", N));
  ds.Y_opt = Tensor({T, N}, load("Y_opt.csv", N));

  std::map<std::string, int> label_counts;
  for (std::size_t i = 0; i < spec.effects.size(); ++i) {
    std::string label = to_string(spec.effects[i].kind);
    int c = ++label_counts[label];
    if (c > 1) label += "#" + std::to_string(c);
    ds.per_effect.emplace_back(label,
                               Tensor({T, N}, load("effect_" + std::to_string(i) + ".csv", N)));
    ds.warmup = std::max(ds.warmup, effect_max_lag(spec.effects[i]));
  }
  return ds;
}

}  // namespace tsfx::datagen
