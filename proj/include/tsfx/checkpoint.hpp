#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsfx/model.hpp"

namespace tsfx::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoints are little-endian; big-endian hosts need byte swaps");

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"block_string", c.block_string},
                     {"d_model", c.d_model},
                     {"heads", c.heads},
                     {"ffn_dim", c.ffn_dim},
                     {"dropout", c.dropout},
                     {"attention_mode", attn::to_string(c.attention_mode)},
                     {"sparsity_K", c.sparsity_K},
                     {"causal_temporal", c.causal_temporal},
                     {"deterministic_lag", c.deterministic_lag},
                     {"readout", c.readout}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  c.block_string = j.value("block_string", std::string("TCTC"));
  c.d_model = j.value("d_model", std::size_t{64});
  c.heads = j.value("heads", std::size_t{8});
  c.ffn_dim = j.value("ffn_dim", std::size_t{256});
  c.dropout = j.value("dropout", 0.1);
  c.attention_mode =
      attn::attention_mode_from_string(j.value("attention_mode", std::string("full")));
  c.sparsity_K = j.value("sparsity_K", 0.1);
  c.causal_temporal = j.value("causal_temporal", true);
  c.deterministic_lag = j.value("deterministic_lag", std::size_t{1});
  c.readout = j.value("readout", std::string("last"));
}

// One file: a single-line JSON header (config, dims, tensor manifest)
// terminated by '\n', then the raw little-endian 64-bit floats of every
// tensor in manifest order. Parameters come first, frozen-mask state after.
inline void save_checkpoint(TransformerModel& model, const std::string& path) {
  std::vector<Tensor*> params = model.parameters();
  std::vector<Tensor> extra = model.extra_state();

  nlohmann::json manifest = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i)
    manifest.push_back({{"name", "param" + std::to_string(i)}, {"shape", params[i]->shape()}});
  for (std::size_t i = 0; i < extra.size(); ++i)
    manifest.push_back({{"name", "extra" + std::to_string(i)}, {"shape", extra[i].shape()}});

  nlohmann::json header{{"format", "tsfx-checkpoint"},
                        {"version", 1},
                        {"model", "transformer"},
                        {"config", model.cfg},
                        {"dims", {{"T_win", model.T_win}, {"N", model.N}, {"F", model.F}}},
                        {"tensors", manifest}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot open " + path + " for writing");
  out << header.dump() << "\n";
  auto write_tensor = [&](const Tensor& t) {
    out.write(reinterpret_cast<const char*>(t.raw()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  };
  for (Tensor* p : params) write_tensor(*p);
  for (const Tensor& t : extra) write_tensor(t);
  if (!out) throw ContractError("failed writing " + path);
}

inline std::unique_ptr<TransformerModel> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open checkpoint " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw ContractError("checkpoint missing header");
  nlohmann::json header = nlohmann::json::parse(header_line);
  if (header.value("format", std::string{}) != "tsfx-checkpoint")
    throw ContractError("not a tsfx checkpoint: " + path);

  ModelConfig cfg = header.at("config").get<ModelConfig>();
  std::size_t T_win = header.at("dims").at("T_win").get<std::size_t>();
  std::size_t N = header.at("dims").at("N").get<std::size_t>();
  std::size_t F = header.at("dims").at("F").get<std::size_t>();
  auto model = std::make_unique<TransformerModel>(cfg, T_win, N, F, /*seed=*/0);

  std::vector<Tensor*> params = model->parameters();
  auto manifest = header.at("tensors");
  auto read_tensor = [&](const Shape& shape) {
    std::vector<double> data(shape_numel(shape));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw ContractError("checkpoint truncated: " + path);
    return Tensor(shape, std::move(data), true);
  };

  std::vector<Tensor> extra;
  std::size_t pi = 0;
  for (const auto& entry : manifest) {
    Shape shape = entry.at("shape").get<Shape>();
    std::string name = entry.at("name").get<std::string>();
    if (name.rfind("param", 0) == 0) {
      if (pi >= params.size()) throw ContractError("checkpoint has too many parameters");
      if (params[pi]->shape() != shape)
        throw ContractError("checkpoint shape mismatch at " + name);
      *params[pi] = read_tensor(shape);
      ++pi;
    } else {
      extra.push_back(read_tensor(shape).detached());
    }
  }
  if (pi != params.size()) throw ContractError("checkpoint is missing parameters");
  model->set_extra_state(extra);
  return model;
}

}  // namespace tsfx::nn
