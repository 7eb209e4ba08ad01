// tsfx: generate benchmark datasets, run experiment configs or presets,
// bootstrap sparse-attention comparisons, and dump attention matrices.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsfx/analysis.hpp"
#include "tsfx/checkpoint.hpp"
#include "tsfx/dataset_io.hpp"
#include "tsfx/experiment.hpp"
#include "tsfx/presets.hpp"

namespace {

struct CommonOpts {
  std::string preset;
  std::string config_path;
  double rho = -1.0;
  long long seed = -1;
  long long bootstrap_n = -1;
  std::string out;
  double scale_bootstrap = 1.0;
  double scale_epochs = 1.0;
  std::size_t workers = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_scales = true) {
  auto* p = cmd->add_option("--preset", o.preset, "named experiment preset");
  auto* c = cmd->add_option("--config", o.config_path, "experiment config JSON file");
  p->excludes(c);
  cmd->add_option("--rho", o.rho, "override: single signal-to-noise value");
  cmd->add_option("--seed", o.seed, "override: dataset seed");
  cmd->add_option("--bootstrap-n", o.bootstrap_n, "override: bootstrap iterations");
  cmd->add_option("--out", o.out, "output directory");
  if (with_scales) {
    cmd->add_option("--scale-bootstrap", o.scale_bootstrap,
                    "multiply the preset bootstrap sample count");
    cmd->add_option("--scale-epochs", o.scale_epochs, "multiply the training epoch budget");
  }
  cmd->add_option("--workers", o.workers, "worker threads (default: TSFX_WORKERS or cores)");
}

tsfx::bench::ExperimentConfig load_config(const CommonOpts& o) {
  using namespace tsfx::bench;
  ExperimentConfig cfg;
  if (!o.preset.empty()) {
    cfg = preset(o.preset);
  } else if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw tsfx::SpecError("cannot open config file '" + o.config_path + "'");
    cfg = nlohmann::json::parse(in).get<ExperimentConfig>();
  } else {
    throw tsfx::SpecError("either --preset or --config is required");
  }
  apply_scales(cfg, o.scale_bootstrap, o.scale_epochs);
  if (o.rho >= 0.0) {
    cfg.rho_grid = {o.rho};
    cfg.dataset.rho = o.rho;
  }
  if (o.seed >= 0) cfg.dataset.seed = static_cast<std::uint64_t>(o.seed);
  if (o.bootstrap_n >= 0) cfg.bootstrap.n = static_cast<std::size_t>(o.bootstrap_n);
  if (!o.out.empty()) cfg.outputs.dir = o.out;
  return cfg;
}

int run_experiment(const CommonOpts& opts, bool force_bootstrap) {
  using namespace tsfx::bench;
  ExperimentConfig cfg = load_config(opts);
  if (force_bootstrap && cfg.bootstrap.n == 0) cfg.bootstrap.n = 90;
  validate_config(cfg);
  RunArtifacts art = run(cfg, opts.workers);
  write_artifacts(art, cfg);
  std::cout << render_markdown(art.table);
  std::cout << "artifacts written to " << cfg.outputs.dir << "\n";
  if (!art.errors.empty()) {
    std::cerr << art.errors.size()
              << " cell(s) failed; see error_manifest.json for details\n";
    return 3;
  }
  return 0;
}

int generate_dataset(const CommonOpts& opts) {
  using namespace tsfx;
  bench::ExperimentConfig cfg = load_config(opts);
  datagen::Dataset ds = datagen::make_dataset(cfg.dataset);
  std::string dir = cfg.outputs.dir.empty() ? "dataset" : cfg.outputs.dir;
  datagen::export_dataset(ds, dir);
  std::cout << "dataset written to " << dir << " (T=" << ds.X.extent(0)
            << ", N=" << ds.X.extent(1) << ", F=" << ds.X.extent(2) << ")\n";
  return 0;
}

int attn_dump(const std::string& checkpoint, const std::string& data_dir,
              const std::string& out_dir) {
  using namespace tsfx;
  auto model = nn::load_checkpoint(checkpoint);
  datagen::Dataset ds = datagen::import_dataset(data_dir);
  if (ds.spec.T_win != model->T_win || ds.spec.N != model->N || ds.spec.F != model->F)
    throw ShapeError("checkpoint dims (T_win=" + std::to_string(model->T_win) + ",N=" +
                     std::to_string(model->N) + ",F=" + std::to_string(model->F) +
                     ") do not match the dataset");
  auto mats = nn::extract_attention(*model, ds);
  std::filesystem::create_directories(out_dir);
  for (std::size_t li = 0; li < mats.size(); ++li) {
    std::vector<std::string> header;
    for (std::size_t c = 0; c < mats[li].second.shape()[1]; ++c)
      header.push_back(std::to_string(c));
    std::string kindc = mats[li].first == nn::BlockKind::Temporal ? "T" : "C";
    std::string path = out_dir + "/attn_layer" + std::to_string(li) + "_" + kindc + ".csv";
    csv::write_matrix(path, header, mats[li].second.raw(), mats[li].second.shape()[0],
                      mats[li].second.shape()[1]);
    std::cout << path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic multivariate time-series forecasting benchmark"};
  app.require_subcommand(1);

  CommonOpts run_opts, boot_opts, gen_opts;
  auto* cmd_run = app.add_subcommand("run", "run an experiment config or preset");
  add_common(cmd_run, run_opts);
  auto* cmd_boot =
      app.add_subcommand("bootstrap", "run the bootstrap comparison of a sparse preset");
  add_common(cmd_boot, boot_opts);
  auto* cmd_gen = app.add_subcommand("generate", "generate and export a dataset as CSV");
  add_common(cmd_gen, gen_opts, /*with_scales=*/false);

  std::string ckpt, data_dir, dump_out = "attn";
  auto* cmd_dump = app.add_subcommand("attn-dump", "dump attention matrices from a checkpoint");
  cmd_dump->add_option("--checkpoint", ckpt, "model checkpoint file")->required();
  cmd_dump->add_option("--data", data_dir, "exported dataset directory")->required();
  cmd_dump->add_option("--out", dump_out, "output directory");

  auto* cmd_presets = app.add_subcommand("presets", "preset utilities");
  auto* cmd_list = cmd_presets->add_subcommand("list", "list available presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_presets->parsed() && cmd_list->parsed()) {
      for (const auto& name : tsfx::bench::preset_names()) std::cout << name << "\n";
      return 0;
    }
    if (cmd_run->parsed()) return run_experiment(run_opts, /*force_bootstrap=*/false);
    if (cmd_boot->parsed()) return run_experiment(boot_opts, /*force_bootstrap=*/true);
    if (cmd_gen->parsed()) return generate_dataset(gen_opts);
    if (cmd_dump->parsed()) return attn_dump(ckpt, data_dir, dump_out);
  } catch (const tsfx::SpecError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const tsfx::ParameterError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
