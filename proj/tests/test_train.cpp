#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "tsfx/analysis.hpp"
#include "tsfx/csv.hpp"
#include "tsfx/evaluate.hpp"
#include "tsfx/model.hpp"
#include "tsfx/train.hpp"

using namespace tsfx;
using namespace tsfx::datagen;
using namespace tsfx::nn;

namespace {

DatasetSpec desk_spec(EffectKind kind, double rho, std::uint64_t seed) {
  DatasetSpec s;
  s.T_train = 500;
  s.T_test = 250;
  s.T_win = 6;
  s.N = 4;
  s.F = 4;
  s.rho = rho;
  s.seed = seed;
  EffectSpec e;
  e.kind = kind;
  e.active_features = {0, 1};
  s.effects.push_back(e);
  return s;
}

ModelConfig desk_tc(attn::AttentionMode mode = attn::AttentionMode::Full) {
  ModelConfig c;
  c.block_string = "TC";
  c.heads = 1;
  c.d_model = 32;
  c.ffn_dim = 64;
  c.attention_mode = mode;
  return c;
}

}  // namespace

TEST_CASE("two trainings with identical seeds are bitwise identical", "[train]") {
  DatasetSpec s = desk_spec(EffectKind::Lin, 0.3, 11);
  s.T_train = 150;
  s.T_test = 60;
  Dataset ds = make_dataset(s);
  TrainConfig tc;
  tc.epochs = 4;
  tc.patience = 10;
  tc.seed = 99;

  TransformerModel m1(desk_tc(), s.T_win, s.N, s.F, 5);
  TrainResult r1 = train(m1, ds, tc);
  TransformerModel m2(desk_tc(), s.T_win, s.N, s.F, 5);
  TrainResult r2 = train(m2, ds, tc);
  REQUIRE(r1.train_loss == r2.train_loss);
  REQUIRE(r1.val_loss == r2.val_loss);
  Tensor p1 = predict_range(m1, ds, ds.split_index, ds.X.extent(0));
  Tensor p2 = predict_range(m2, ds, ds.split_index, ds.X.extent(0));
  REQUIRE(p1.data() == p2.data());
}

TEST_CASE("training makes progress on a strong signal", "[train][slow]") {
  DatasetSpec s = desk_spec(EffectKind::TSShift, 0.5, 21);
  Dataset ds = make_dataset(s);
  TrainConfig tc;
  tc.epochs = 30;
  tc.patience = 6;
  tc.seed = 7;
  TransformerModel m(desk_tc(), s.T_win, s.N, s.F, 3);
  TrainResult r = train(m, ds, tc);
  REQUIRE(r.train_loss.front() > r.train_loss[r.best_epoch]);
  REQUIRE(r.best_val < r.val_loss.front());

  Tensor pred = predict_range(m, ds, ds.split_index, ds.X.extent(0));
  eval::EvalResult ev = eval::evaluate(pred, ds);
  REQUIRE(ev.corr_optimal);
  REQUIRE(*ev.corr_optimal > 0.3);

  // lag-1 sub-diagonal should dominate the learned temporal attention
  auto mats = extract_attention(m, ds);
  REQUIRE(mats[0].first == BlockKind::Temporal);
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
    double rowsum = 0.0;
    for (std::size_t j = 0; j < L; ++j) rowsum += tm.at(i, j);
    REQUIRE(rowsum == Catch::Approx(1.0).margin(1e-6));
  }
  REQUIRE(hits * 2 >= (L - 1));  // at least half the rows at desk scale
}

TEST_CASE("noise-only target keeps validation MSE at the noise floor", "[train]") {
  DatasetSpec s = desk_spec(EffectKind::Lin, 0.0, 31);
  s.effects.clear();
  Dataset ds = make_dataset(s);
  TrainConfig tc;
  tc.epochs = 8;
  tc.patience = 8;
  tc.seed = 17;
  TransformerModel m(desk_tc(), s.T_win, s.N, s.F, 9);
  TrainResult r = train(m, ds, tc);
  // var(Y) = 1; nothing to fit, so the best validation MSE stays within 5%
  REQUIRE(r.best_val < 1.05);
  REQUIRE(r.best_val > 0.8);
}

TEST_CASE("early stopping restores the best-validation weights", "[train]") {
  DatasetSpec s = desk_spec(EffectKind::Lin, 0.2, 41);
  s.T_train = 200;
  s.T_test = 80;
  Dataset ds = make_dataset(s);
  TrainConfig tc;
  tc.epochs = 12;
  tc.patience = 2;
  tc.seed = 23;
  TransformerModel m(desk_tc(), s.T_win, s.N, s.F, 13);
  TrainResult r = train(m, ds, tc);
  auto vs = nn::detail::eval_validation(
      m, ds,
      [&] {
        std::size_t lo = first_usable_time(ds, s.T_win);
        std::size_t n_all = ds.split_index - lo;
        std::size_t n_val = static_cast<std::size_t>(n_all * 0.1);
        std::vector<std::size_t> vt(n_val);
        for (std::size_t i = 0; i < n_val; ++i) vt[i] = lo + (n_all - n_val) + i;
        return vt;
      }(),
      tc.batch_size);
  REQUIRE(vs.mse_calibrated == Catch::Approx(r.best_val).margin(1e-12));
}

TEST_CASE("divergence aborts with diagnostics", "[train]") {
  DatasetSpec s = desk_spec(EffectKind::Lin, 0.2, 51);
  s.T_train = 100;
  s.T_test = 50;
  Dataset ds = make_dataset(s);
  TrainConfig tc;
  tc.epochs = 30;
  tc.lr = 1e18;  // guaranteed blow-up
  tc.seed = 3;
  TransformerModel m(desk_tc(), s.T_win, s.N, s.F, 1);
  try {
    train(m, ds, tc);
    SUCCEED("training survived an absurd learning rate");
  } catch (const TrainingError& e) {
    std::string msg = e.what();
    REQUIRE(msg.find("epoch") != std::string::npos);
    REQUIRE(msg.find("batch") != std::string::npos);
  }
}

TEST_CASE("debug dump writes per-epoch mask and pbar CSVs", "[train][sparse]") {
  DatasetSpec s = desk_spec(EffectKind::TSShift, 0.3, 61);
  s.T_train = 120;
  s.T_test = 60;
  Dataset ds = make_dataset(s);
  std::string dir = (std::filesystem::temp_directory_path() / "tsfx_dump_test").string();
  std::filesystem::remove_all(dir);
  TrainConfig tc;
  tc.epochs = 2;
  tc.patience = 5;
  tc.seed = 71;
  tc.debug_dump_dir = dir;
  TransformerModel m(desk_tc(attn::AttentionMode::MaxSparse), s.T_win, s.N, s.F, 19);
  train(m, ds, tc);
  for (int epoch = 0; epoch < 2; ++epoch)
    for (int layer = 0; layer < 2; ++layer) {
      std::string tag = "_layer" + std::to_string(layer) + "_epoch" + std::to_string(epoch) + ".csv";
      REQUIRE(std::filesystem::exists(dir + "/mask" + tag));
      REQUIRE(std::filesystem::exists(dir + "/pbar" + tag));
    }
  csv::Table mask = csv::read_matrix(dir + "/mask_layer0_epoch1.csv");
  for (const auto& row : mask.rows)
    for (double v : row) REQUIRE((v == 0.0 || v == 1.0));
  std::filesystem::remove_all(dir);
}
