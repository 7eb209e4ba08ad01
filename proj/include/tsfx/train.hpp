#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "tsfx/adam.hpp"
#include "tsfx/csv.hpp"
#include "tsfx/datagen.hpp"
#include "tsfx/model.hpp"
#include "tsfx/stats.hpp"

namespace tsfx::nn {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::size_t patience = 10;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  std::string debug_dump_dir;  // when set: per-epoch mask/pbar CSVs per dynamic layer

  void validate() const {
    if (epochs == 0 || batch_size == 0) throw ParameterError("epochs/batch_size must be positive");
    if (validation_fraction <= 0.0 || validation_fraction > 0.5)
      throw ParameterError("validation_fraction must lie in (0, 0.5]");
  }
};

struct TrainResult {
  std::vector<double> train_loss;  // per epoch, raw MSE
  std::vector<double> val_loss;    // per epoch, calibrated validation MSE
  std::vector<double> val_corr;    // per epoch, corr(prediction, target)
  std::size_t best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  bool early_stopped = false;
};

namespace detail {

struct ValStats {
  double mse_raw = 0.0;
  double corr = 0.0;
  double var_target = 0.0;
  // MSE after the optimal affine rescale of the prediction: the quantity a
  // correlation-scored forecaster actually delivers. Raw MSE punishes pure
  // variance inflation, which is invisible to the correlation metric and
  // would otherwise stop training long before the correlation peaks.
  double mse_calibrated = 0.0;
};

inline ValStats eval_validation(ForecastModel& model, const datagen::Dataset& ds,
                                const std::vector<std::size_t>& times, std::size_t batch_size) {
  bool seq = model.sequence_supervision();
  std::vector<double> preds, targets;
  for (std::size_t off = 0; off < times.size(); off += batch_size) {
    std::size_t hi = std::min(times.size(), off + batch_size);
    std::vector<std::size_t> chunk(times.begin() + off, times.begin() + hi);
    auto [x, y] = seq ? datagen::gather_windows_all_targets(ds, ds.spec.T_win, chunk)
                      : datagen::gather_windows(ds, ds.spec.T_win, chunk);
    Tensor pred = seq ? model.forward_seq(x, /*training=*/false, 0)
                      : model.forward(x, /*training=*/false, 0);
    preds.insert(preds.end(), pred.data().begin(), pred.data().end());
    targets.insert(targets.end(), y.data().begin(), y.data().end());
  }
  ValStats s;
  double n = static_cast<double>(preds.size());
  double my = 0.0;
  for (double v : targets) my += v;
  my /= n;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    double d = preds[i] - targets[i];
    s.mse_raw += d * d;
    double c = targets[i] - my;
    s.var_target += c * c;
  }
  s.mse_raw /= n;
  s.var_target /= n;
  try {
    s.corr = stats::pearson(preds, targets);
  } catch (const DomainError&) {
    s.corr = 0.0;  // constant prediction carries no usable signal
  }
  // only positively correlated predictions count as signal; an anti-
  // correlated epoch is noise, not a usable forecaster
  double cplus = std::max(s.corr, 0.0);
  s.mse_calibrated = (1.0 - cplus * cplus) * s.var_target;
  return s;
}

inline void dump_dynamic_layers(const TransformerModel* tm, const std::string& dir,
                                std::size_t epoch) {
  if (!tm) return;
  std::filesystem::create_directories(dir);
  for (std::size_t li = 0; li < tm->blocks.size(); ++li) {
    const AttentionLayer& al = tm->blocks[li].attn_layer;
    if (!al.dynamic || al.last_pbar.numel() == 0) continue;
    std::size_t H = al.last_pbar.shape()[0];
    std::size_t L = al.last_pbar.shape()[1];
    std::vector<std::string> header;
    for (std::size_t c = 0; c < al.last_pbar.shape()[2]; ++c)
      header.push_back("k" + std::to_string(c));
    std::string tag = "_layer" + std::to_string(li) + "_epoch" + std::to_string(epoch) + ".csv";
    csv::write_matrix(dir + "/pbar" + tag, header, al.last_pbar.raw(), H * L,
                      al.last_pbar.shape()[2]);
    csv::write_matrix(dir + "/mask" + tag, header, al.last_mask.raw(), H * L,
                      al.last_mask.shape()[2]);
  }
}

}  // namespace detail

// Predictions over times [lo, hi), evaluated in eval mode: (hi - lo, N).
inline Tensor predict_range(ForecastModel& model, const datagen::Dataset& ds, std::size_t lo,
                            std::size_t hi, std::size_t batch_size = 256) {
  std::size_t N = ds.X.extent(1);
  std::vector<double> out((hi - lo) * N);
  for (std::size_t off = lo; off < hi; off += batch_size) {
    std::size_t stop = std::min(hi, off + batch_size);
    std::vector<std::size_t> chunk(stop - off);
    for (std::size_t i = 0; i < chunk.size(); ++i) chunk[i] = off + i;
    auto [x, y] = datagen::gather_windows(ds, ds.spec.T_win, chunk);
    Tensor pred = model.forward(x, /*training=*/false, 0);
    std::copy(pred.data().begin(), pred.data().end(), out.begin() + (off - lo) * N);
  }
  return Tensor({hi - lo, N}, std::move(out));
}

// Minimizes MSE over the train range with Adam; the last
// validation_fraction of the train times is held out for early stopping,
// and the best-validation state (parameters plus frozen masks) is
// restored before returning.
inline TrainResult train(ForecastModel& model, const datagen::Dataset& ds,
                         const TrainConfig& cfg) {
  cfg.validate();
  tune_allocator();
  std::size_t T_win = ds.spec.T_win;
  std::size_t lo = datagen::first_usable_time(ds, T_win);
  std::size_t train_end = ds.split_index;
  if (lo >= train_end) throw ContractError("no usable training rows");
  std::size_t n_all = train_end - lo;
  std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                   std::floor(n_all * cfg.validation_fraction)));
  if (n_val >= n_all) throw ContractError("validation split leaves no training rows");

  std::vector<std::size_t> fit_times(n_all - n_val), val_times(n_val);
  for (std::size_t i = 0; i < fit_times.size(); ++i) fit_times[i] = lo + i;
  for (std::size_t i = 0; i < n_val; ++i) val_times[i] = lo + (n_all - n_val) + i;

  std::vector<Tensor*> params = model.parameters();
  AdamState adam;
  adam.lr = cfg.lr;

  auto snapshot = [&]() {
    std::vector<Tensor> s;
    s.reserve(params.size());
    for (Tensor* p : params) s.push_back(*p);
    return s;
  };

  TrainResult result;
  std::vector<Tensor> best_params;
  std::vector<Tensor> best_extra;
  std::size_t since_best = 0;
  std::vector<std::size_t> order(fit_times);
  const bool is_transformer = dynamic_cast<TransformerModel*>(&model) != nullptr;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(derive_seed(cfg.seed, 0x5F), epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);

    double epoch_se = 0.0;
    std::size_t epoch_n = 0;
    std::size_t batch_index = 0;
    const bool seq = model.sequence_supervision();
    for (std::size_t off = 0; off < order.size(); off += cfg.batch_size, ++batch_index) {
      std::size_t hi = std::min(order.size(), off + cfg.batch_size);
      std::vector<std::size_t> batch(order.begin() + off, order.begin() + hi);
      auto [x, y] = seq ? datagen::gather_windows_all_targets(ds, T_win, batch)
                        : datagen::gather_windows(ds, T_win, batch);

      Tape tape;
      GradientMap grads;
      double batch_loss;
      {
        Tape::Scope scope(&tape);
        std::uint64_t fwd_seed =
            derive_seed(derive_seed(derive_seed(cfg.seed, 0xD0), epoch), batch_index);
        Tensor pred = seq ? model.forward_seq(x, /*training=*/true, fwd_seed)
                          : model.forward(x, /*training=*/true, fwd_seed);
        Tensor loss = mse_loss(pred, y);
        batch_loss = loss.value();
        if (!std::isfinite(batch_loss))
          throw TrainingError("non-finite loss " + std::to_string(batch_loss) + " at epoch " +
                              std::to_string(epoch) + ", batch " + std::to_string(batch_index));
        grads = backward(loss, tape);
      }
      adam_step(params, grads, adam);
      epoch_se += batch_loss * static_cast<double>(batch.size());
      epoch_n += batch.size();
    }
    result.train_loss.push_back(epoch_se / static_cast<double>(epoch_n));

    detail::ValStats vs = detail::eval_validation(model, ds, val_times, cfg.batch_size);
    double val = vs.mse_calibrated;
    result.val_loss.push_back(val);
    result.val_corr.push_back(vs.corr);
    if (!cfg.debug_dump_dir.empty() && is_transformer)
      detail::dump_dynamic_layers(static_cast<TransformerModel*>(&model), cfg.debug_dump_dir,
                                  epoch);

    if (val < result.best_val) {
      result.best_val = val;
      result.best_epoch = epoch;
      best_params = snapshot();
      best_extra = model.extra_state();
      since_best = 0;
    } else if (++since_best > cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }

  if (!best_params.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = best_params[i];
    model.set_extra_state(best_extra);
  }
  return result;
}

}  // namespace tsfx::nn
