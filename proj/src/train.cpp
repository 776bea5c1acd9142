#include "solarcast/train.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>
#include <tuple>

#include "solarcast/errors.hpp"

namespace solarcast {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (batch_size < 1) throw ValidationError("batch size must be at least 1");
  model_config.validate();
  if (const auto* adam = std::get_if<AdamState>(&optimizer)) {
    if (!adam->first_moments.layers.empty() || adam->step_count != 0) {
      throw ValidationError("training must start from a fresh Adam state");
    }
  }
}

std::string optimizer_name(const OptimizerState& opt) {
  return std::holds_alternative<SgdState>(opt) ? "sgd" : "adam";
}

bool is_frozen(std::span<const double> losses) {
  if (losses.size() < kFreezeWindow + 1) return false;
  for (std::size_t i = losses.size() - kFreezeWindow; i < losses.size(); ++i) {
    if (!(std::abs(losses[i] - losses[i - 1]) < kFreezeTolerance)) return false;
  }
  return true;
}

TrainResult train(const TrainConfig& config, std::span<const Sample> train_samples) {
  config.validate();
  if (train_samples.empty()) throw ValidationError("training set is empty");

  TrainResult res{init_model(config.model_config), {}, 0};
  OptimizerState opt = config.optimizer;
  const double n = static_cast<double>(train_samples.size());
  const std::size_t batch = std::min(config.batch_size, train_samples.size());
  std::vector<double> history;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (const Batch& b : batches(train_samples, batch, config.shuffle_seed + epoch)) {
      ForwardResult fr = forward(res.model, b.features);
      const LossResult loss = mae_loss(fr.predictions, b.targets);
      const double rows = static_cast<double>(b.targets.size());
      const double sq = mse(fr.predictions, b.targets);
      abs_sum += loss.loss * rows;
      sq_sum += sq * rows;
      if (!std::isfinite(loss.loss) || !std::isfinite(sq)) break;
      const GradientSet grads = backward(res.model, fr.cache, loss.gradient);
      optimizer_step(res.model, grads, opt);
      ++res.optimizer_steps;
    }
    EpochStats st;
    st.epoch_index = epoch;
    st.mean_train_mae = abs_sum / n;
    st.mean_train_mse = sq_sum / n;
    st.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    st.diverged = !std::isfinite(st.mean_train_mae) || !std::isfinite(st.mean_train_mse);
    history.push_back(st.mean_train_mae);
    st.frozen = !st.diverged && is_frozen(history);
    res.stats.push_back(st);
    spdlog::debug("epoch {} {} mae={} mse={}", epoch, optimizer_name(config.optimizer),
                  st.mean_train_mae, st.mean_train_mse);
    if (st.diverged) {
      spdlog::warn("training diverged at epoch {}", epoch);
      break;
    }
  }
  return res;
}

std::vector<TrainConfig> default_sweep_grid(std::size_t epochs, std::uint64_t seed,
                                            std::vector<std::size_t> widths) {
  std::vector<TrainConfig> grid;
  for (std::size_t depth = 1; depth <= 3; ++depth) {
    for (const auto width : widths) {
      for (const bool final_relu : {false, true}) {
        for (int opt = 0; opt < 2; ++opt) {
          TrainConfig cfg;
          cfg.epochs = epochs;
          cfg.batch_size = kDefaultBatchSize;
          cfg.shuffle_seed = seed;
          cfg.model_config.hidden_widths.assign(depth, width);
          cfg.model_config.final_relu = final_relu;
          cfg.model_config.init_seed = seed;
          cfg.optimizer = opt == 0 ? OptimizerState{SgdState{}} : OptimizerState{AdamState{}};
          grid.push_back(std::move(cfg));
        }
      }
    }
  }
  return grid;
}

SweepResult sweep(const DatasetSplit& split, const std::vector<TrainConfig>& grid,
                  unsigned threads) {
  if (grid.empty()) throw ValidationError("sweep grid is empty");
  SweepResult res;
  res.cells.resize(grid.size());

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      TrainResult tr = train(grid[i], split);
      SweepCell& cell = res.cells[i];
      cell.config = grid[i];
      cell.final_stats = tr.stats.back();
      cell.parameter_count = tr.model.parameter_count();
      cell.excluded = cell.final_stats.diverged || !std::isfinite(cell.final_stats.mean_train_mae);
      spdlog::info("sweep cell {}/{}: {} hidden={} final_relu={} mae={}", i + 1, grid.size(),
                   optimizer_name(cell.config.optimizer),
                   fmt::join(cell.config.model_config.hidden_widths, "x"),
                   cell.config.model_config.final_relu, cell.final_stats.mean_train_mae);
    }
  };
  unsigned n_threads = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, grid.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < res.cells.size(); ++i) {
    const SweepCell& c = res.cells[i];
    if (c.excluded) continue;
    const auto key = [](const SweepCell& s) {
      return std::make_tuple(s.final_stats.mean_train_mae, s.parameter_count,
                             s.config.model_config.init_seed);
    };
    if (!res.best || key(c) < key(res.cells[*res.best])) res.best = i;
  }
  return res;
}

bool raw_feature_scale(std::span<const Sample> samples) {
  if (samples.empty()) return false;
  const double n = static_cast<double>(samples.size());
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s.features.to_array()[f];
    mean /= n;
    double var = 0.0;
    for (const auto& s : samples) {
      const double d = s.features.to_array()[f] - mean;
      var += d * d;
    }
    if (std::abs(mean) > 5.0 || std::sqrt(var / n) > 5.0) return true;
  }
  return false;
}

CompareResult compare_optimizers(const DatasetSplit& split, std::size_t epochs,
                                 std::uint64_t seed) {
  TrainConfig base;
  base.epochs = epochs;
  base.batch_size = kDefaultBatchSize;
  base.shuffle_seed = seed;
  base.model_config.hidden_widths = {32, 32};
  base.model_config.init_seed = seed;

  TrainConfig sgd_cfg = base;
  sgd_cfg.optimizer = SgdState{0.001};
  TrainConfig adam_cfg = base;
  adam_cfg.optimizer = AdamState{};

  CompareResult res;
  res.sgd = train(sgd_cfg, split).stats;
  res.adam = train(adam_cfg, split).stats;
  res.sgd_diverged = std::any_of(res.sgd.begin(), res.sgd.end(),
                                 [](const EpochStats& s) { return s.diverged; });
  res.sgd_frozen = std::any_of(res.sgd.begin(), res.sgd.end(),
                               [](const EpochStats& s) { return s.frozen; });
  res.raw_feature_scale = raw_feature_scale(split.train);

  const double sgd_final = res.sgd.back().mean_train_mae;
  const double adam_final = res.adam.back().mean_train_mae;
  std::string verdict;
  if (res.sgd_diverged) {
    verdict = "sgd diverged";
  } else if (res.sgd_frozen) {
    verdict = "sgd froze";
  } else {
    verdict = fmt::format("sgd final mae {:.4g}", sgd_final);
  }
  verdict += fmt::format("; adam final mae {:.4g}", adam_final);
  if (std::isfinite(adam_final) && (!std::isfinite(sgd_final) || adam_final < sgd_final)) {
    verdict += "; adam lower";
  } else {
    verdict += "; sgd lower or equal";
  }
  if (res.raw_feature_scale) verdict += "; raw-unit features: higher divergence risk for sgd";
  res.verdict = std::move(verdict);
  return res;
}

}  // namespace solarcast
