#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "solarcast/dataset.hpp"
#include "solarcast/neuralnet.hpp"

namespace solarcast {

/// batch_size value meaning "the whole training set in one batch".
inline constexpr std::size_t kFullBatch = std::numeric_limits<std::size_t>::max();

inline constexpr std::size_t kDefaultSweepEpochs = 100;
inline constexpr std::size_t kDefaultFinalEpochs = 1000;
inline constexpr std::size_t kDefaultBatchSize = 128;

struct TrainConfig {
  OptimizerState optimizer = AdamState{};  ///< hyperparameters; moments must be empty
  std::size_t epochs = kDefaultSweepEpochs;
  std::size_t batch_size = kDefaultBatchSize;
  std::uint64_t shuffle_seed = 0;
  MLPConfig model_config;

  void validate() const;
};

std::string optimizer_name(const OptimizerState& opt);

struct EpochStats {
  std::size_t epoch_index = 0;  ///< 1-based
  double mean_train_mae = 0.0;  ///< mean per-sample |error| over the epoch, W/m²
  double mean_train_mse = 0.0;
  double wall_seconds = 0.0;
  bool diverged = false;  ///< non-finite loss
  bool frozen = false;    ///< loss stuck for kFreezeWindow epochs

  bool operator==(const EpochStats&) const = default;
};

inline constexpr std::size_t kFreezeWindow = 10;
inline constexpr double kFreezeTolerance = 1e-12;

/// True when each of the last kFreezeWindow epoch-to-epoch changes is below
/// kFreezeTolerance.
bool is_frozen(std::span<const double> epoch_losses);

struct TrainResult {
  MLPModel model;
  std::vector<EpochStats> stats;
  std::size_t optimizer_steps = 0;
};

/// Epoch e shuffles with shuffle_seed + e. Stops at the first batch whose
/// MAE or MSE is non-finite, returning the stats so far with the last epoch
/// flagged diverged. Throws ValidationError on an
/// empty training set.
TrainResult train(const TrainConfig& config, std::span<const Sample> train_samples);
inline TrainResult train(const TrainConfig& config, const DatasetSplit& split) {
  return train(config, split.train);
}

struct SweepCell {
  TrainConfig config;
  EpochStats final_stats;
  std::size_t parameter_count = 0;
  bool excluded = false;  ///< diverged or non-finite
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::optional<std::size_t> best;  ///< index into cells
};

/// depth {1,2,3} x width x final_relu {off,on} x {SGD(0.001), Adam}.
std::vector<TrainConfig> default_sweep_grid(std::size_t epochs = kDefaultSweepEpochs,
                                            std::uint64_t seed = 0,
                                            std::vector<std::size_t> widths = {8, 16, 32, 64,
                                                                               128, 256});

/// Trains every cell independently; cells run on up to `threads` workers.
/// Best is the lowest finite final MAE, ties by fewer parameters, then lower
/// init seed.
SweepResult sweep(const DatasetSplit& split, const std::vector<TrainConfig>& grid,
                  unsigned threads = 0);

/// Features look unstandardized (some |mean| or std above 5), which makes
/// plain SGD prone to blowing up.
bool raw_feature_scale(std::span<const Sample> samples);

struct CompareResult {
  std::vector<EpochStats> sgd;
  std::vector<EpochStats> adam;
  bool sgd_diverged = false;
  bool sgd_frozen = false;
  bool raw_feature_scale = false;
  std::string verdict;
};

/// SGD(lr 0.001, batch 128) against Adam(defaults) on the 7-32-32-1 network.
CompareResult compare_optimizers(const DatasetSplit& split,
                                 std::size_t epochs = kDefaultSweepEpochs,
                                 std::uint64_t seed = 0);

}  // namespace solarcast
