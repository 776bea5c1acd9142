#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "solarcast/features.hpp"
#include "solarcast/ingest.hpp"
#include "solarcast/matrix.hpp"
#include "solarcast/time.hpp"

namespace solarcast {

/// One training example. The timestamp is bookkeeping only and never enters
/// the feature vector.
struct Sample {
  FeatureVector features;
  double target = 0.0;  ///< solar radiation, W/m²
  Instant timestamp{};

  bool operator==(const Sample&) const = default;
};

Sample sample_from_record(const EnrichedRecord& record);

struct LoadReport {
  std::vector<Sample> samples;  ///< chronological
  std::vector<std::pair<std::filesystem::path, std::string>> skipped;
};

/// Reads every <key>.json record under root. Malformed files are skipped and
/// listed; more than 10% malformed raises FormatError. Unreadable root
/// raises IoError.
LoadReport load_records(const std::filesystem::path& root);

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> validation;
  std::uint64_t split_seed = 0;
  double train_fraction = 0.8;

  bool operator==(const DatasetSplit&) const = default;
};

/// Seeded shuffle then partition; train gets round(n * fraction) samples,
/// kept within [1, n - 1].
DatasetSplit split(std::vector<Sample> samples, double train_fraction, std::uint64_t split_seed);

struct Batch {
  Matrix features;  ///< rows = samples, cols = kFeatureCount
  std::vector<double> targets;
};

/// Feature matrix for samples in the given order.
Matrix feature_matrix(std::span<const Sample> samples);

/// One epoch: shuffle by epoch_seed, then chunk. The last batch may be short.
std::vector<Batch> batches(std::span<const Sample> samples, std::size_t batch_size,
                           std::uint64_t epoch_seed);

struct StandardizedSplit {
  DatasetSplit split;
  FeatureScaler scaler;
  std::vector<std::size_t> constant_features;  ///< left unscaled
};

/// Fits mean/std (population) on train only and applies them to both parts.
StandardizedSplit standardize(const DatasetSplit& split);
FeatureScaler fit_scaler(std::span<const Sample> train,
                         std::vector<std::size_t>* constant_features = nullptr);
std::vector<Sample> apply_scaler(std::span<const Sample> samples, const FeatureScaler& scaler);

/// Columnar text dataset file. Features are stored in station units; the
/// optional scaler is the one training should apply.
struct DatasetFile {
  DatasetSplit split;
  std::optional<FeatureScaler> scaler;

  bool operator==(const DatasetFile&) const = default;
};

void write_dataset_file(const std::filesystem::path& path, const DatasetFile& data);
DatasetFile read_dataset_file(const std::filesystem::path& path);

}  // namespace solarcast
