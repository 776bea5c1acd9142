#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "solarcast/features.hpp"
#include "solarcast/neuralnet.hpp"

namespace solarcast {

/// Binary model file, little-endian:
///
///   bytes 0..7   magic "SCMLPMDL"
///   u32          format version (kModelFormatVersion)
///   u32          header length N
///   N bytes      UTF-8 JSON header: feature_order, input_dim, hidden_widths,
///                final_relu, init_seed, scaler (null or {mean, scale})
///   f64...       per layer: weights row-major (fan_out x fan_in), then biases
///
/// Nothing may follow the last bias.
inline constexpr std::uint32_t kModelFormatVersion = 1;

struct ModelFile {
  MLPModel model;
  std::optional<FeatureScaler> scaler;
  std::vector<std::string> feature_order;
};

/// Feature names written for a model of the given input arity: the station
/// feature order for 7 inputs, x0..x{n-1} otherwise.
std::vector<std::string> feature_order_for(std::size_t input_dim);

void save_model(const std::filesystem::path& path, const MLPModel& model,
                const std::optional<FeatureScaler>& scaler = std::nullopt);

/// Throws FormatError on bad magic, version, truncation or trailing bytes;
/// IoError if the file cannot be read.
ModelFile load_model(const std::filesystem::path& path);

}  // namespace solarcast
