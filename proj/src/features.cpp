#include "solarcast/features.hpp"

#include <fmt/format.h>

#include <cmath>

#include "solarcast/errors.hpp"

namespace solarcast {

FeatureVector FeatureVector::from_array(std::span<const double> v) {
  if (v.size() != kFeatureCount) {
    throw ShapeError(fmt::format("feature vector needs {} entries, got {}",
                                 kFeatureCount, v.size()));
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw ValidationError(fmt::format("feature {} is not finite", kFeatureNames[i]));
    }
  }
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
}

void FeatureScaler::apply(std::span<double> row) const {
  if (row.size() != mean.size() || row.size() != scale.size()) {
    throw ShapeError(fmt::format("scaler has {} features, row has {}", mean.size(),
                                 row.size()));
  }
  for (std::size_t i = 0; i < row.size(); ++i) row[i] = (row[i] - mean[i]) / scale[i];
}

std::vector<double> FeatureScaler::applied(std::span<const double> row) const {
  std::vector<double> out(row.begin(), row.end());
  apply(out);
  return out;
}

}  // namespace solarcast
