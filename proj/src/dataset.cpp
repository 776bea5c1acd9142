#include "solarcast/dataset.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "solarcast/errors.hpp"

namespace solarcast {

namespace fs = std::filesystem;

Sample sample_from_record(const EnrichedRecord& rec) {
  const StationReport& r = rec.report;
  Sample s;
  s.features = FeatureVector{r.temp_f,  r.humidity_pct,   r.dew_point_f,         r.wind_speed_mph,
                             r.rain_in, r.barometer_inhg, rec.solar_altitude_pct};
  s.target = r.solar_radiation_wm2;
  s.timestamp = parse_timestamp(r.last_update);
  return s;
}

LoadReport load_records(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw IoError(fmt::format("data root {} is not a readable directory", root.string()));
  }
  std::vector<fs::path> files;
  for (fs::directory_iterator it(root, ec), end; !ec && it != end; it.increment(ec)) {
    const fs::path& p = it->path();
    const std::string name = p.filename().string();
    if (it->is_regular_file() && p.extension() == ".json" && !name.starts_with('.')) {
      files.push_back(p);
    }
  }
  if (ec) throw IoError(fmt::format("cannot list {}: {}", root.string(), ec.message()));

  LoadReport report;
  for (const auto& path : files) {
    try {
      report.samples.push_back(sample_from_record(load_record(path)));
    } catch (const ValidationError& e) {
      report.skipped.emplace_back(path, e.what());
    } catch (const IoError& e) {
      report.skipped.emplace_back(path, e.what());
    }
  }
  if (files.empty()) spdlog::warn("no records found under {}", root.string());
  for (const auto& [path, why] : report.skipped) spdlog::warn("skipped {}: {}", path.string(), why);
  if (report.skipped.size() * 10 > files.size()) {
    throw FormatError(fmt::format("{} of {} record files under {} are malformed",
                                  report.skipped.size(), files.size(), root.string()));
  }
  std::stable_sort(report.samples.begin(), report.samples.end(),
                   [](const Sample& a, const Sample& b) { return a.timestamp < b.timestamp; });
  return report;
}

DatasetSplit split(std::vector<Sample> samples, double train_fraction, std::uint64_t split_seed) {
  if (samples.size() < 2) {
    throw ValidationError(fmt::format("need at least 2 samples to split, got {}", samples.size()));
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError(fmt::format("train fraction {} outside (0, 1)", train_fraction));
  }
  std::mt19937_64 rng(split_seed);
  std::shuffle(samples.begin(), samples.end(), rng);

  const auto n = samples.size();
  auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  DatasetSplit out;
  out.split_seed = split_seed;
  out.train_fraction = train_fraction;
  out.train.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.validation.assign(samples.begin() + static_cast<std::ptrdiff_t>(n_train), samples.end());
  return out;
}

Matrix feature_matrix(std::span<const Sample> samples) {
  Matrix m(samples.size(), kFeatureCount);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto row = samples[i].features.to_array();
    std::copy(row.begin(), row.end(), m.row(i).begin());
  }
  return m;
}

std::vector<Batch> batches(std::span<const Sample> samples, std::size_t batch_size,
                           std::uint64_t epoch_seed) {
  if (batch_size == 0) throw ValidationError("batch size must be at least 1");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(epoch_seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> out;
  out.reserve((samples.size() + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, order.size() - start);
    Batch b{Matrix(len, kFeatureCount), std::vector<double>(len)};
    for (std::size_t i = 0; i < len; ++i) {
      const Sample& s = samples[order[start + i]];
      const auto row = s.features.to_array();
      std::copy(row.begin(), row.end(), b.features.row(i).begin());
      b.targets[i] = s.target;
    }
    out.push_back(std::move(b));
  }
  return out;
}

FeatureScaler fit_scaler(std::span<const Sample> train,
                         std::vector<std::size_t>* constant_features) {
  if (train.empty()) throw ValidationError("cannot standardize an empty training set");
  const auto n = static_cast<double>(train.size());
  FeatureScaler scaler{std::vector<double>(kFeatureCount, 0.0),
                       std::vector<double>(kFeatureCount, 1.0)};
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    double mean = 0.0;
    for (const auto& s : train) mean += s.features.to_array()[f];
    mean /= n;
    double var = 0.0;
    for (const auto& s : train) {
      const double d = s.features.to_array()[f] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / n);
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
      spdlog::warn("feature {} has zero variance on the training set; left unscaled",
                   kFeatureNames[f]);
      if (constant_features) constant_features->push_back(f);
      continue;
    }
    scaler.mean[f] = mean;
    scaler.scale[f] = sd;
  }
  return scaler;
}

std::vector<Sample> apply_scaler(std::span<const Sample> samples, const FeatureScaler& scaler) {
  std::vector<Sample> out(samples.begin(), samples.end());
  for (auto& s : out) {
    auto row = s.features.to_array();
    scaler.apply(row);
    s.features = FeatureVector::from_array(row);
  }
  return out;
}

StandardizedSplit standardize(const DatasetSplit& in) {
  StandardizedSplit out;
  out.scaler = fit_scaler(in.train, &out.constant_features);
  out.split.split_seed = in.split_seed;
  out.split.train_fraction = in.train_fraction;
  out.split.train = apply_scaler(in.train, out.scaler);
  out.split.validation = apply_scaler(in.validation, out.scaler);
  return out;
}

namespace {

constexpr std::string_view kDatasetMagic = "# solarcast-dataset 1";

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string join(std::span<const double> xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += shortest(xs[i]);
  }
  return out;
}

std::string column_header() {
  std::string h = "split,timestamp";
  for (const auto name : kFeatureNames) h += fmt::format(",{}", name);
  h += fmt::format(",{}", kTargetName);
  return h;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto c = line.find(',', start);
    out.push_back(line.substr(start, c == std::string_view::npos ? line.size() - start : c - start));
    if (c == std::string_view::npos) break;
    start = c + 1;
  }
  return out;
}

double to_double(std::string_view s, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw FormatError(fmt::format("dataset line {}: '{}' is not a finite number", line_no, s));
  }
  return v;
}

std::vector<double> to_doubles(std::string_view csv, std::size_t line_no) {
  std::vector<double> out;
  for (const auto part : split_commas(csv)) out.push_back(to_double(part, line_no));
  return out;
}

}  // namespace

void write_dataset_file(const fs::path& path, const DatasetFile& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << kDatasetMagic << '\n';
  out << "# split_seed=" << data.split.split_seed << '\n';
  out << "# train_fraction=" << shortest(data.split.train_fraction) << '\n';
  if (data.scaler) {
    out << "# scaler_mean=" << join(data.scaler->mean) << '\n';
    out << "# scaler_scale=" << join(data.scaler->scale) << '\n';
  }
  out << column_header() << '\n';
  const auto emit = [&](std::string_view tag, const std::vector<Sample>& samples) {
    for (const auto& s : samples) {
      out << tag << ',' << format_rfc3339(s.timestamp) << ',' << join(s.features.to_array())
          << ',' << shortest(s.target) << '\n';
    }
  };
  emit("train", data.split.train);
  emit("validation", data.split.validation);
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

DatasetFile read_dataset_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));

  DatasetFile data;
  std::optional<std::vector<double>> mean;
  std::optional<std::vector<double>> scale;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;

  if (!std::getline(in, line) || line != kDatasetMagic) {
    throw FormatError(fmt::format("{} is not a solarcast dataset file", path.string()));
  }
  ++line_no;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!header_seen && line.starts_with("# ")) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string_view value = std::string_view(line).substr(eq + 1);
      if (key == "split_seed") {
        std::uint64_t seed = 0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
        if (ec != std::errc{} || ptr != value.data() + value.size()) {
          throw FormatError(fmt::format("dataset line {}: bad split_seed", line_no));
        }
        data.split.split_seed = seed;
      } else if (key == "train_fraction") {
        data.split.train_fraction = to_double(value, line_no);
      } else if (key == "scaler_mean") {
        mean = to_doubles(value, line_no);
      } else if (key == "scaler_scale") {
        scale = to_doubles(value, line_no);
      }
      continue;
    }
    if (!header_seen) {
      if (line != column_header()) {
        throw FormatError(fmt::format("dataset line {}: unexpected column header", line_no));
      }
      header_seen = true;
      continue;
    }
    const auto cols = split_commas(line);
    if (cols.size() != kFeatureCount + 3) {
      throw FormatError(fmt::format("dataset line {}: expected {} columns, got {}", line_no,
                                    kFeatureCount + 3, cols.size()));
    }
    Sample s;
    try {
      s.timestamp = parse_timestamp(cols[1]);
    } catch (const ValidationError& e) {
      throw FormatError(fmt::format("dataset line {}: {}", line_no, e.what()));
    }
    std::array<double, kFeatureCount> f{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) f[i] = to_double(cols[2 + i], line_no);
    s.features = FeatureVector::from_array(f);
    s.target = to_double(cols[2 + kFeatureCount], line_no);
    if (cols[0] == "train") {
      data.split.train.push_back(s);
    } else if (cols[0] == "validation") {
      data.split.validation.push_back(s);
    } else {
      throw FormatError(fmt::format("dataset line {}: unknown split '{}'", line_no, cols[0]));
    }
  }
  if (!header_seen) throw FormatError(fmt::format("{} has no column header", path.string()));
  if (mean.has_value() != scale.has_value()) {
    throw FormatError("dataset scaler needs both scaler_mean and scaler_scale");
  }
  if (mean) {
    if (mean->size() != kFeatureCount || scale->size() != kFeatureCount) {
      throw FormatError("dataset scaler must have one entry per feature");
    }
    data.scaler = FeatureScaler{*mean, *scale};
  }
  return data;
}

}  // namespace solarcast
