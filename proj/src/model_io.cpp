#include "solarcast/model_io.hpp"

#include <fmt/format.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "solarcast/errors.hpp"

namespace solarcast {

namespace {

constexpr char kMagic[8] = {'S', 'C', 'M', 'L', 'P', 'M', 'D', 'L'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  Reader(const std::string& data, const std::filesystem::path& path) : d_(data), path_(path) {}

  void need(std::size_t n) const {
    if (pos_ + n > d_.size()) {
      throw FormatError(fmt::format("{}: truncated model file", path_.string()));
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(d_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(d_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = d_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == d_.size(); }

 private:
  const std::string& d_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::string> feature_order_for(std::size_t input_dim) {
  std::vector<std::string> names;
  if (input_dim == kFeatureCount) {
    for (const auto n : kFeatureNames) names.emplace_back(n);
  } else {
    for (std::size_t i = 0; i < input_dim; ++i) names.push_back(fmt::format("x{}", i));
  }
  return names;
}

void save_model(const std::filesystem::path& path, const MLPModel& model,
                const std::optional<FeatureScaler>& scaler) {
  const MLPConfig& cfg = model.config();
  if (scaler && (scaler->mean.size() != cfg.input_dim || scaler->scale.size() != cfg.input_dim)) {
    throw ShapeError(fmt::format("scaler has {} entries, model expects {}", scaler->mean.size(),
                                 cfg.input_dim));
  }
  nlohmann::ordered_json header;
  header["feature_order"] = feature_order_for(cfg.input_dim);
  header["input_dim"] = cfg.input_dim;
  header["hidden_widths"] = cfg.hidden_widths;
  header["final_relu"] = cfg.final_relu;
  header["init_seed"] = cfg.init_seed;
  if (scaler) {
    header["scaler"] = {{"mean", scaler->mean}, {"scale", scaler->scale}};
  } else {
    header["scaler"] = nullptr;
  }
  const std::string header_text = header.dump();

  std::string blob(kMagic, sizeof kMagic);
  put_u32(blob, kModelFormatVersion);
  put_u32(blob, static_cast<std::uint32_t>(header_text.size()));
  blob += header_text;
  for (const auto& layer : model.layers()) {
    for (const double w : layer.weights.flat()) put_f64(blob, w);
    for (const double b : layer.bias) put_f64(blob, b);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader rd(data, path);
  if (rd.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw FormatError(fmt::format("{}: not a solarcast model file (bad magic)", path.string()));
  }
  const std::uint32_t version = rd.u32();
  if (version != kModelFormatVersion) {
    throw FormatError(fmt::format("{}: model format version {} (expected {})", path.string(),
                                  version, kModelFormatVersion));
  }
  const std::uint32_t header_len = rd.u32();

  MLPConfig cfg;
  std::optional<FeatureScaler> scaler;
  std::vector<std::string> order;
  try {
    const auto header = nlohmann::json::parse(rd.bytes(header_len));
    order = header.at("feature_order").get<std::vector<std::string>>();
    cfg.input_dim = header.at("input_dim").get<std::size_t>();
    cfg.hidden_widths = header.at("hidden_widths").get<std::vector<std::size_t>>();
    cfg.final_relu = header.at("final_relu").get<bool>();
    cfg.init_seed = header.at("init_seed").get<std::uint64_t>();
    if (const auto& s = header.at("scaler"); !s.is_null()) {
      scaler = FeatureScaler{s.at("mean").get<std::vector<double>>(),
                             s.at("scale").get<std::vector<double>>()};
    }
    cfg.validate();
    constexpr std::size_t kMaxWidth = std::size_t{1} << 20;
    if (cfg.input_dim > kMaxWidth) throw FormatError("input_dim too large");
    for (const auto w : cfg.hidden_widths) {
      if (w > kMaxWidth) throw FormatError("hidden width too large");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("{}: bad model header: {}", path.string(), e.what()));
  } catch (const FormatError&) {
    throw;
  } catch (const ValidationError& e) {
    throw FormatError(fmt::format("{}: bad model header: {}", path.string(), e.what()));
  }
  if (order.size() != cfg.input_dim) {
    throw FormatError(fmt::format("{}: feature_order has {} names for {} inputs", path.string(),
                                  order.size(), cfg.input_dim));
  }
  if (scaler && (scaler->mean.size() != cfg.input_dim || scaler->scale.size() != cfg.input_dim)) {
    throw FormatError(fmt::format("{}: scaler arity does not match input_dim", path.string()));
  }

  std::vector<DenseLayer> layers;
  std::size_t fan_in = cfg.input_dim;
  for (std::size_t l = 0; l <= cfg.hidden_widths.size(); ++l) {
    const std::size_t fan_out = l < cfg.hidden_widths.size() ? cfg.hidden_widths[l] : 1;
    rd.need((fan_out * fan_in + fan_out) * 8);
    DenseLayer layer{Matrix(fan_out, fan_in), std::vector<double>(fan_out)};
    for (double& w : layer.weights.flat()) w = rd.f64();
    for (double& b : layer.bias) b = rd.f64();
    layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  if (!rd.done()) {
    throw FormatError(fmt::format("{}: trailing bytes after parameters", path.string()));
  }
  return ModelFile{MLPModel(cfg, std::move(layers)), std::move(scaler), std::move(order)};
}

}  // namespace solarcast
