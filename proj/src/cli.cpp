#include "solarcast/cli.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "solarcast/curves.hpp"
#include "solarcast/dataset.hpp"
#include "solarcast/errors.hpp"
#include "solarcast/forecast_bridge.hpp"
#include "solarcast/ingest.hpp"
#include "solarcast/model_io.hpp"
#include "solarcast/solar_geometry.hpp"
#include "solarcast/train.hpp"

namespace solarcast {

namespace {

namespace fs = std::filesystem;

void init_logging(const std::string& level) {
  static const auto logger = [] {
    auto l = spdlog::stderr_color_mt("solarcast");
    spdlog::set_default_logger(l);
    return l;
  }();
  logger->set_level(spdlog::level::from_str(level));
}

std::vector<std::size_t> parse_widths(const std::string& text, std::string_view flag) {
  std::vector<std::size_t> out;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto part = rest.substr(0, comma);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size() || v == 0) {
      throw ValidationError(fmt::format("{}: '{}' is not a list of positive integers", flag, text));
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ValidationError(fmt::format("{} needs at least one width", flag));
  return out;
}

std::size_t parse_batch(const std::string& text) {
  if (text == "full" || text == "inf") return kFullBatch;
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || v == 0) {
    throw ValidationError(fmt::format("--batch: '{}' is neither a positive integer nor 'full'", text));
  }
  return v;
}

std::pair<std::string, int> parse_bind(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw ValidationError("--bind expects <addr>:<port>");
  int port = -1;
  const auto* b = text.data() + colon + 1;
  const auto* e = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(b, e, port);
  if (ec != std::errc{} || ptr != e || port < 0 || port > 65535) {
    throw ValidationError(fmt::format("--bind: bad port in '{}'", text));
  }
  return {text.substr(0, colon), port};
}

struct Options {
  std::string log_level = "info";
  double lat = 0.0;
  double lon = 0.0;
  std::string data_root;

  std::string bind = "0.0.0.0:8080";

  std::string out;
  bool standardize = false;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;

  std::string dataset;
  std::string optimizer = "adam";
  std::size_t epochs = kDefaultSweepEpochs;
  std::string batch = "128";
  std::string hidden = "32,32";
  bool final_relu = false;
  std::optional<double> lr;
  std::string out_model;
  std::string out_curve;

  std::string widths = "8,16,32,64,128,256";
  unsigned threads = 0;

  std::string model;
  std::string grid;
  std::vector<std::string> times;
};

DatasetSplit prepared_split(const DatasetFile& data) {
  if (!data.scaler) return data.split;
  DatasetSplit s = data.split;
  s.train = apply_scaler(data.split.train, *data.scaler);
  s.validation = apply_scaler(data.split.validation, *data.scaler);
  return s;
}

int cmd_solar_pos(const Options& o, std::ostream& out) {
  const GeoLocation loc(o.lat, o.lon);
  for (const auto& text : o.times) {
    const Instant t = parse_timestamp(text);
    const SunPosition p = sun_position(loc, t);
    const Instant noon = solar_noon(loc, solar_day(loc, t));
    nlohmann::ordered_json j;
    j["time"] = format_rfc3339(t);
    j["latitude_deg"] = loc.latitude_deg();
    j["longitude_deg"] = loc.longitude_deg();
    j["altitude_deg"] = p.altitude_deg;
    j["azimuth_deg"] = p.azimuth_deg;
    j["declination_deg"] = p.declination_deg;
    j["hour_angle_deg"] = p.hour_angle_deg;
    j["solar_noon"] = format_rfc3339(noon);
    j["altitude_ratio"] = solar_altitude_ratio(loc, t).value();
    j["potential_irradiance_wm2"] = potential_irradiance(p);
    out << j.dump() << '\n';
  }
  return kExitOk;
}

int cmd_ingest_serve(const Options& o, std::ostream& out) {
  const GeoLocation station(o.lat, o.lon);
  if (o.data_root.empty()) throw ValidationError("--data-root (or SOLARCAST_DATA_ROOT) is required");
  const auto [host, port] = parse_bind(o.bind);
  std::error_code ec;
  fs::create_directories(o.data_root, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", o.data_root, ec.message()));
  IngestServer server(station, o.data_root);
  const int bound = server.bind(host, port);
  out << fmt::format("listening on {}:{}", host, bound) << std::endl;
  spdlog::info("ingesting into {} for station ({}, {})", o.data_root, o.lat, o.lon);
  server.listen();
  return kExitOk;
}

int cmd_dataset_build(const Options& o, std::ostream& out) {
  if (o.data_root.empty()) throw ValidationError("--data-root (or SOLARCAST_DATA_ROOT) is required");
  const LoadReport loaded = load_records(o.data_root);
  DatasetFile file;
  file.split = split(loaded.samples, o.train_fraction, o.seed);
  if (o.standardize) file.scaler = standardize(file.split).scaler;
  write_dataset_file(o.out, file);
  nlohmann::ordered_json j;
  j["dataset"] = o.out;
  j["samples"] = loaded.samples.size();
  j["skipped"] = loaded.skipped.size();
  j["train"] = file.split.train.size();
  j["validation"] = file.split.validation.size();
  j["standardized"] = o.standardize;
  out << j.dump() << '\n';
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  const DatasetFile data = read_dataset_file(o.dataset);
  const DatasetSplit s = prepared_split(data);

  TrainConfig cfg;
  if (o.optimizer == "sgd") {
    cfg.optimizer = SgdState{o.lr.value_or(0.001)};
  } else {
    AdamState adam;
    adam.learning_rate = o.lr.value_or(adam.learning_rate);
    cfg.optimizer = adam;
  }
  cfg.epochs = o.epochs;
  cfg.batch_size = parse_batch(o.batch);
  cfg.shuffle_seed = o.seed;
  cfg.model_config.hidden_widths = parse_widths(o.hidden, "--hidden");
  cfg.model_config.final_relu = o.final_relu;
  cfg.model_config.init_seed = o.seed;

  const TrainResult tr = train(cfg, s);
  save_model(o.out_model, tr.model, data.scaler);
  if (!o.out_curve.empty()) {
    const NamedCurve curve{optimizer_name(cfg.optimizer), tr.stats};
    emit_curves(std::span<const NamedCurve>(&curve, 1), o.out_curve);
  }

  nlohmann::ordered_json j;
  j["model"] = o.out_model;
  j["optimizer"] = optimizer_name(cfg.optimizer);
  j["epochs_run"] = tr.stats.size();
  j["optimizer_steps"] = tr.optimizer_steps;
  j["final_train_mae"] = tr.stats.back().mean_train_mae;
  j["final_train_mse"] = tr.stats.back().mean_train_mse;
  j["diverged"] = tr.stats.back().diverged;
  j["frozen"] = tr.stats.back().frozen;
  if (!s.validation.empty()) {
    const ForwardResult fr = forward(tr.model, feature_matrix(s.validation));
    std::vector<double> targets;
    for (const auto& v : s.validation) targets.push_back(v.target);
    j["validation_mae"] = mae_loss(fr.predictions, targets).loss;
  }
  out << j.dump() << '\n';
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const DatasetFile data = read_dataset_file(o.dataset);
  const DatasetSplit s = prepared_split(data);
  const auto grid = default_sweep_grid(o.epochs, o.seed, parse_widths(o.widths, "--widths"));
  const SweepResult res = sweep(s, grid, o.threads);

  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", o.out, ec.message()));
  const fs::path table = fs::path(o.out) / "sweep.csv";
  std::ofstream csv(table, std::ios::trunc);
  if (!csv) throw IoError(fmt::format("cannot write {}", table.string()));
  csv << "cell,optimizer,hidden,final_relu,parameters,final_mae,final_mse,diverged,frozen,"
         "excluded,best\n";
  for (std::size_t i = 0; i < res.cells.size(); ++i) {
    const auto& c = res.cells[i];
    csv << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", i, optimizer_name(c.config.optimizer),
                       fmt::join(c.config.model_config.hidden_widths, "x"),
                       c.config.model_config.final_relu ? 1 : 0, c.parameter_count,
                       c.final_stats.mean_train_mae, c.final_stats.mean_train_mse,
                       c.final_stats.diverged ? 1 : 0, c.final_stats.frozen ? 1 : 0,
                       c.excluded ? 1 : 0, res.best == i ? 1 : 0);
  }
  if (!csv) throw IoError(fmt::format("write failed for {}", table.string()));

  nlohmann::ordered_json j;
  j["table"] = table.string();
  j["cells"] = res.cells.size();
  if (res.best) {
    const auto& b = res.cells[*res.best];
    j["best"] = {{"cell", *res.best},
                 {"optimizer", optimizer_name(b.config.optimizer)},
                 {"hidden", b.config.model_config.hidden_widths},
                 {"final_relu", b.config.model_config.final_relu},
                 {"final_mae", b.final_stats.mean_train_mae}};
  } else {
    j["best"] = nullptr;
  }
  out << j.dump() << '\n';
  return kExitOk;
}

int cmd_compare(const Options& o, std::ostream& out) {
  const DatasetFile data = read_dataset_file(o.dataset);
  const DatasetSplit s = prepared_split(data);
  const CompareResult res = compare_optimizers(s, o.epochs, o.seed);
  const std::vector<NamedCurve> curves{{"sgd", res.sgd}, {"adam", res.adam}};
  emit_curves(curves, o.out);
  nlohmann::ordered_json j;
  j["out"] = o.out;
  j["sgd_epochs"] = res.sgd.size();
  j["adam_epochs"] = res.adam.size();
  j["sgd_final_mae"] = res.sgd.back().mean_train_mae;
  j["adam_final_mae"] = res.adam.back().mean_train_mae;
  j["sgd_diverged"] = res.sgd_diverged;
  j["sgd_frozen"] = res.sgd_frozen;
  j["raw_feature_scale"] = res.raw_feature_scale;
  j["verdict"] = res.verdict;
  out << j.dump() << '\n';
  return kExitOk;
}

int cmd_predict(const Options& o, std::ostream& out) {
  const GeoLocation station(o.lat, o.lon);
  std::optional<Instant> t;
  if (!o.times.empty()) t = parse_timestamp(o.times.front());
  out << prediction_to_json(predict(o.model, o.grid, station, t)) << '\n';
  return kExitOk;
}

void add_station(CLI::App* cmd, Options& o) {
  cmd->add_option("--lat", o.lat, "Station latitude, degrees")
      ->envname("SOLARCAST_LAT")
      ->required();
  cmd->add_option("--lon", o.lon, "Station longitude, degrees")
      ->envname("SOLARCAST_LON")
      ->required();
}


/// First "--name" token the selected command chain does not define. CLI11
/// checks required options before extras, which would otherwise hide a typo.
std::optional<std::string> unknown_long_flag(const CLI::App& app, const std::vector<std::string>& args) {
  const CLI::App* current = &app;
  for (const auto& arg : args) {
    if (arg == "--") break;
    if (arg.rfind("--", 0) != 0) {
      for (const auto* sub : current->get_subcommands({})) {
        if (sub->check_name(arg)) {
          current = sub;
          break;
        }
      }
      continue;
    }
    const std::string name = arg.substr(0, arg.find('='));
    bool known = false;
    for (const CLI::App* a = current; a != nullptr && !known; a = a->get_parent()) {
      known = a->get_option_no_throw(name) != nullptr;
    }
    if (!known) return name;
  }
  return std::nullopt;
}
}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"solarcast: per-node solar radiation forecasting toolkit", "solarcast"};
  app.set_config("--config", "", "Read options from a TOML/INI file");
  app.add_option("--log-level", o.log_level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));
  app.require_subcommand(1);

  auto* solar = app.add_subcommand("solar-pos", "Sun position, solar noon and clear-sky potential");
  add_station(solar, o);
  solar->add_option("--time", o.times, "RFC 3339 instant (repeatable)")->required();

  auto* serve = app.add_subcommand("ingest-serve", "Accept station reports over HTTP");
  serve->add_option("--bind", o.bind, "addr:port")->capture_default_str();
  add_station(serve, o);
  serve->add_option("--data-root", o.data_root, "Record directory")->envname("SOLARCAST_DATA_ROOT");

  auto* dataset = app.add_subcommand("dataset", "Dataset tools (dataset build)");
  dataset->require_subcommand(1);
  auto* build = dataset->add_subcommand("build", "Stored records -> dataset file");
  build->add_option("--data-root", o.data_root, "Record directory")->envname("SOLARCAST_DATA_ROOT");
  build->add_option("--out", o.out, "Dataset file to write")->required();
  build->add_flag("--standardize", o.standardize, "Fit feature standardization on train");
  build->add_option("--train-fraction", o.train_fraction)->capture_default_str();
  build->add_option("--seed", o.seed, "Split seed")->capture_default_str();

  auto* tr = app.add_subcommand("train", "Train the regressor");
  tr->add_option("--dataset", o.dataset)->required();
  tr->add_option("--optimizer", o.optimizer)
      ->check(CLI::IsMember({"sgd", "adam"}))
      ->capture_default_str();
  tr->add_option("--epochs", o.epochs)->capture_default_str();
  tr->add_option("--batch", o.batch, "Batch size or 'full'")->capture_default_str();
  tr->add_option("--hidden", o.hidden, "Hidden widths, e.g. 32,32")->capture_default_str();
  tr->add_flag("--final-relu", o.final_relu, "Clamp outputs at zero");
  tr->add_option("--lr", o.lr, "Learning rate (default 0.001)");
  tr->add_option("--seed", o.seed)->capture_default_str();
  tr->add_option("--out-model", o.out_model)->required();
  tr->add_option("--out-curve", o.out_curve, "Directory for CSV/SVG curves");

  auto* sw = app.add_subcommand("sweep", "Hyperparameter grid");
  sw->add_option("--dataset", o.dataset)->required();
  sw->add_option("--out", o.out)->required();
  sw->add_option("--epochs", o.epochs)->capture_default_str();
  sw->add_option("--widths", o.widths)->capture_default_str();
  sw->add_option("--seed", o.seed)->capture_default_str();
  sw->add_option("--threads", o.threads, "0 = hardware concurrency");

  auto* cmp = app.add_subcommand("compare", "SGD vs Adam convergence curves");
  cmp->add_option("--dataset", o.dataset)->required();
  cmp->add_option("--out", o.out)->required();
  cmp->add_option("--epochs", o.epochs)->capture_default_str();
  cmp->add_option("--seed", o.seed)->capture_default_str();

  auto* pred = app.add_subcommand("predict", "Forecast grid snapshot -> irradiance");
  pred->add_option("--model", o.model)->required();
  pred->add_option("--grid", o.grid, "Grid snapshot JSONL")->required();
  add_station(pred, o);
  pred->add_option("--time", o.times, "Snapshot valid time (RFC 3339)")->expected(0, 1);

  std::vector<const char*> argv{"solarcast"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::RequiredError& e) {
    if (const auto flag = unknown_long_flag(app, args)) {
      return app.exit(CLI::ExtrasError({*flag}), out, err) == 0 ? kExitOk : kExitValidation;
    }
    return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    init_logging(o.log_level);
    if (solar->parsed()) return cmd_solar_pos(o, out);
    if (serve->parsed()) return cmd_ingest_serve(o, out);
    if (build->parsed()) return cmd_dataset_build(o, out);
    if (tr->parsed()) return cmd_train(o, out);
    if (sw->parsed()) return cmd_sweep(o, out);
    if (cmp->parsed()) return cmd_compare(o, out);
    if (pred->parsed()) return cmd_predict(o, out);
    err << app.help();
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace solarcast
