#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "solarcast/curves.hpp"
#include "solarcast/errors.hpp"
#include "solarcast/synthetic.hpp"
#include "solarcast/train.hpp"
#include "test_util.hpp"

using namespace solarcast;

namespace {

std::vector<Sample> standardized_synthetic(std::size_t n, std::uint64_t seed = 1) {
  SyntheticOptions opt;
  opt.count = n;
  opt.seed = seed;
  const auto raw = synthetic_samples(opt);
  return apply_scaler(raw, fit_scaler(raw));
}

double dataset_mae(const MLPModel& model, std::span<const Sample> data) {
  std::vector<double> targets;
  for (const auto& s : data) targets.push_back(s.target);
  return mae_loss(forward(model, feature_matrix(data)).predictions, targets).loss;
}

std::vector<double> maes(const std::vector<EpochStats>& stats) {
  std::vector<double> out;
  for (const auto& s : stats) out.push_back(s.mean_train_mae);
  return out;
}

std::size_t count_polylines(const boost::property_tree::ptree& node) {
  std::size_t n = 0;
  for (const auto& [name, child] : node) {
    if (name == "polyline") ++n;
    n += count_polylines(child);
  }
  return n;
}

/// Parses the SVG as XML; throws on malformed input.
std::size_t svg_polylines(const std::string& svg) {
  std::istringstream in(svg);
  boost::property_tree::ptree tree;
  boost::property_tree::read_xml(in, tree);
  REQUIRE(tree.count("svg") == 1);
  return count_polylines(tree.get_child("svg"));
}

}  // namespace

TEST_CASE("TrainConfig validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.epochs = 1;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK_THROWS_AS(train(TrainConfig{}, std::span<const Sample>{}), ValidationError);
  CHECK(optimizer_name(SgdState{}) == "sgd");
  CHECK(optimizer_name(AdamState{}) == "adam");
}

TEST_CASE("constant target is learned") {
  auto data = standardized_synthetic(256);
  for (auto& s : data) s.target = 20.0;
  TrainConfig c;
  c.epochs = 200;
  c.batch_size = 8;
  const auto r = train(c, std::span<const Sample>(data));
  REQUIRE(r.stats.size() == 200);
  CHECK(dataset_mae(r.model, data) < 0.01 * dataset_mae(init_model(c.model_config), data));
  CHECK(r.stats.back().mean_train_mae < 0.05 * r.stats.front().mean_train_mae);
}

TEST_CASE("one full-batch SGD epoch is a single hand step") {
  const auto data = standardized_synthetic(50);
  TrainConfig c;
  c.optimizer = SgdState{0.01};
  c.epochs = 1;
  c.batch_size = kFullBatch;
  const auto r = train(c, std::span<const Sample>(data));
  CHECK(r.optimizer_steps == 1);

  auto hand = init_model(c.model_config);
  std::vector<double> targets;
  for (const auto& s : data) targets.push_back(s.target);
  const auto fw = forward(hand, feature_matrix(data));
  const auto g = backward(hand, fw.cache, mae_loss(fw.predictions, targets).gradient);
  sgd_step(hand, g, SgdState{0.01});
  CHECK(r.stats[0].mean_train_mae == doctest::Approx(mae_loss(fw.predictions, targets).loss).epsilon(1e-12));

  // Summation order follows the shuffle, so compare to rounding.
  for (std::size_t l = 0; l < hand.layers().size(); ++l) {
    const auto a = hand.layers()[l].weights.flat();
    const auto b = r.model.layers()[l].weights.flat();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < hand.layers()[l].bias.size(); ++i) {
      CHECK(r.model.layers()[l].bias[i] == doctest::Approx(hand.layers()[l].bias[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("training is deterministic and counts steps") {
  const auto data = standardized_synthetic(300);
  TrainConfig c;
  c.epochs = 5;
  c.batch_size = 64;
  c.shuffle_seed = 3;
  c.model_config.init_seed = 4;
  const auto a = train(c, std::span<const Sample>(data));
  const auto b = train(c, std::span<const Sample>(data));
  CHECK(a.model == b.model);
  CHECK(maes(a.stats) == maes(b.stats));
  CHECK(a.optimizer_steps == 5 * 5);  // ceil(300 / 64) = 5

  for (const std::size_t bs : {1UL, 7UL, 128UL, 299UL, 300UL, 1000UL}) {
    c.batch_size = bs;
    c.epochs = 2;
    CHECK(train(c, std::span<const Sample>(data)).optimizer_steps == 2 * ((300 + bs - 1) / bs));
  }
  for (std::size_t i = 0; i < a.stats.size(); ++i) {
    CHECK(a.stats[i].epoch_index == i + 1);
    CHECK(a.stats[i].mean_train_mae >= 0.0);
    CHECK(a.stats[i].mean_train_mse >= a.stats[i].mean_train_mae * a.stats[i].mean_train_mae - 1e-9);
  }
  c.shuffle_seed = 5;
  c.batch_size = 64;
  c.epochs = 5;
  CHECK_FALSE(train(c, std::span<const Sample>(data)).model == a.model);
}

TEST_CASE("frozen detector") {
  std::vector<double> decreasing;
  for (int i = 0; i < 200; ++i) decreasing.push_back(100.0 * std::pow(0.97, i));
  for (std::size_t n = 1; n <= decreasing.size(); ++n) {
    CHECK_FALSE(is_frozen(std::span(decreasing).first(n)));
  }
  std::vector<double> tiny_steps;
  for (int i = 0; i < 30; ++i) tiny_steps.push_back(5.0 - 1e-9 * i);
  CHECK_FALSE(is_frozen(tiny_steps));

  std::vector<double> flat(10, 3.0);
  CHECK_FALSE(is_frozen(flat));  // only 9 changes
  flat.push_back(3.0);
  CHECK(is_frozen(flat));
  flat.push_back(3.5);
  CHECK_FALSE(is_frozen(flat));

  SUBCASE("a network with no gradient flow freezes") {
    // Zero inputs, zero biases and a final ReLU: every prediction is 0 and ReLU'(0) = 0.
    std::vector<Sample> data(64);
    for (auto& s : data) s.target = 100.0;
    TrainConfig c;
    c.optimizer = SgdState{0.001};
    c.epochs = 15;
    c.model_config.final_relu = true;
    const auto r = train(c, std::span<const Sample>(data));
    REQUIRE(r.stats.size() == 15);
    for (std::size_t i = 0; i < 15; ++i) {
      CHECK(r.stats[i].mean_train_mae == 100.0);
      CHECK(r.stats[i].frozen == (i >= 10));
    }
    CHECK(r.model == init_model(c.model_config));
  }
}

TEST_CASE("lr=1e6 SGD overflows a deep net on raw features") {
  SyntheticOptions opt;
  opt.count = 500;
  const auto raw = synthetic_samples(opt);
  TrainConfig c;
  c.optimizer = SgdState{1e6};
  c.epochs = 10;
  c.model_config.hidden_widths = {256, 256, 256};
  const auto r = train(c, std::span<const Sample>(raw));
  REQUIRE_FALSE(r.stats.empty());
  CHECK(r.stats.back().diverged);
  CHECK(r.stats.size() < 10);
  CHECK_FALSE((std::isfinite(r.stats.back().mean_train_mae) && std::isfinite(r.stats.back().mean_train_mse)));
  for (std::size_t i = 0; i + 1 < r.stats.size(); ++i) CHECK_FALSE(r.stats[i].diverged);
}

TEST_CASE("Adam fits a realizable ReLU target") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> d(0, 1);
  std::array<double, kFeatureCount> w{};
  for (auto& v : w) v = 50.0 * d(rng);
  std::vector<Sample> data(1000);
  for (auto& s : data) {
    std::array<double, kFeatureCount> x{};
    double dot = 0;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      x[j] = d(rng);
      dot += w[j] * x[j];
    }
    s.features = FeatureVector::from_array(x);
    s.target = std::max(0.0, dot);
  }
  TrainConfig c;
  c.epochs = 200;
  const auto r = train(c, std::span<const Sample>(data));
  double best = r.stats.front().mean_train_mae;
  for (const auto& e : r.stats) best = std::min(best, e.mean_train_mae);
  CHECK(best * 10 <= r.stats.front().mean_train_mae);
}

TEST_CASE("sweep") {
  const auto data = standardized_synthetic(200);
  const auto sp = split(data, 0.8, 0);

  SUBCASE("singleton grid") {
    TrainConfig c;
    c.epochs = 3;
    const auto res = sweep(sp, {c});
    REQUIRE(res.cells.size() == 1);
    REQUIRE(res.best.has_value());
    CHECK(*res.best == 0);
    CHECK(res.cells[0].parameter_count == init_model(c.model_config).parameter_count());
  }
  SUBCASE("diverging cell is flagged and never best") {
    SyntheticOptions opt;
    const auto raw = split(synthetic_samples(opt), 0.8, 0);
    TrainConfig bad;
    bad.optimizer = SgdState{1e6};
    bad.epochs = 3;
    bad.model_config.hidden_widths = {256, 256, 256};
    TrainConfig ok;
    ok.epochs = 3;
    const auto res = sweep(raw, {bad, ok}, 2);
    REQUIRE(res.cells.size() == 2);
    CHECK(res.cells[0].excluded);
    CHECK(res.cells[0].final_stats.diverged);
    CHECK_FALSE(res.cells[1].excluded);
    CHECK(res.best == std::optional<std::size_t>(1));

    const auto only_bad = sweep(raw, {bad});
    CHECK_FALSE(only_bad.best.has_value());
  }
  SUBCASE("ties go to fewer parameters, then lower seed") {
    auto flat = sp;
    for (auto& s : flat.train) s.target = 0.0;
    TrainConfig a;
    a.epochs = 1;
    a.optimizer = SgdState{0.0};
    for (auto& s : flat.train) s.features = FeatureVector{};
    a.model_config.hidden_widths = {16};
    TrainConfig b = a;
    b.model_config.hidden_widths = {8};
    TrainConfig c2 = b;
    c2.model_config.init_seed = 7;
    // All-zero inputs with zero biases give zero predictions: every cell has MAE 0.
    const auto res = sweep(flat, {a, c2, b});
    REQUIRE(res.best.has_value());
    CHECK(*res.best == 2);
  }
  SUBCASE("default grid shape") {
    const auto grid = default_sweep_grid();
    CHECK(grid.size() == 72);
    std::size_t sgd = 0;
    for (const auto& g : grid) {
      CHECK(g.epochs == 100);
      CHECK(g.batch_size == 128);
      CHECK(g.model_config.hidden_widths.size() >= 1);
      CHECK(g.model_config.hidden_widths.size() <= 3);
      if (std::holds_alternative<SgdState>(g.optimizer)) {
        ++sgd;
        CHECK(std::get<SgdState>(g.optimizer).learning_rate == 0.001);
      }
    }
    CHECK(sgd == 36);
    CHECK(default_sweep_grid(100, 0, {7, 8}).size() == 24);
  }
}

TEST_CASE("full default grid on 500 samples") {
  const auto sp = split(standardized_synthetic(500), 0.8, 0);
  const auto res = sweep(sp, default_sweep_grid(2), 0);
  CHECK(res.cells.size() == 72);
  for (const auto& cell : res.cells) {
    CHECK((std::isfinite(cell.final_stats.mean_train_mae) || cell.excluded));
    CHECK(cell.final_stats.epoch_index == 2);
  }
  REQUIRE(res.best.has_value());
  for (const auto& cell : res.cells) {
    if (!cell.excluded) CHECK(res.cells[*res.best].final_stats.mean_train_mae <= cell.final_stats.mean_train_mae);
  }
}

TEST_CASE("compare_optimizers") {
  SyntheticOptions opt;
  opt.count = 600;
  const auto raw = split(synthetic_samples(opt), 0.8, 0);
  const auto res = compare_optimizers(raw, 40, 0);
  CHECK(res.adam.size() == 40);
  CHECK(res.sgd.size() == 40);
  CHECK_FALSE(res.sgd_diverged);
  CHECK(res.raw_feature_scale);
  CHECK_FALSE(res.verdict.empty());
  CHECK(res.verdict.find("raw-unit") != std::string::npos);

  const auto st = standardize(raw);
  CHECK_FALSE(raw_feature_scale(st.split.train));

  SUBCASE("Adam moving average decreases on standardized data") {
    const auto r = compare_optimizers(st.split, 100, 0);
    const auto m = maes(r.adam);
    std::vector<double> avg;
    for (std::size_t i = 10; i <= m.size(); ++i) {
      avg.push_back(std::accumulate(m.begin() + static_cast<long>(i - 10), m.begin() + static_cast<long>(i), 0.0) / 10);
    }
    for (std::size_t i = 1; i < avg.size(); ++i) CHECK(avg[i] < avg[i - 1]);
  }
}

TEST_CASE("curves") {
  testutil::TempDir dir;
  std::vector<EpochStats> stats;
  for (std::size_t i = 1; i <= 100; ++i) {
    stats.push_back({i, 100.0 / static_cast<double>(i) + 0.1, 1e4 / static_cast<double>(i * i), 0.001 * i,
                     false, i > 90});
  }
  write_curve_csv(dir / "c.csv", stats);
  std::ifstream in(dir / "c.csv");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  REQUIRE(lines.size() == 101);
  CHECK(lines[0] == kCurveCsvHeader);
  CHECK(read_curve_csv(dir / "c.csv") == stats);

  auto diverged = stats;
  diverged.resize(5);
  diverged.back().mean_train_mae = std::numeric_limits<double>::infinity();
  diverged.back().diverged = true;
  write_curve_csv(dir / "d.csv", diverged);
  const auto back = read_curve_csv(dir / "d.csv");
  CHECK(std::isinf(back.back().mean_train_mae));
  CHECK(back.back().diverged);

  const std::vector<NamedCurve> curves{{"sgd", diverged}, {"adam", stats}};
  CHECK(svg_polylines(render_svg(std::span(curves).first(1), "one")) == 1);
  CHECK(svg_polylines(render_svg(curves, "two & <more>")) == 2);
  CHECK(render_svg(curves, "t").find(kCurveAxisLabel) != std::string::npos);

  const auto written = emit_curves(curves, dir / "out");
  CHECK(written.size() == 5);
  for (const auto& name : {"sgd.csv", "sgd.svg", "adam.csv", "adam.svg", "comparison.svg"}) {
    CHECK(std::filesystem::exists(dir / "out" / name));
  }
  std::ifstream svg(dir / "out" / "comparison.svg");
  CHECK(svg_polylines(std::string(std::istreambuf_iterator<char>(svg), {})) == 2);
  CHECK(emit_curves(std::span(curves).first(1), dir / "single").size() == 2);
  CHECK_THROWS_AS(read_curve_csv(dir / "none.csv"), IoError);
}
