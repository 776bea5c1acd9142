#include "solarcast/curves.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>

#include "solarcast/errors.hpp"

namespace solarcast {

namespace fs = std::filesystem;

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

constexpr std::array<std::string_view, 6> kPalette = {"#1f77b4", "#d62728", "#2ca02c",
                                                      "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace

void write_curve_csv(const fs::path& path, std::span<const EpochStats> stats) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << kCurveCsvHeader << '\n';
  for (const auto& s : stats) {
    out << s.epoch_index << ',' << shortest(s.mean_train_mae) << ','
        << shortest(s.mean_train_mse) << ',' << shortest(s.wall_seconds) << ','
        << (s.diverged ? 1 : 0) << ',' << (s.frozen ? 1 : 0) << '\n';
  }
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

std::vector<EpochStats> read_curve_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
  std::string line;
  if (!std::getline(in, line) || line != kCurveCsvHeader) {
    throw FormatError(fmt::format("{}: missing curve header", path.string()));
  }
  std::vector<EpochStats> stats;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> cols;
    std::string_view rest = line;
    while (true) {
      const auto c = rest.find(',');
      cols.push_back(rest.substr(0, c));
      if (c == std::string_view::npos) break;
      rest.remove_prefix(c + 1);
    }
    if (cols.size() != 6) {
      throw FormatError(fmt::format("{}:{}: expected 6 columns", path.string(), line_no));
    }
    const auto num = [&](std::string_view s, auto& v) {
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw FormatError(fmt::format("{}:{}: bad value '{}'", path.string(), line_no, s));
      }
    };
    EpochStats s;
    int diverged = 0;
    int frozen = 0;
    num(cols[0], s.epoch_index);
    num(cols[1], s.mean_train_mae);
    num(cols[2], s.mean_train_mse);
    num(cols[3], s.wall_seconds);
    num(cols[4], diverged);
    num(cols[5], frozen);
    s.diverged = diverged != 0;
    s.frozen = frozen != 0;
    stats.push_back(s);
  }
  return stats;
}

std::string render_svg(std::span<const NamedCurve> curves, const std::string& title) {
  constexpr double kWidth = 720, kHeight = 440;
  constexpr double kLeft = 80, kRight = 160, kTop = 40, kBottom = 60;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  std::size_t max_epoch = 1;
  double max_loss = 0.0;
  for (const auto& c : curves) {
    for (const auto& s : c.stats) {
      max_epoch = std::max(max_epoch, s.epoch_index);
      if (std::isfinite(s.mean_train_mae)) max_loss = std::max(max_loss, s.mean_train_mae);
    }
  }
  if (max_loss <= 0.0) max_loss = 1.0;
  const auto x_of = [&](double epoch) {
    return kLeft + (max_epoch > 1 ? (epoch - 1) / static_cast<double>(max_epoch - 1) : 0.5) * plot_w;
  };
  const auto y_of = [&](double loss) { return kTop + plot_h * (1.0 - loss / max_loss); };

  std::string svg = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\">\n"
      "<rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
      "text-anchor=\"middle\">{3}</text>\n",
      kWidth, kHeight, kLeft + plot_w / 2, xml_escape(title));

  svg += fmt::format(
      "<g stroke=\"black\" stroke-width=\"1\">\n"
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\"/>\n"
      "<line x1=\"{0}\" y1=\"{3}\" x2=\"{0}\" y2=\"{1}\"/>\n"
      "</g>\n",
      kLeft, kTop + plot_h, kLeft + plot_w, kTop);
  for (int i = 0; i <= 4; ++i) {
    const double v = max_loss * i / 4.0;
    svg += fmt::format(
        "<text x=\"{}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
        "text-anchor=\"end\">{:.4g}</text>\n",
        kLeft - 6, y_of(v) + 4, v);
  }
  svg += fmt::format(
      "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
      "text-anchor=\"middle\">1</text>\n"
      "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
      "text-anchor=\"middle\">{}</text>\n",
      x_of(1), kTop + plot_h + 16, x_of(static_cast<double>(max_epoch)), kTop + plot_h + 16,
      max_epoch);
  svg += fmt::format(
      "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"13\" "
      "text-anchor=\"middle\">epoch</text>\n"
      "<text x=\"18\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"13\" "
      "text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2f})\">{} (mean absolute "
      "error)</text>\n",
      kLeft + plot_w / 2, kHeight - 16, kTop + plot_h / 2, kTop + plot_h / 2, kCurveAxisLabel);

  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto colour = kPalette[i % kPalette.size()];
    std::string points;
    for (const auto& s : curves[i].stats) {
      if (!std::isfinite(s.mean_train_mae)) continue;
      if (!points.empty()) points += ' ';
      points += fmt::format("{:.2f},{:.2f}", x_of(static_cast<double>(s.epoch_index)),
                            y_of(s.mean_train_mae));
    }
    svg += fmt::format(
        "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", colour,
        points);
    svg += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\" "
        "fill=\"{}\">{}</text>\n",
        kLeft + plot_w + 10, kTop + 16 + 18.0 * static_cast<double>(i), colour,
        xml_escape(curves[i].name));
  }
  svg += "</svg>\n";
  return svg;
}

std::vector<fs::path> emit_curves(std::span<const NamedCurve> curves, const fs::path& dir) {
  if (curves.empty()) throw ValidationError("no curves to emit");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));

  const auto write_text = [](const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write {}", p.string()));
    out << text;
    if (!out) throw IoError(fmt::format("write failed for {}", p.string()));
  };

  std::vector<fs::path> written;
  for (const auto& c : curves) {
    if (c.stats.empty()) throw ValidationError(fmt::format("curve '{}' has no epochs", c.name));
    const fs::path csv = dir / (c.name + ".csv");
    write_curve_csv(csv, c.stats);
    written.push_back(csv);
    const fs::path svg = dir / (c.name + ".svg");
    write_text(svg, render_svg(std::span<const NamedCurve>(&c, 1), c.name + " training loss"));
    written.push_back(svg);
  }
  if (curves.size() > 1) {
    const fs::path svg = dir / "comparison.svg";
    write_text(svg, render_svg(curves, "training loss"));
    written.push_back(svg);
  }
  return written;
}

}  // namespace solarcast
