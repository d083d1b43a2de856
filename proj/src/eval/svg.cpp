// SPDX-License-Identifier: Apache-2.0
#include "dtsv/eval/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "dtsv/error.hpp"

namespace dtsv::eval {

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::pair<double, double> data_range(const Plot& p, bool x) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const Series& s : p.series)
    for (const auto& [px, py] : s.points) {
      const double v = x ? px : py;
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  if (hi - lo < 1e-12) {
    const double pad = std::max(std::abs(lo) * 0.1, 0.5);
    return {lo - pad, hi + pad};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

std::vector<Tick> auto_ticks(std::pair<double, double> r) {
  std::vector<Tick> ticks;
  const double span = r.second - r.first;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  for (double t = std::ceil(r.first / step) * step; t <= r.second + 1e-9 * step; t += step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", std::abs(t) < 1e-12 * step ? 0.0 : t);
    ticks.push_back({t, buf});
  }
  return ticks;
}

}  // namespace

std::string render_svg(const Plot& plot) {
  const auto xr = plot.x_range.value_or(data_range(plot, true));
  const auto yr = plot.y_range.value_or(data_range(plot, false));
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - xr.first) / (xr.second - xr.first) * pw; };
  auto sy = [&](double y) { return kTop + ph - (y - yr.first) / (yr.second - yr.first) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(plot.title) << "</text>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  const auto xt = plot.x_ticks.empty() ? auto_ticks(xr) : plot.x_ticks;
  const auto yt = plot.y_ticks.empty() ? auto_ticks(yr) : plot.y_ticks;
  for (const Tick& t : xt) {
    if (t.at < xr.first || t.at > xr.second) continue;
    const double x = sx(t.at);
    o << "<line x1=\"" << num(x) << "\" y1=\"" << kTop << "\" x2=\"" << num(x) << "\" y2=\""
      << kTop + ph << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << num(x) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">"
      << escape(t.label) << "</text>\n";
  }
  for (const Tick& t : yt) {
    if (t.at < yr.first || t.at > yr.second) continue;
    const double y = sy(t.at);
    o << "<line x1=\"" << kLeft << "\" y1=\"" << num(y) << "\" x2=\"" << kLeft + pw << "\" y2=\""
      << num(y) << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
      << escape(t.label) << "</text>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 18 << "\" text-anchor=\"middle\">"
    << escape(plot.x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(plot.y_label) << "</text>\n";

  double legend_y = kTop + 14;
  for (const Series& s : plot.series) {
    if (s.connect) {
      o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [x, y] : s.points) {
        if (std::isfinite(x) && std::isfinite(y)) o << num(sx(x)) << ',' << num(sy(y)) << ' ';
      }
      o << "\"/>\n";
    } else {
      for (const auto& [x, y] : s.points) {
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        o << "<circle cx=\"" << num(sx(x)) << "\" cy=\"" << num(sy(y)) << "\" r=\"4\" fill=\""
          << s.color << "\" fill-opacity=\"0.8\"/>\n";
      }
    }
    if (!s.label.empty()) {
      o << "<rect x=\"" << kLeft + pw - 110 << "\" y=\"" << legend_y - 9 << "\" width=\"10\" height=\"10\" fill=\""
        << s.color << "\"/>\n";
      o << "<text x=\"" << kLeft + pw - 94 << "\" y=\"" << legend_y << "\">" << escape(s.label) << "</text>\n";
      legend_y += 16;
    }
  }
  o << "</svg>\n";
  return o.str();
}

void write_svg(const std::filesystem::path& path, const Plot& plot) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail_io("cannot write " + path.string());
  f << render_svg(plot);
  if (!f) fail_io("write failed for " + path.string());
}

}  // namespace dtsv::eval
