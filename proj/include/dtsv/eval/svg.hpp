// SPDX-License-Identifier: Apache-2.0
//
// Minimal SVG line/scatter plots for the analysis reports.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dtsv::eval {

struct Tick {
  double at = 0.0;
  std::string label;
};

struct Series {
  std::string label;
  std::string color = "#1f77b4";
  bool connect = false;  // polyline instead of markers
  std::vector<std::pair<double, double>> points;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Tick> x_ticks;  // auto when empty
  std::vector<Tick> y_ticks;
  std::optional<std::pair<double, double>> x_range;  // auto from data when unset
  std::optional<std::pair<double, double>> y_range;
  std::vector<Series> series;
};

std::string render_svg(const Plot& plot);
void write_svg(const std::filesystem::path& path, const Plot& plot);

}  // namespace dtsv::eval
