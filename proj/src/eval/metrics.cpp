// SPDX-License-Identifier: Apache-2.0
#include "dtsv/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>

#include "dtsv/error.hpp"
#include "dtsv/eval/svg.hpp"

namespace dtsv::eval {

void ScoreSet::validate() const {
  require(scores.size() == is_target.size(), "scores: " + std::to_string(scores.size()) +
                                                 " scores but " + std::to_string(is_target.size()) +
                                                 " labels");
  require(!scores.empty(), "scores: empty score set");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) fail_numeric("scores: non-finite score at index " + std::to_string(i));
  }
}

void ScoreSet::validate_two_class() const {
  validate();
  const auto nt = std::count(is_target.begin(), is_target.end(), std::uint8_t{1});
  require(nt > 0 && static_cast<std::size_t>(nt) < scores.size(),
          "scores: need both target and nontarget trials");
}

void DcfParams::validate() const {
  require(p_target > 0.0 && p_target < 1.0, "dcf: p_target must be in (0, 1)");
  require(c_fa >= 0.0 && c_fr >= 0.0 && std::isfinite(c_fa) && std::isfinite(c_fr),
          "dcf: costs must be finite and >= 0");
}

std::vector<OperatingPoint> operating_points(const ScoreSet& s) {
  s.validate_two_class();
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });
  const double n_tar = static_cast<double>(std::count(s.is_target.begin(), s.is_target.end(), std::uint8_t{1}));
  const double n_non = static_cast<double>(s.size()) - n_tar;

  std::vector<OperatingPoint> pts;
  std::size_t below_tar = 0, below_non = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = s.scores[order[i]];
    pts.push_back({t, below_tar / n_tar, (n_non - below_non) / n_non});
    for (; i < order.size() && s.scores[order[i]] == t; ++i) {
      if (s.is_target[order[i]]) ++below_tar; else ++below_non;
    }
  }
  pts.push_back({std::numeric_limits<double>::infinity(), 1.0, 0.0});
  return pts;
}

EerResult compute_eer(const ScoreSet& s) {
  const std::vector<OperatingPoint> pts = operating_points(s);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double dk = pts[k].far - pts[k].frr;
    if (dk > 0.0) continue;
    if (dk == 0.0 || k == 0) return {pts[k].frr, pts[k].threshold};
    const OperatingPoint& a = pts[k - 1];
    const OperatingPoint& b = pts[k];
    const double da = a.far - a.frr;
    const double alpha = da / (da - dk);
    const double eer = a.frr + alpha * (b.frr - a.frr);
    const double thr = std::isfinite(b.threshold) ? a.threshold + alpha * (b.threshold - a.threshold)
                                                  : a.threshold;
    return {eer, thr};
  }
  // Unreachable: the last point has FAR - FRR = -1.
  return {1.0, pts.back().threshold};
}

DcfResult compute_min_dcf(const ScoreSet& s, const DcfParams& p) {
  p.validate();
  DcfResult best{std::numeric_limits<double>::infinity(), 0.0};
  for (const OperatingPoint& op : operating_points(s)) {
    const double dcf = p.c_fr * p.p_target * op.frr + p.c_fa * (1.0 - p.p_target) * op.far;
    if (dcf < best.min_dcf) best = {dcf, op.threshold};
  }
  return best;
}

MetricResult compute_metrics(const ScoreSet& s, const DcfParams& p) {
  const EerResult e = compute_eer(s);
  const DcfResult d = compute_min_dcf(s, p);
  return {e.eer, e.threshold, d.min_dcf, d.threshold, p};
}

double probit(double p) {
  require(p > 0.0 && p < 1.0, "probit: argument must be in (0, 1)");
  // Acklam's rational approximation, refined by one Halley step on erfc.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01, -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double lo = 0.02425;
  double x;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - lo) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

void write_det_svg(const std::filesystem::path& path, const ScoreSet& s) {
  // Clip rates away from 0 and 1 so every point has a finite deviate.
  const double floor_rate = 1e-4;
  auto dev = [&](double r) { return probit(std::clamp(r, floor_rate, 1.0 - floor_rate)); };
  std::vector<OperatingPoint> pts = operating_points(s);
  Plot plot;
  plot.title = "DET curve";
  plot.x_label = "false acceptance rate";
  plot.y_label = "false rejection rate";
  const double ticks[] = {0.001, 0.01, 0.05, 0.2, 0.5, 0.8, 0.95};
  for (double t : ticks) {
    char label[16];
    std::snprintf(label, sizeof label, "%g%%", t * 100.0);
    plot.x_ticks.push_back({dev(t), label});
    plot.y_ticks.push_back({dev(t), label});
  }
  Series line;
  line.connect = true;
  for (const OperatingPoint& op : pts) line.points.push_back({dev(op.far), dev(op.frr)});
  plot.series.push_back(std::move(line));
  plot.x_range = {dev(floor_rate), dev(1.0 - floor_rate)};
  plot.y_range = plot.x_range;
  write_svg(path, plot);
}

}  // namespace dtsv::eval
