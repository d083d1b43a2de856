// SPDX-License-Identifier: Apache-2.0
//
// Verification metrics. Operating points are taken at every distinct score
// t (accept when score >= t) plus t = +inf:
//   FRR(t) = fraction of target scores below t
//   FAR(t) = fraction of nontarget scores at or above t
// EER interpolates linearly between the two adjacent operating points
// where FAR - FRR changes sign.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace dtsv::eval {

struct ScoreSet {
  std::vector<double> scores;
  std::vector<std::uint8_t> is_target;  // 1 = target, 0 = nontarget

  std::size_t size() const noexcept { return scores.size(); }
  void add(double score, bool target) {
    scores.push_back(score);
    is_target.push_back(target ? 1 : 0);
  }
  // Equal lengths, at least one entry, finite scores.
  void validate() const;
  // validate() plus both classes present.
  void validate_two_class() const;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

struct DcfParams {
  double p_target = 0.01;
  double c_fa = 1.0;
  double c_fr = 1.0;

  void validate() const;
};

struct DcfResult {
  double min_dcf = 0.0;
  double threshold = 0.0;
};

struct MetricResult {
  double eer = 0.0;
  double eer_threshold = 0.0;
  double min_dcf = 0.0;
  double min_dcf_threshold = 0.0;
  DcfParams params;
};

struct OperatingPoint {
  double threshold = 0.0;  // +inf for the reject-all point
  double frr = 0.0;
  double far = 0.0;
};

// Ascending thresholds; FRR non-decreasing, FAR non-increasing.
std::vector<OperatingPoint> operating_points(const ScoreSet& s);

EerResult compute_eer(const ScoreSet& s);
// Unnormalized detection cost minimized over the operating points.
DcfResult compute_min_dcf(const ScoreSet& s, const DcfParams& p = {});
MetricResult compute_metrics(const ScoreSet& s, const DcfParams& p = {});

// DET curve on normal-deviate axes.
void write_det_svg(const std::filesystem::path& path, const ScoreSet& s);

// Inverse of the standard normal CDF on (0, 1).
double probit(double p);

}  // namespace dtsv::eval
