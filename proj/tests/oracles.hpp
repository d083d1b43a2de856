// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations shared by the unit tests and the
// acceptance binary. Everything here is written as plain loops so it does
// not share code paths with the library under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "dtsv/dsp/fbank.hpp"
#include "dtsv/dsp/tdfe.hpp"
#include "dtsv/eval/attention_distance.hpp"
#include "dtsv/eval/metrics.hpp"
#include "dtsv/losses/losses.hpp"
#include "dtsv/model/hidden_states.hpp"
#include "dtsv/rng.hpp"

namespace dtsv::testing {

// Largest |a - b| / max(|b|, 1e-8) between the mel-initialized TDFE and the
// FFT mel-fbank on n random one-second signals at the default frontend.
inline double mel_equivalence_error(std::uint64_t seed, int n_signals) {
  const dsp::FbankConfig cfg;
  const dsp::TdfeParams p = dsp::tdfe_init_mel(cfg);
  double worst = 0.0;
  for (int s = 0; s < n_signals; ++s) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
    dsp::Waveform w;
    w.sample_rate = cfg.sample_rate;
    w.samples.resize(static_cast<std::size_t>(cfg.sample_rate));
    // Alternate white noise and a random chirp-like tone mix.
    if (s % 2 == 0) {
      for (double& v : w.samples) v = rng.uniform(-1.0, 1.0);
    } else {
      const double f1 = rng.uniform(50.0, 4000.0), f2 = rng.uniform(50.0, 7000.0);
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double t = static_cast<double>(i) / cfg.sample_rate;
        w.samples[i] = 0.5 * std::sin(2 * M_PI * f1 * t) + 0.3 * std::sin(2 * M_PI * f2 * t * (1 + t)) +
                       0.05 * rng.normal();
      }
    }
    const dsp::FeatureMap ref = dsp::melfbank_features(w, cfg);
    const dsp::FeatureMap got = dsp::tdfe_forward(p, w).features;
    if (ref.values.shape() != got.values.shape()) return std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ref.values.size(); ++i) {
      const double a = got.values[i], b = ref.values[i];
      worst = std::max(worst, std::abs(a - b) / std::max(std::abs(b), 1e-8));
    }
  }
  return worst;
}

// Brute-force error-rate oracle: evaluates FRR/FAR at every midpoint
// between sorted distinct scores plus both ends, then interpolates the
// crossing linearly between the adjacent operating points.
struct SweepPoint {
  double threshold, frr, far;
};

inline std::vector<SweepPoint> sweep_points(const std::vector<double>& tgt, const std::vector<double>& non) {
  std::vector<double> all(tgt);
  all.insert(all.end(), non.begin(), non.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> thr;
  thr.push_back(all.front() - 1.0);
  for (std::size_t i = 0; i + 1 < all.size(); ++i) thr.push_back(0.5 * (all[i] + all[i + 1]));
  thr.push_back(all.back() + 1.0);
  std::vector<SweepPoint> pts;
  for (double t : thr) {
    double miss = 0, fa = 0;
    for (double s : tgt) miss += s < t;
    for (double s : non) fa += s >= t;
    pts.push_back({t, miss / tgt.size(), fa / non.size()});
  }
  return pts;
}

inline double oracle_eer(const std::vector<double>& tgt, const std::vector<double>& non) {
  const auto pts = sweep_points(tgt, non);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].frr == pts[i].far) return pts[i].frr;
    if (i + 1 < pts.size()) {
      const double d0 = pts[i].frr - pts[i].far, d1 = pts[i + 1].frr - pts[i + 1].far;
      if (d0 < 0 && d1 > 0) {
        const double a = d0 / (d0 - d1);
        return pts[i].frr + a * (pts[i + 1].frr - pts[i].frr);
      }
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

inline double oracle_min_dcf(const std::vector<double>& tgt, const std::vector<double>& non, double p_tar,
                             double c_fa, double c_fr) {
  double best = std::numeric_limits<double>::infinity();
  for (const SweepPoint& p : sweep_points(tgt, non)) {
    best = std::min(best, c_fr * p_tar * p.frr + c_fa * (1 - p_tar) * p.far);
  }
  return best;
}

// Random two-class score set of the given size. Every third set is
// quantized to a coarse grid so ties between and within classes occur.
inline eval::ScoreSet random_score_set(Rng& rng, std::size_t n) {
  eval::ScoreSet s;
  const bool coarse = rng.uniform_int(3) == 0;
  const double shift = rng.uniform(0.0, 2.0);
  for (std::size_t i = 0; i < n; ++i) {
    const bool target = i == 0 ? true : i == 1 ? false : rng.uniform() < 0.4;
    double v = rng.normal() + (target ? shift : 0.0);
    if (coarse) v = std::round(v * 4.0) / 4.0;
    s.add(v, target);
  }
  return s;
}

struct MetricOracleError {
  double eer = 0.0;
  double min_dcf = 0.0;
};

// Largest deviation of compute_eer / compute_min_dcf from the sweep
// oracles over n random sets of size 2..1000 at P_tar 0.01, C_fa = C_fr = 1.
inline MetricOracleError metric_oracle_error(std::uint64_t seed, int n) {
  MetricOracleError worst;
  for (int k = 0; k < n; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    const std::size_t size = k == 0 ? 2 : 2 + rng.uniform_int(999);
    const eval::ScoreSet s = random_score_set(rng, size);
    std::vector<double> tgt, non;
    for (std::size_t i = 0; i < s.size(); ++i) (s.is_target[i] ? tgt : non).push_back(s.scores[i]);
    const eval::DcfParams p{0.01, 1.0, 1.0};
    worst.eer = std::max(worst.eer, std::abs(eval::compute_eer(s).eer - oracle_eer(tgt, non)));
    worst.min_dcf = std::max(worst.min_dcf, std::abs(eval::compute_min_dcf(s, p).min_dcf -
                                                     oracle_min_dcf(tgt, non, p.p_target, p.c_fa, p.c_fr)));
  }
  return worst;
}

// ---- loss oracles ----

inline std::vector<double> softmax_oracle(std::span<const double> v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  std::vector<double> p(v.size());
  double z = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) z += (p[i] = std::exp(v[i] - mx));
  for (double& x : p) x /= z;
  return p;
}

inline double kl_oracle(std::span<const double> cls, std::span<const double> frame) {
  const auto p = softmax_oracle(cls), q = softmax_oracle(frame);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

inline double cosine_distance_oracle(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i], aa += a[i] * a[i], bb += b[i] * b[i];
  return 1.0 - ab / std::sqrt(aa * bb);
}

// Mean over layers and frames 1..T of the per-frame distance to row 0.
template <class Dist>
double diffluence_oracle(const model::HiddenStates& h, Dist dist) {
  double total = 0.0;
  for (const ad::Tensor& layer : h.layers) {
    for (std::size_t i = 1; i < layer.rows(); ++i) total += dist(layer.row(0), layer.row(i));
  }
  return total / static_cast<double>(h.num_layers() * h.num_frames());
}

inline model::HiddenStates random_hidden_states(Rng& rng, std::size_t layers, std::size_t frames,
                                                std::size_t dim, double scale) {
  model::HiddenStates h;
  for (std::size_t l = 0; l < layers; ++l) {
    ad::Tensor t({frames + 1, dim});
    for (double& v : t.values()) v = scale * rng.normal();
    h.layers.push_back(std::move(t));
  }
  return h;
}

// Largest deviation of the KL and cosine diffluence from the double-loop
// oracles over n random hidden-state stacks. The KL cap is drawn per stack
// so clipped and unclipped terms both occur.
inline double diffluence_oracle_error(std::uint64_t seed, int n) {
  double worst = 0.0;
  for (int k = 0; k < n; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    const std::size_t layers = 1 + rng.uniform_int(6), frames = 1 + rng.uniform_int(40),
                      dim = 2 + rng.uniform_int(63);
    const model::HiddenStates h = random_hidden_states(rng, layers, frames, dim, rng.uniform(0.1, 3.0));
    const double cap = rng.uniform(0.5, 20.0);
    const double kl = losses::diffluence_kl(h, cap).value;
    const double kl_ref = diffluence_oracle(h, [&](auto a, auto b) { return std::min(kl_oracle(a, b), cap); });
    const double cs = losses::diffluence_cosine(h).value;
    const double cs_ref = diffluence_oracle(h, cosine_distance_oracle);
    worst = std::max({worst, std::abs(kl - kl_ref), std::abs(cs - cs_ref)});
  }
  return worst;
}

// Largest |AAM(m=0, tau=1) - softmax cross-entropy over cosines| on n
// random batches.
inline double aam_reduction_error(std::uint64_t seed, int n) {
  double worst = 0.0;
  for (int k = 0; k < n; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    const std::size_t batch = 1 + rng.uniform_int(16), classes = 2 + rng.uniform_int(30),
                      dim = 2 + rng.uniform_int(40);
    ad::Tensor e({batch, dim}), w({classes, dim});
    for (double& v : e.values()) v = rng.normal();
    for (double& v : w.values()) v = rng.normal();
    std::vector<int> labels(batch);
    for (int& l : labels) l = static_cast<int>(rng.uniform_int(classes));
    double ce = 0.0;
    for (std::size_t n_ = 0; n_ < batch; ++n_) {
      std::vector<double> cos(classes);
      for (std::size_t j = 0; j < classes; ++j) cos[j] = 1.0 - cosine_distance_oracle(e.row(n_), w.row(j));
      ce -= std::log(softmax_oracle(cos)[static_cast<std::size_t>(labels[n_])]);
    }
    ce /= static_cast<double>(batch);
    worst = std::max(worst, std::abs(losses::aam_softmax_loss(e, labels, w, 1.0, 0.0) - ce));
  }
  return worst;
}

// Largest diffluence_kl value over stacks where every frame equals CLS.
inline double kl_self_divergence(std::uint64_t seed, int n) {
  double worst = 0.0;
  for (int k = 0; k < n; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    model::HiddenStates h = random_hidden_states(rng, 1 + rng.uniform_int(4), 1 + rng.uniform_int(20),
                                                 2 + rng.uniform_int(60), 2.0);
    for (ad::Tensor& layer : h.layers) {
      for (std::size_t i = 1; i < layer.rows(); ++i) {
        std::copy(layer.row(0).begin(), layer.row(0).end(), layer.row(i).begin());
      }
    }
    worst = std::max(worst, std::abs(losses::diffluence_kl(h, 10.0).value));
  }
  return worst;
}

// Per-layer, per-head pooled distance recomputed with plain loops.
inline std::vector<double> attention_distance_oracle(const std::vector<model::HiddenStates>& states,
                                                     std::size_t heads, eval::DistanceKind kind) {
  const std::size_t layers = states.front().num_layers(), dim = states.front().dim(), w = dim / heads;
  std::vector<double> sum(layers * heads, 0.0);
  double frames = 0.0;
  for (const model::HiddenStates& h : states) {
    frames += static_cast<double>(h.num_frames());
    for (std::size_t l = 0; l < layers; ++l) {
      const ad::Tensor& x = h.layers[l];
      for (std::size_t i = 1; i < x.rows(); ++i) {
        for (std::size_t hd = 0; hd < heads; ++hd) {
          const auto a = x.row(0).subspan(hd * w, w), b = x.row(i).subspan(hd * w, w);
          sum[l * heads + hd] += kind == eval::DistanceKind::kl ? kl_oracle(a, b) : cosine_distance_oracle(a, b);
        }
      }
    }
  }
  for (double& v : sum) v /= frames;
  return sum;
}

}  // namespace dtsv::testing
