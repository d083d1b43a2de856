// SPDX-License-Identifier: Apache-2.0
#include "dtsv/eval/attention_distance.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dtsv/error.hpp"
#include "dtsv/eval/svg.hpp"
#include "dtsv/format.hpp"
#include "dtsv/parallel.hpp"

namespace dtsv::eval {

const char* distance_name(DistanceKind k) { return k == DistanceKind::kl ? "kl" : "cosine"; }

namespace {

double log_sum_exp(const double* x, std::size_t n) {
  const double mx = *std::max_element(x, x + n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i] - mx);
  return mx + std::log(s);
}

double kl_slice(const double* a, const double* b, std::size_t n) {
  const double la = log_sum_exp(a, n), lb = log_sum_exp(b, n);
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lp = a[i] - la;
    kl += std::exp(lp) * (lp - (b[i] - lb));
  }
  return std::max(kl, 0.0);
}

double cosine_slice(const double* a, const double* b, std::size_t n) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) fail_numeric("attention_distance: zero-norm head slice");
  return std::clamp(1.0 - dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 2.0);
}

}  // namespace

AttentionDistanceReport attention_distance(std::span<const model::HiddenStates> states,
                                           std::size_t heads, DistanceKind kind) {
  require(!states.empty(), "attention_distance: need at least one utterance");
  require(heads >= 1, "attention_distance: heads must be >= 1");
  const std::size_t L = states[0].num_layers();
  const std::size_t d = states[0].dim();
  require(d % heads == 0, "attention_distance: dim " + std::to_string(d) + " not divisible by " +
                              std::to_string(heads) + " heads");
  const std::size_t dh = d / heads;

  AttentionDistanceReport r;
  r.kind = kind;
  r.layers = L;
  r.heads = heads;
  r.utterances = states.size();
  r.values.assign(L * heads, 0.0);
  std::size_t total_frames = 0;
  for (const model::HiddenStates& h : states) {
    h.validate();
    require(h.num_layers() == L && h.dim() == d, "attention_distance: inconsistent hidden-state shapes");
    const std::size_t T = h.num_frames();
    total_frames += T;
    for (std::size_t l = 0; l < L; ++l) {
      const ad::Tensor& v = h.layers[l];
      for (std::size_t hd = 0; hd < heads; ++hd) {
        const double* cls = v.data() + hd * dh;
        double s = 0.0;
        for (std::size_t i = 1; i <= T; ++i) {
          const double* f = v.data() + i * d + hd * dh;
          s += kind == DistanceKind::kl ? kl_slice(cls, f, dh) : cosine_slice(cls, f, dh);
        }
        r.values[l * heads + hd] += s;
      }
    }
  }
  for (double& v : r.values) v /= static_cast<double>(total_frames);
  return r;
}

AttentionDistanceReport attention_distance(const model::Model& m, std::span<const dsp::Waveform> utts,
                                           DistanceKind kind, unsigned threads) {
  require(!utts.empty(), "attention_distance: need at least one utterance");
  std::vector<model::HiddenStates> states(utts.size());
  parallel_for(utts.size(), threads, [&](std::size_t i) { states[i] = model::forward(m, utts[i]).hidden; });
  return attention_distance(states, m.config.n_heads, kind);
}

void write_attention_csv(const std::filesystem::path& path, const AttentionDistanceReport& r) {
  std::string text = "layer,head,distance\n";
  for (std::size_t l = 0; l < r.layers; ++l)
    for (std::size_t h = 0; h < r.heads; ++h)
      text += std::to_string(l) + ',' + std::to_string(h) + ',' + format_double(r.at(l, h)) + '\n';
  write_text_file(path, text);
}

void write_attention_svg(const std::filesystem::path& path, const AttentionDistanceReport& r) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  Plot p;
  p.title = std::string("Attention distance per layer (") + distance_name(r.kind) + ")";
  p.x_label = "layer";
  p.y_label = "distance";
  for (std::size_t l = 0; l < r.layers; ++l) p.x_ticks.push_back({static_cast<double>(l + 1), std::to_string(l + 1)});
  p.x_range = std::pair{0.5, static_cast<double>(r.layers) + 0.5};
  for (std::size_t h = 0; h < r.heads; ++h) {
    Series s;
    s.label = "head " + std::to_string(h);
    s.color = colors[h % 8];
    for (std::size_t l = 0; l < r.layers; ++l) {
      // Small per-head offset keeps coincident points visible.
      const double jitter = r.heads > 1 ? 0.3 * (static_cast<double>(h) / (r.heads - 1) - 0.5) : 0.0;
      s.points.push_back({static_cast<double>(l + 1) + jitter, r.at(l, h)});
    }
    p.series.push_back(std::move(s));
  }
  write_svg(path, p);
}

}  // namespace dtsv::eval
