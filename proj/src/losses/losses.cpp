// SPDX-License-Identifier: Apache-2.0
#include "dtsv/losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dtsv/autodiff/ops.hpp"
#include "dtsv/error.hpp"

namespace dtsv::losses {

using ad::Tensor;
using ad::Var;

void LossConfig::validate() const {
  require(std::isfinite(scale) && scale > 0.0, "loss: scale must be finite and > 0");
  require(std::isfinite(margin) && margin >= 0.0 && margin < std::numbers::pi / 2,
          "loss: margin must be in [0, pi/2)");
  require(std::isfinite(lambda) && lambda >= 0.0, "loss: lambda must be finite and >= 0");
  require(std::isfinite(kl_cap) && kl_cap > 0.0, "loss: kl_cap must be finite and > 0");
}

namespace {

void check_labels(std::span<const int> labels, std::size_t n, std::size_t classes) {
  require(labels.size() == n, "aam_softmax_loss: " + std::to_string(labels.size()) +
                                  " labels for " + std::to_string(n) + " rows");
  for (int l : labels) {
    require(l >= 0 && static_cast<std::size_t>(l) < classes,
            "aam_softmax_loss: label " + std::to_string(l) + " outside [0, " +
                std::to_string(classes) + ")");
  }
}

void check_layers(std::span<const Var> layers) {
  require(!layers.empty(), "diffluence: no layers");
  const auto& s0 = layers[0].shape();
  require(s0.size() == 2 && s0[0] >= 2, "diffluence: layers must be (T+1) x d with T >= 1");
  for (Var v : layers) require(v.shape() == s0, "diffluence: layer shapes differ");
}

DiffluenceVars combine(std::vector<Var> terms) {
  DiffluenceVars out;
  Var acc = terms[0];
  for (std::size_t l = 1; l < terms.size(); ++l) acc = ad::add(acc, terms[l]);
  out.value = ad::scale(acc, 1.0 / static_cast<double>(terms.size()));
  out.per_layer = std::move(terms);
  return out;
}

}  // namespace

Var aam_from_cosines(Var cosines, std::span<const int> labels, double scale, double margin) {
  const Tensor& c = cosines.value();
  require(c.rank() == 2, "aam_softmax_loss: cosines must be N x J");
  check_labels(labels, c.rows(), c.cols());
  Var adjusted = margin == 0.0 ? cosines : ad::angular_margin(cosines, labels, margin);
  return ad::cross_entropy_from_logits(ad::scale(adjusted, scale), labels);
}

Var aam_softmax_loss(Var embeddings, std::span<const int> labels, Var class_weights, double scale,
                     double margin) {
  const Tensor& e = embeddings.value();
  const Tensor& w = class_weights.value();
  require(e.rank() == 2 && w.rank() == 2 && e.cols() == w.cols(),
          "aam_softmax_loss: embeddings N x d and class weights J x d required");
  check_labels(labels, e.rows(), w.rows());
  return aam_from_cosines(ad::cosine_sim(embeddings, class_weights), labels, scale, margin);
}

DiffluenceVars diffluence_kl(std::span<const Var> layers, double cap) {
  check_layers(layers);
  std::vector<Var> terms;
  terms.reserve(layers.size());
  const std::size_t T = layers[0].shape()[0] - 1;
  for (Var h : layers) {
    Var kl = ad::kl_div_logits(ad::slice_rows(h, 0, 1), ad::slice_rows(h, 1, T));
    terms.push_back(ad::mean(ad::clamp_max(kl, cap)));
  }
  return combine(std::move(terms));
}

DiffluenceVars diffluence_cosine(std::span<const Var> layers) {
  check_layers(layers);
  std::vector<Var> terms;
  terms.reserve(layers.size());
  const std::size_t T = layers[0].shape()[0] - 1;
  for (Var h : layers) {
    Var c = ad::cosine_sim(ad::slice_rows(h, 0, 1), ad::slice_rows(h, 1, T));
    Var one = h.graph->constant(Tensor::scalar(1.0));
    terms.push_back(ad::sub(one, ad::mean(c)));
  }
  return combine(std::move(terms));
}

DiffluenceVars diffluence(std::span<const Var> layers, const LossConfig& cfg) {
  switch (cfg.variant) {
    case DiffluenceVariant::kl: return diffluence_kl(layers, cfg.kl_cap);
    case DiffluenceVariant::cosine: return diffluence_cosine(layers);
    case DiffluenceVariant::none: break;
  }
  fail("diffluence: variant none has no diffluence term");
}

Var total_loss(Var classification, Var diffluence, const LossConfig& cfg) {
  if (cfg.variant == DiffluenceVariant::none || cfg.lambda == 0.0) return classification;
  return ad::sub(classification, ad::scale(diffluence, cfg.lambda));
}

// ---- value form ----

double aam_softmax_loss(const Tensor& embeddings, std::span<const int> labels,
                        const Tensor& class_weights, double scale, double margin) {
  require(embeddings.rank() == 2 && class_weights.rank() == 2 &&
              embeddings.cols() == class_weights.cols(),
          "aam_softmax_loss: embeddings N x d and class weights J x d required");
  const std::size_t n = embeddings.rows(), J = class_weights.rows(), d = embeddings.cols();
  check_labels(labels, n, J);
  auto norm = [d](std::span<const double> v) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += v[k] * v[k];
    return std::sqrt(s);
  };
  constexpr double lim = 1.0 - 1e-7;
  double total = 0.0;
  std::vector<double> logits(J);
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = embeddings.row(i);
    const double ne = norm(e);
    if (!(ne > 0.0)) fail_numeric("aam_softmax_loss: zero-norm embedding");
    for (std::size_t j = 0; j < J; ++j) {
      const auto w = class_weights.row(j);
      const double nw = norm(w);
      if (!(nw > 0.0)) fail_numeric("aam_softmax_loss: zero-norm class weight");
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += e[k] * w[k];
      double c = dot / (ne * nw);
      if (j == static_cast<std::size_t>(labels[i]) && margin != 0.0)
        c = std::cos(std::acos(std::clamp(c, -lim, lim)) + margin);
      logits[j] = scale * c;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double z : logits) s += std::exp(z - mx);
    total += mx + std::log(s) - logits[static_cast<std::size_t>(labels[i])];
  }
  return total / static_cast<double>(n);
}

std::vector<double> frame_distribution(std::span<const double> frame) {
  require(!frame.empty(), "frame_distribution: empty frame");
  double mx = frame[0];
  for (double v : frame) {
    if (!std::isfinite(v)) fail_numeric("frame_distribution: non-finite input");
    mx = std::max(mx, v);
  }
  std::vector<double> p(frame.size());
  double s = 0.0;
  for (std::size_t j = 0; j < frame.size(); ++j) s += (p[j] = std::exp(frame[j] - mx));
  for (double& v : p) v /= s;
  return p;
}

namespace {

// Log-domain KL between softmax(a) and softmax(b).
double kl_logits(std::span<const double> a, std::span<const double> b) {
  auto lse = [](std::span<const double> x) {
    const double mx = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (double v : x) s += std::exp(v - mx);
    return mx + std::log(s);
  };
  const double la = lse(a), lb = lse(b);
  double kl = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double lp = a[j] - la;
    kl += std::exp(lp) * (lp - (b[j] - lb));
  }
  return std::max(kl, 0.0);
}

template <class Term>
DiffluenceValue reduce(const model::HiddenStates& h, Term term) {
  h.validate();
  DiffluenceValue out;
  const std::size_t T = h.num_frames();
  for (const Tensor& layer : h.layers) {
    double s = 0.0;
    for (std::size_t i = 1; i <= T; ++i) s += term(layer.row(0), layer.row(i));
    out.per_layer.push_back(s / static_cast<double>(T));
  }
  double s = 0.0;
  for (double v : out.per_layer) s += v;
  out.value = s / static_cast<double>(out.per_layer.size());
  return out;
}

}  // namespace

DiffluenceValue diffluence_kl(const model::HiddenStates& h, double cap) {
  require(cap > 0.0, "diffluence_kl: cap must be > 0");
  return reduce(h, [cap](auto cls, auto frame) { return std::min(kl_logits(cls, frame), cap); });
}

DiffluenceValue diffluence_cosine(const model::HiddenStates& h) {
  return reduce(h, [](auto cls, auto frame) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < cls.size(); ++k) {
      dot += cls[k] * frame[k];
      na += cls[k] * cls[k];
      nb += frame[k] * frame[k];
    }
    if (!(na > 0.0) || !(nb > 0.0)) fail_numeric("diffluence_cosine: zero-norm frame vector");
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
  });
}

DiffluenceValue diffluence(const model::HiddenStates& h, const LossConfig& cfg) {
  switch (cfg.variant) {
    case DiffluenceVariant::kl: return diffluence_kl(h, cfg.kl_cap);
    case DiffluenceVariant::cosine: return diffluence_cosine(h);
    case DiffluenceVariant::none: break;
  }
  DiffluenceValue zero;
  zero.per_layer.assign(h.num_layers(), 0.0);
  return zero;
}

LossBreakdown total_loss(double classification, const DiffluenceValue& d, const LossConfig& cfg) {
  if (!std::isfinite(classification) || !std::isfinite(d.value))
    fail_numeric("total_loss: non-finite input");
  LossBreakdown b;
  b.classification = classification;
  b.diffluence = d.value;
  b.per_layer = d.per_layer;
  const double lambda = cfg.variant == DiffluenceVariant::none ? 0.0 : cfg.lambda;
  b.total = classification - lambda * d.value;
  return b;
}

}  // namespace dtsv::losses
