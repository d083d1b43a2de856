// SPDX-License-Identifier: Apache-2.0
#include "dtsv/model/encoder.hpp"

#include <cmath>
#include <functional>
#include <string>

#include "dtsv/autodiff/ops.hpp"
#include "dtsv/dsp/tdfe.hpp"
#include "dtsv/error.hpp"
#include "dtsv/rng.hpp"

namespace dtsv::model {

using ad::Parameter;
using ad::Tensor;
using ad::Var;

void ModelConfig::validate(bool allow_empty_stack) const {
  frontend.validate();
  require(allow_empty_stack || n_layers >= 1, "model: n_layers must be >= 1");
  require(model_dim >= 1, "model: model_dim must be >= 1");
  require(n_heads >= 1, "model: n_heads must be >= 1");
  require(model_dim % n_heads == 0,
          "model: model_dim (" + std::to_string(model_dim) + ") must be divisible by n_heads (" +
              std::to_string(n_heads) + ")");
  require(mlp_dim >= model_dim, "model: mlp_dim must be >= model_dim");
  require(n_classes >= 1, "model: n_classes must be >= 1");
}

void HiddenStates::validate() const {
  require(!layers.empty(), "hidden states: no layers");
  const std::size_t rows = layers[0].rows();
  const std::size_t cols = layers[0].cols();
  require(rows >= 2, "hidden states: need at least one frame besides CLS");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    require(layers[l].rank() == 2 && layers[l].rows() == rows && layers[l].cols() == cols,
            "hidden states: layer " + std::to_string(l) + " has shape " +
                ad::shape_str(layers[l].shape()));
    if (!layers[l].all_finite())
      fail_numeric("hidden states: layer " + std::to_string(l) + " is not finite");
  }
}

namespace {

template <class LayerT, class Fn>
void visit_layer(LayerT& L, Fn&& fn) {
  fn(L.norm1_gain);
  fn(L.norm1_bias);
  fn(L.q_weight);
  fn(L.q_bias);
  fn(L.k_weight);
  fn(L.v_weight);
  fn(L.v_bias);
  fn(L.out_weight);
  fn(L.out_bias);
  fn(L.rel_bias);
  fn(L.norm2_gain);
  fn(L.norm2_bias);
  fn(L.mlp_in_weight);
  fn(L.mlp_in_bias);
  fn(L.mlp_out_weight);
  fn(L.mlp_out_bias);
}

template <class ModelT, class Fn>
void visit(ModelT& m, Fn&& fn) {
  fn(m.tdfe_kernels);
  fn(m.tdfe_fc);
  fn(m.input_proj);
  fn(m.cls_embedding);
  for (auto& L : m.layers) visit_layer(L, fn);
  fn(m.classifier);
}

void xavier(Tensor& t, Rng& rng) {
  const double fan_out = static_cast<double>(t.rows());
  const double fan_in = static_cast<double>(t.cols());
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : t.values()) v = rng.uniform(-a, a);
}

}  // namespace

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  visit(*this, [&](Parameter& p) { out.push_back(&p); });
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  std::vector<const Parameter*> out;
  visit(*this, [&](const Parameter& p) { out.push_back(&p); });
  return out;
}

Parameter* Model::find(std::string_view name) {
  Parameter* hit = nullptr;
  visit(*this, [&](Parameter& p) {
    if (p.name == name) hit = &p;
  });
  return hit;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  visit(*this, [&](const Parameter& p) { n += p.value.size(); });
  return n;
}

bool Model::is_trainable(const Parameter& p) const {
  if (&p == &tdfe_kernels || &p == &tdfe_fc) return config.tdfe_trainable;
  return true;
}

void round_to_float(Tensor& t) {
  for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

Model build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t d = cfg.model_dim;
  const std::size_t mlp = cfg.mlp_dim;
  const std::size_t D = cfg.frontend.n_mels;
  const std::size_t O = cfg.tdfe_channels();
  const std::size_t K = cfg.frontend.frame_len;
  Rng rng(derive_seed(seed, 0x6d6f64656cULL));

  Model m;
  m.config = cfg;
  if (cfg.tdfe_init == TdfeInit::mel) {
    dsp::TdfeParams init = dsp::tdfe_init_mel(cfg.frontend);
    m.tdfe_kernels = Parameter("tdfe.conv_kernels", std::move(init.conv_kernels));
    m.tdfe_fc = Parameter("tdfe.fc_weights", std::move(init.fc_weights));
  } else {
    Tensor kern({O, K});
    xavier(kern, rng);
    // Non-negative FC weights keep the ReLU from discarding half the bands.
    Tensor fc({D, O});
    const double a = std::sqrt(6.0 / static_cast<double>(D + O));
    for (double& v : fc.values()) v = rng.uniform(0.0, a);
    m.tdfe_kernels = Parameter("tdfe.conv_kernels", std::move(kern));
    m.tdfe_fc = Parameter("tdfe.fc_weights", std::move(fc));
  }

  Tensor proj({d, D});
  xavier(proj, rng);
  m.input_proj = Parameter("input_proj.weight", std::move(proj));

  Tensor cls({1, d});
  const double ca = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : cls.values()) v = rng.uniform(-ca, ca);
  m.cls_embedding = Parameter("cls_embedding", std::move(cls));

  m.layers.resize(cfg.n_layers);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    EncoderLayer& L = m.layers[l];
    auto weight = [&](const std::string& name, std::size_t rows, std::size_t cols) {
      Tensor t({rows, cols});
      xavier(t, rng);
      return Parameter(p + name, std::move(t));
    };
    auto bias = [&](const std::string& name, std::size_t n, double fill) {
      return Parameter(p + name, Tensor({n}, fill));
    };
    L.norm1_gain = bias("norm1.gain", d, 1.0);
    L.norm1_bias = bias("norm1.bias", d, 0.0);
    L.q_weight = weight("attn.q_weight", d, d);
    L.q_bias = bias("attn.q_bias", d, 0.0);
    L.k_weight = weight("attn.k_weight", d, d);
    L.v_weight = weight("attn.v_weight", d, d);
    L.v_bias = bias("attn.v_bias", d, 0.0);
    L.out_weight = weight("attn.out_weight", d, d);
    L.out_bias = bias("attn.out_bias", d, 0.0);
    L.rel_bias = Parameter(p + "attn.rel_bias", Tensor({2 * cfg.max_rel_dist + 1, cfg.n_heads}));
    L.norm2_gain = bias("norm2.gain", d, 1.0);
    L.norm2_bias = bias("norm2.bias", d, 0.0);
    L.mlp_in_weight = weight("mlp.in_weight", mlp, d);
    L.mlp_in_bias = bias("mlp.in_bias", mlp, 0.0);
    L.mlp_out_weight = weight("mlp.out_weight", d, mlp);
    L.mlp_out_bias = bias("mlp.out_bias", d, 0.0);
  }

  Tensor cw({cfg.n_classes, d});
  for (std::size_t j = 0; j < cfg.n_classes; ++j) {
    double norm = 0.0;
    for (double& v : cw.row(j)) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : cw.row(j)) v /= norm;
  }
  m.classifier = Parameter("classifier.weight", std::move(cw));

  for (Parameter* p : m.parameters()) {
    round_to_float(p->value);
    p->zero_grad();
  }
  return m;
}

ParamCount count_params(const ModelConfig& cfg) {
  cfg.validate(true);
  const std::size_t d = cfg.model_dim;
  const std::size_t O = cfg.tdfe_channels();
  const std::size_t K = cfg.frontend.frame_len;
  const std::size_t D = cfg.frontend.n_mels;
  const std::size_t per_layer = 4 * d                        // two norms
                                + 4 * d * d + 3 * d          // q, k, v, out (keys unbiased)
                                + (2 * cfg.max_rel_dist + 1) * cfg.n_heads
                                + cfg.mlp_dim * d + cfg.mlp_dim  // mlp in
                                + d * cfg.mlp_dim + d;           // mlp out
  ParamCount c;
  c.by_submodule["tdfe"] = O * K + D * O;
  c.by_submodule["input_proj"] = d * D;
  c.by_submodule["cls"] = d;
  c.by_submodule["layers"] = cfg.n_layers * per_layer;
  c.by_submodule["classifier"] = cfg.n_classes * d;
  for (const auto& [name, n] : c.by_submodule) c.total += n;
  return c;
}

Tensor rel_pos_bias(std::size_t frames, const Tensor& table, std::size_t max_rel_dist) {
  require(table.rank() == 2 && table.rows() == 2 * max_rel_dist + 1,
          "rel_pos_bias: table must be (2R+1) x heads");
  const std::size_t n = frames + 1;
  const std::size_t heads = table.cols();
  Tensor out({heads, n, n});
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        out[(h * n + i) * n + j] = table.at(ad::rel_pos_index(i, j, max_rel_dist), h);
  return out;
}

namespace {

Var encoder_block(ad::Graph& g, const ModelConfig& cfg, const EncoderLayer& L, Var x,
                  const std::function<Var(const Parameter&)>& bind) {
  const std::size_t n = x.value().rows();
  const std::size_t dh = cfg.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Var a = ad::add(ad::mul(ad::layer_norm(x, 1), bind(L.norm1_gain)), bind(L.norm1_bias));
  Var q = ad::add(ad::matmul(a, bind(L.q_weight), false, true), bind(L.q_bias));
  // No key bias: it shifts every score of a query equally, so softmax ignores it.
  Var k = ad::matmul(a, bind(L.k_weight), false, true);
  Var v = ad::add(ad::matmul(a, bind(L.v_weight), false, true), bind(L.v_bias));
  Var table = bind(L.rel_bias);
  std::vector<Var> heads;
  heads.reserve(cfg.n_heads);
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    Var qh = ad::slice_cols(q, h * dh, dh);
    Var kh = ad::slice_cols(k, h * dh, dh);
    Var vh = ad::slice_cols(v, h * dh, dh);
    Var s = ad::scale(ad::matmul(qh, kh, false, true), inv_sqrt);
    s = ad::add(s, ad::rel_pos_bias(table, n, cfg.max_rel_dist, h));
    heads.push_back(ad::matmul(ad::softmax(s, 1), vh));
  }
  Var ctx = cfg.n_heads == 1 ? heads[0] : ad::concat_cols(heads);
  Var o = ad::add(ad::matmul(ctx, bind(L.out_weight), false, true), bind(L.out_bias));
  x = ad::add(x, o);

  Var b = ad::add(ad::mul(ad::layer_norm(x, 1), bind(L.norm2_gain)), bind(L.norm2_bias));
  Var h1 = ad::relu(ad::add(ad::matmul(b, bind(L.mlp_in_weight), false, true), bind(L.mlp_in_bias)));
  Var h2 = ad::add(ad::matmul(h1, bind(L.mlp_out_weight), false, true), bind(L.mlp_out_bias));
  (void)g;
  return ad::add(x, h2);
}

}  // namespace

ForwardVars forward_graph(ad::Graph& g, const Model& m, const dsp::Waveform& w,
                          const ForwardOptions& opts) {
  const ModelConfig& cfg = m.config;
  require(w.sample_rate == cfg.frontend.sample_rate,
          "forward: waveform sample rate " + std::to_string(w.sample_rate) +
              " does not match model rate " + std::to_string(cfg.frontend.sample_rate));
  require(w.size() >= cfg.frontend.frame_len,
          "forward: waveform shorter than one frame (" + std::to_string(w.size()) + " samples)");

  auto bind = [&](const Parameter& p) -> Var {
    if (opts.track_grads && m.is_trainable(p)) return g.param(p);
    return g.constant(p.value);
  };

  ForwardVars out;
  Var signal = g.constant(Tensor({w.size()}, w.samples));
  try {
    out.features = dsp::tdfe_apply(signal, bind(m.tdfe_kernels), bind(m.tdfe_fc), cfg.frontend.hop);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::numeric) throw;
    fail_numeric(std::string("frontend: ") + e.what());
  }
  Var feats = out.features;
  if (opts.feature_mask != nullptr) {
    require(opts.feature_mask->shape() == feats.shape(),
            "forward: feature mask shape " + ad::shape_str(opts.feature_mask->shape()) +
                " != features " + ad::shape_str(feats.shape()));
    feats = ad::mul(feats, g.constant(*opts.feature_mask));
  }
  Var proj = ad::matmul(feats, bind(m.input_proj), false, true);
  const Var seq_parts[] = {bind(m.cls_embedding), proj};
  Var x = ad::concat_rows(seq_parts);

  out.hidden.reserve(m.layers.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    try {
      x = encoder_block(g, cfg, m.layers[l], x, bind);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::numeric) throw;
      fail_numeric("layer " + std::to_string(l) + ": " + e.what());
    }
    out.hidden.push_back(x);
  }
  out.embedding = ad::slice_rows(x, 0, 1);
  out.cosines = ad::cosine_sim(out.embedding, bind(m.classifier));
  return out;
}

ForwardResult forward(const Model& m, const dsp::Waveform& w) {
  ad::Graph g;
  ForwardVars v = forward_graph(g, m, w);
  ForwardResult r;
  r.hidden.layers.reserve(v.hidden.size());
  for (Var h : v.hidden) r.hidden.layers.push_back(h.value());
  const auto e = v.embedding.value().values();
  r.embedding.assign(e.begin(), e.end());
  const auto c = v.cosines.value().values();
  r.logits.assign(c.begin(), c.end());
  return r;
}

std::vector<double> extract_embedding(const Model& m, const dsp::Waveform& w) {
  std::vector<double> e = forward(m, w).embedding;
  double norm = 0.0;
  for (double v : e) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 0.0) || !std::isfinite(norm)) fail_numeric("extract_embedding: embedding norm is zero");
  for (double& v : e) v /= norm;
  return e;
}

}  // namespace dtsv::model
