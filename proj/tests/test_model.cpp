// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "dtsv/autodiff/ops.hpp"
#include "dtsv/config/run_config.hpp"
#include "dtsv/error.hpp"
#include "dtsv/losses/losses.hpp"
#include "dtsv/model/encoder.hpp"
#include "grad_suite.hpp"
#include "support.hpp"

using namespace dtsv;
using model::ModelConfig;

namespace {

ModelConfig toy_config() {
  ModelConfig c;
  c.n_layers = 2;
  c.model_dim = 64;
  c.n_heads = 4;
  c.mlp_dim = 256;
  c.n_classes = 20;
  return c;
}

std::size_t allocated(const model::Model& m) {
  std::size_t n = 0;
  for (const ad::Parameter* p : m.parameters()) n += p->value.size();
  return n;
}

}  // namespace

TEST_CASE("build_model is deterministic in (config, seed)") {
  const ModelConfig c = testing::tiny_model_config();
  const model::Model a = model::build_model(c, 3);
  const model::Model b = model::build_model(c, 3);
  const model::Model other = model::build_model(c, 4);
  const auto pa = a.parameters(), pb = b.parameters(), po = other.parameters();
  REQUIRE(pa.size() == pb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK(pa[i]->value == pb[i]->value);
    any_diff = any_diff || !(pa[i]->value == po[i]->value);
  }
  CHECK(any_diff);
}

TEST_CASE("parameter names are unique and gradients start at zero") {
  const model::Model m = model::build_model(toy_config(), 1);
  std::vector<std::string> names;
  for (const ad::Parameter* p : m.parameters()) {
    names.push_back(p->name);
    CHECK(p->grad.shape() == p->value.shape());
    CHECK(std::all_of(p->grad.values().begin(), p->grad.values().end(), [](double v) { return v == 0.0; }));
  }
  std::sort(names.begin(), names.end());
  CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
  CHECK(names.size() == 5 + 16 * 2);
}

TEST_CASE("classifier rows are unit norm and values are float32-representable") {
  const model::Model m = model::build_model(toy_config(), 2);
  for (std::size_t j = 0; j < m.classifier.value.rows(); ++j) {
    double n = 0.0;
    for (double v : m.classifier.value.row(j)) n += v * v;
    CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-6));
  }
  for (const ad::Parameter* p : m.parameters()) {
    for (double v : p->value.values()) CHECK(static_cast<double>(static_cast<float>(v)) == v);
  }
}

TEST_CASE("toy parameter count equals the hand-summed total") {
  // Frontend 16 kHz, frame 400, n_fft 512 (257 bins -> 514 channels), 80 mels.
  const std::size_t tdfe = 514 * 400 + 80 * 514;
  const std::size_t proj = 64 * 80;
  const std::size_t cls = 64;
  const std::size_t per_layer = 2 * 2 * 64             // two layer norms
                                + 4 * 64 * 64 + 3 * 64 // q, k, v, out; keys carry no bias
                                + (2 * 64 + 1) * 4     // relative bias table
                                + 256 * 64 + 256       // mlp in
                                + 64 * 256 + 64;       // mlp out
  const std::size_t classifier = 20 * 64;
  const std::size_t total = tdfe + proj + cls + 2 * per_layer + classifier;
  CHECK(total == 354056);
  const model::ParamCount pc = model::count_params(toy_config());
  CHECK(pc.total == total);
  CHECK(pc.by_submodule.at("layers") == 2 * per_layer);
  CHECK(pc.without_classifier() == total - classifier);
  CHECK(allocated(model::build_model(toy_config(), 0)) == total);
}

TEST_CASE("count_params matches allocation on random configs") {
  Rng rng(31);
  for (int i = 0; i < 20; ++i) {
    ModelConfig c = testing::tiny_model_config();
    c.n_heads = 1 + rng.uniform_int(4);
    c.model_dim = c.n_heads * (1 + rng.uniform_int(12));
    c.n_layers = 1 + rng.uniform_int(4);
    c.mlp_dim = c.model_dim * (1 + rng.uniform_int(4));
    c.max_rel_dist = rng.uniform_int(10);
    c.n_classes = 1 + rng.uniform_int(30);
    c.frontend.n_mels = 1 + rng.uniform_int(10);
    c.frontend.fmin = 100.0;
    CAPTURE(i);
    CHECK(model::count_params(c).total == allocated(model::build_model(c, i)));
  }
}

TEST_CASE("empty stack leaves frontend, projection, CLS and classifier") {
  ModelConfig c = toy_config();
  c.n_layers = 0;
  const model::ParamCount pc = model::count_params(c);
  CHECK(pc.by_submodule.at("layers") == 0);
  CHECK(pc.total == 246720 + 5120 + 64 + 1280);
  CHECK_THROWS_AS(model::build_model(c, 0), Error);
}

TEST_CASE("light preset has about one million non-classifier parameters") {
  const auto cfg = config::load_run_config(std::string(DTSV_SOURCE_DIR) + "/configs/dtsv-light.cfg");
  CHECK(cfg.model.n_layers == 4);
  CHECK(cfg.model.model_dim == 128);
  CHECK(cfg.model.n_heads == 4);
  CHECK(cfg.model.mlp_dim == 512);
  const double n = static_cast<double>(model::count_params(cfg.model).without_classifier());
  CHECK(n >= 0.8e6);
  CHECK(n <= 1.2e6);
}

TEST_CASE("config validation") {
  ModelConfig c = toy_config();
  c.n_heads = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  c = toy_config();
  c.mlp_dim = 32;
  CHECK_THROWS_AS(c.validate(), Error);
  c = toy_config();
  c.n_layers = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_NOTHROW(c.validate(true));
}

TEST_CASE("relative position bias") {
  Rng rng(41);
  SUBCASE("zero table gives zero bias") {
    const ad::Tensor b = model::rel_pos_bias(9, ad::Tensor({7, 2}), 3);
    CHECK(b.shape() == ad::Shape{2, 10, 10});
    for (double v : b.values()) CHECK(v == 0.0);
  }
  SUBCASE("index formula with clipping") {
    const std::size_t r = 2, heads = 3, frames = 8, n = frames + 1;
    const ad::Tensor table = testing::random_tensor({2 * r + 1, heads}, rng);
    const ad::Tensor b = model::rel_pos_bias(frames, table, r);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const long off = static_cast<long>(j) - static_cast<long>(i);
          const long clipped = std::clamp(off, -static_cast<long>(r), static_cast<long>(r));
          CHECK(b[(h * n + i) * n + j] == table.at(static_cast<std::size_t>(clipped + static_cast<long>(r)), h));
          if (i + 1 < n && j + 1 < n) CHECK(b[(h * n + i) * n + j] == b[(h * n + i + 1) * n + j + 1]);
        }
      }
      // Offsets beyond the radius all read the extreme rows.
      CHECK(b[(h * n + 0) * n + 8] == table.at(2 * r, h));
      CHECK(b[(h * n + 8) * n + 0] == table.at(0, h));
    }
  }
  SUBCASE("graph op matches the value builder") {
    const ad::Tensor table = testing::random_tensor({7, 2}, rng);
    const ad::Tensor full = model::rel_pos_bias(5, table, 3);
    ad::Graph g;
    const ad::Var t = g.constant(table);
    for (std::size_t h = 0; h < 2; ++h) {
      const ad::Tensor one = ad::rel_pos_bias(t, 6, 3, h).value();
      for (std::size_t k = 0; k < 36; ++k) CHECK(one[k] == full[h * 36 + k]);
    }
  }
}

TEST_CASE("forward shapes and embedding") {
  const ModelConfig c = testing::tiny_model_config();
  const model::Model m = model::build_model(c, 5);
  Rng rng(51);
  const dsp::Waveform w = testing::random_waveform(rng, 800, 8000);
  const model::ForwardResult r = model::forward(m, w);
  const std::size_t frames = 1 + (800 - 64) / 32;
  REQUIRE(r.hidden.num_layers() == 2);
  for (const ad::Tensor& h : r.hidden.layers) CHECK(h.shape() == ad::Shape{frames + 1, 32});
  CHECK(r.embedding.size() == 32);
  CHECK(r.logits.size() == 5);
  for (std::size_t k = 0; k < 32; ++k) CHECK(r.embedding[k] == r.hidden.layers[1].at(0, k));
  for (double v : r.logits) CHECK(std::abs(v) <= 1.0 + 1e-12);

  const auto e = model::extract_embedding(m, w);
  double norm = 0.0, ref = 0.0;
  for (double v : e) norm += v * v;
  for (double v : r.embedding) ref += v * v;
  CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));
  for (std::size_t k = 0; k < 32; ++k) CHECK(e[k] == doctest::Approx(r.embedding[k] / std::sqrt(ref)).epsilon(1e-12));
  CHECK(model::extract_embedding(m, w) == e);
}

TEST_CASE("zeroed attention and MLP leave the CLS embedding on the residual path") {
  model::Model m = model::build_model(testing::tiny_model_config(), 6);
  for (model::EncoderLayer& L : m.layers) {
    for (ad::Parameter* p : {&L.q_weight, &L.k_weight, &L.v_weight, &L.out_weight, &L.out_bias, &L.mlp_in_weight,
                             &L.mlp_in_bias, &L.mlp_out_weight, &L.mlp_out_bias}) {
      p->value.fill(0.0);
    }
  }
  Rng rng(61);
  const model::ForwardResult r = model::forward(m, testing::random_waveform(rng, 500, 8000));
  for (std::size_t k = 0; k < 32; ++k) CHECK(r.embedding[k] == m.cls_embedding.value[k]);
}

TEST_CASE("position-blind layer is permutation equivariant over frames") {
  ModelConfig c = testing::tiny_model_config();
  c.n_layers = 1;
  c.max_rel_dist = 0;
  c.frontend.hop = c.frontend.frame_len;  // disjoint frames
  const model::Model m = model::build_model(c, 7);
  Rng rng(71);
  const std::size_t frames = 9, k = c.frontend.frame_len;
  const dsp::Waveform w = testing::random_waveform(rng, frames * k, 8000);
  std::vector<std::size_t> perm(frames);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = frames - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
  dsp::Waveform p = w;
  for (std::size_t t = 0; t < frames; ++t) {
    std::copy_n(w.samples.begin() + perm[t] * k, k, p.samples.begin() + t * k);
  }
  const ad::Tensor a = model::forward(m, w).hidden.layers[0];
  const ad::Tensor b = model::forward(m, p).hidden.layers[0];
  for (std::size_t d = 0; d < 32; ++d) CHECK(b.at(0, d) == doctest::Approx(a.at(0, d)).epsilon(1e-12));
  double err = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t d = 0; d < 32; ++d) err = std::max(err, std::abs(b.at(t + 1, d) - a.at(perm[t] + 1, d)));
  }
  CHECK(err <= 1e-12);
}

TEST_CASE("every parameter receives a gradient") {
  model::Model m = model::build_model(testing::tiny_model_config(), 8);
  Rng rng(81);
  const auto params = m.parameters();
  std::vector<bool> reached(params.size(), false);
  for (int trial = 0; trial < 3; ++trial) {
    ad::Graph g;
    model::ForwardOptions o;
    o.track_grads = true;
    const auto v = model::forward_graph(g, m, testing::random_waveform(rng, 600, 8000), o);
    const int label[1] = {static_cast<int>(rng.uniform_int(5))};
    losses::LossConfig lc;
    const ad::Var loss = losses::total_loss(losses::aam_from_cosines(v.cosines, label, lc.scale, lc.margin),
                                            losses::diffluence(v.hidden, lc).value, lc);
    g.backward(loss);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const ad::Tensor* gr = g.param_grad(*params[i]);
      if (gr && std::any_of(gr->values().begin(), gr->values().end(), [](double x) { return x != 0.0; })) {
        reached[i] = true;
      }
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    CAPTURE(params[i]->name);
    CHECK(reached[i]);
  }
}

TEST_CASE("full loss passes the finite-difference check") {
  for (auto variant : {losses::DiffluenceVariant::kl, losses::DiffluenceVariant::cosine}) {
    const auto r = testing::full_loss_grad_check(9, variant);
    CAPTURE(r.worst_input);
    CAPTURE(r.analytic);
    CAPTURE(r.numeric);
    CHECK(r.max_rel_error < 1e-4);
    CHECK(r.probes > 10000);
  }
}

TEST_CASE("frozen frontend is bound as a constant") {
  ModelConfig c = testing::tiny_model_config();
  c.tdfe_trainable = false;
  const model::Model m = model::build_model(c, 10);
  CHECK_FALSE(m.is_trainable(m.tdfe_kernels));
  CHECK_FALSE(m.is_trainable(m.tdfe_fc));
  CHECK(m.is_trainable(m.input_proj));
  ad::Graph g;
  model::ForwardOptions o;
  o.track_grads = true;
  Rng rng(101);
  const auto v = model::forward_graph(g, m, testing::random_waveform(rng, 400, 8000), o);
  g.backward(ad::sum(v.cosines));
  CHECK(g.param_grad(m.tdfe_kernels) == nullptr);
  CHECK(g.param_grad(m.input_proj) != nullptr);
}

TEST_CASE("forward errors") {
  model::Model m = model::build_model(testing::tiny_model_config(), 11);
  Rng rng(111);
  CHECK_THROWS_AS(model::forward(m, testing::random_waveform(rng, 63, 8000)), Error);
  CHECK_THROWS_AS(model::forward(m, testing::random_waveform(rng, 800, 16000)), Error);
  m.layers[1].mlp_out_weight.value.fill(1e308);
  try {
    model::forward(m, testing::random_waveform(rng, 800, 8000));
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
}
