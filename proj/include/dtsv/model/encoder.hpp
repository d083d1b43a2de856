// SPDX-License-Identifier: Apache-2.0
//
// Speaker encoder: TDFE frontend -> linear projection -> [CLS; frames] ->
// pre-norm Transformer blocks with a learned relative-position logit bias.
// The final CLS state is the utterance embedding; logits are its cosines
// to the class-weight rows (margin and scale live in the loss).
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtsv/autodiff/graph.hpp"
#include "dtsv/autodiff/tensor.hpp"
#include "dtsv/dsp/waveform.hpp"
#include "dtsv/model/config.hpp"
#include "dtsv/model/hidden_states.hpp"

namespace dtsv::model {

struct EncoderLayer {
  ad::Parameter norm1_gain, norm1_bias;
  ad::Parameter q_weight, q_bias, k_weight, v_weight, v_bias, out_weight, out_bias;
  ad::Parameter rel_bias;  // (2 * max_rel_dist + 1) x heads
  ad::Parameter norm2_gain, norm2_bias;
  ad::Parameter mlp_in_weight, mlp_in_bias, mlp_out_weight, mlp_out_bias;
};

struct Model {
  ModelConfig config;
  ad::Parameter tdfe_kernels;   // O x K
  ad::Parameter tdfe_fc;        // D x O
  ad::Parameter input_proj;     // d x D
  ad::Parameter cls_embedding;  // 1 x d
  std::vector<EncoderLayer> layers;
  ad::Parameter classifier;     // J x d, rows unit-norm at init

  // Canonical order: frontend, projection, CLS, layers, classifier.
  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
  ad::Parameter* find(std::string_view name);
  std::size_t parameter_count() const;
  bool is_trainable(const ad::Parameter& p) const;
};

// Deterministic in (cfg, seed). Weights are Xavier-uniform, biases zero,
// norms unit gain, relative-position table zero, TDFE mel-initialized
// when configured. Values are stored at float32 precision.
Model build_model(const ModelConfig& cfg, std::uint64_t seed);

struct ParamCount {
  std::size_t total = 0;
  std::map<std::string, std::size_t> by_submodule;  // tdfe, input_proj, cls, layers, classifier

  std::size_t without_classifier() const { return total - by_submodule.at("classifier"); }
};

ParamCount count_params(const ModelConfig& cfg);

// h x (T+1) x (T+1): bias[h][i][j] = table[clip(j - i) + R][h].
ad::Tensor rel_pos_bias(std::size_t frames, const ad::Tensor& table, std::size_t max_rel_dist);

struct ForwardOptions {
  // Bind parameters as graph params (gradients tracked) instead of constants.
  bool track_grads = false;
  // Optional T x D multiplicative mask applied to frontend features.
  const ad::Tensor* feature_mask = nullptr;
};

struct ForwardVars {
  ad::Var features;             // T x D
  std::vector<ad::Var> hidden;  // per layer, (T+1) x d
  ad::Var embedding;            // 1 x d
  ad::Var cosines;              // 1 x J
};

ForwardVars forward_graph(ad::Graph& g, const Model& m, const dsp::Waveform& w,
                          const ForwardOptions& opts = {});

struct ForwardResult {
  HiddenStates hidden;
  std::vector<double> embedding;
  std::vector<double> logits;
};

ForwardResult forward(const Model& m, const dsp::Waveform& w);

// v[L][0] / ||v[L][0]||.
std::vector<double> extract_embedding(const Model& m, const dsp::Waveform& w);

// Rounds every value to the nearest float32.
void round_to_float(ad::Tensor& t);

}  // namespace dtsv::model
