// SPDX-License-Identifier: Apache-2.0
//
// Training objective: additive angular margin softmax on the CLS
// embedding, minus lambda times the diffluence term that rewards
// dissimilarity between the CLS frame and the other frames of each layer.
// Every loss has a graph form (for training) and a plain-value form.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dtsv/autodiff/graph.hpp"
#include "dtsv/autodiff/tensor.hpp"
#include "dtsv/model/hidden_states.hpp"

namespace dtsv::losses {

enum class DiffluenceVariant { kl, cosine, none };

struct LossConfig {
  double scale = 30.0;   // tau
  double margin = 0.2;   // radians
  double lambda = 1.0;
  DiffluenceVariant variant = DiffluenceVariant::kl;
  double kl_cap = 10.0;  // per-frame KL clip, nats

  void validate() const;
  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

struct LossBreakdown {
  double total = 0.0;
  double classification = 0.0;
  double diffluence = 0.0;
  std::vector<double> per_layer;  // diffluence term of each layer
};

// ---- graph form ----

// Cosines (N x J, already cos(theta)) -> mean AAM cross-entropy.
ad::Var aam_from_cosines(ad::Var cosines, std::span<const int> labels, double scale, double margin);

// Embeddings (N x d) against class weights (J x d).
ad::Var aam_softmax_loss(ad::Var embeddings, std::span<const int> labels, ad::Var class_weights,
                         double scale, double margin);

struct DiffluenceVars {
  ad::Var value;
  std::vector<ad::Var> per_layer;
};

// Each layer is (T+1) x d with the CLS frame in row 0.
DiffluenceVars diffluence_kl(std::span<const ad::Var> layers, double cap);
DiffluenceVars diffluence_cosine(std::span<const ad::Var> layers);
DiffluenceVars diffluence(std::span<const ad::Var> layers, const LossConfig& cfg);

// L = L_C - lambda * L_D (L = L_C when the variant is none).
ad::Var total_loss(ad::Var classification, ad::Var diffluence, const LossConfig& cfg);

// ---- value form ----

double aam_softmax_loss(const ad::Tensor& embeddings, std::span<const int> labels,
                        const ad::Tensor& class_weights, double scale, double margin);

// softmax over the feature dimension of one frame.
std::vector<double> frame_distribution(std::span<const double> frame);

struct DiffluenceValue {
  double value = 0.0;
  std::vector<double> per_layer;
};

DiffluenceValue diffluence_kl(const model::HiddenStates& h, double cap);
DiffluenceValue diffluence_cosine(const model::HiddenStates& h);
DiffluenceValue diffluence(const model::HiddenStates& h, const LossConfig& cfg);

LossBreakdown total_loss(double classification, const DiffluenceValue& d, const LossConfig& cfg);

}  // namespace dtsv::losses
