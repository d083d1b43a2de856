// SPDX-License-Identifier: Apache-2.0
//
// Closed-form compute count of one forward pass: 2 FLOPs per
// multiply-accumulate over the matrix products. Elementwise work
// (activations, norms, softmax) is not counted.
#pragma once

#include <cstddef>

#include "dtsv/model/config.hpp"

namespace dtsv::eval {

struct FlopsBreakdown {
  std::size_t frames = 0;  // T; the encoder sequence is T + 1
  double tdfe_conv = 0;
  double tdfe_fc = 0;
  double input_proj = 0;
  double qkvo = 0;         // all layers
  double attention = 0;    // scores and context, all layers
  double mlp = 0;          // all layers
  double classifier = 0;

  double total() const {
    return tdfe_conv + tdfe_fc + input_proj + qkvo + attention + mlp + classifier;
  }
  double gflops() const { return total() * 1e-9; }
};

FlopsBreakdown flops_estimate(const model::ModelConfig& cfg, double input_seconds);

}  // namespace dtsv::eval
