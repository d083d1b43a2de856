// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dtsv/autodiff/tensor.hpp"

namespace dtsv::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moments, one tensor per parameter in parameter order.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<ad::Tensor> m;
  std::vector<ad::Tensor> v;

  // Zero moments shaped like params; no-op when already initialized.
  void init(std::span<const ad::Parameter* const> params);
  void init(std::span<ad::Parameter* const> params);
};

// One Adam update from each parameter's grad. Decoupled weight decay,
// p <- p * (1 - lr * wd), is applied before the bias-corrected step.
// Parameters and moments are kept at float32 precision. When `active` is
// non-empty, parameters whose flag is 0 are left untouched (frozen).
void adam_step(std::span<ad::Parameter* const> params, AdamState& state, double lr,
               double weight_decay, const AdamConfig& cfg = {},
               std::span<const std::uint8_t> active = {});

}  // namespace dtsv::train
