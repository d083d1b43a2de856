// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "dtsv/dsp/fbank.hpp"

namespace dtsv::model {

enum class TdfeInit { mel, random };

struct ModelConfig {
  std::size_t n_layers = 4;
  std::size_t model_dim = 128;
  std::size_t n_heads = 4;
  std::size_t mlp_dim = 512;
  // Clip radius of the relative-position table; 0 makes attention position-blind.
  std::size_t max_rel_dist = 64;
  std::size_t n_classes = 2;
  dsp::FbankConfig frontend;
  TdfeInit tdfe_init = TdfeInit::mel;
  bool tdfe_trainable = true;

  std::size_t head_dim() const noexcept { return model_dim / n_heads; }
  std::size_t tdfe_channels() const noexcept { return 2 * frontend.n_bins(); }

  // allow_empty_stack admits n_layers == 0 (parameter accounting only).
  void validate(bool allow_empty_stack = false) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace dtsv::model
