// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "dtsv/autodiff/tensor.hpp"

namespace dtsv::model {

// Per-layer encoder outputs. layers[l] is (T + 1) x d; row 0 is the CLS frame.
struct HiddenStates {
  std::vector<ad::Tensor> layers;

  std::size_t num_layers() const noexcept { return layers.size(); }
  std::size_t num_frames() const noexcept { return layers.empty() ? 0 : layers[0].rows() - 1; }
  std::size_t dim() const noexcept { return layers.empty() ? 0 : layers[0].cols(); }

  // Throws unless every layer is (T+1) x d with T >= 1 and finite.
  void validate() const;
};

}  // namespace dtsv::model
