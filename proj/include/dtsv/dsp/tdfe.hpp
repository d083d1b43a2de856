// SPDX-License-Identifier: Apache-2.0
//
// Time-domain feature extractor: a strided convolution over the raw
// waveform followed by a fully connected layer,
//   E = square(x * W_c)          (T x O)
//   Y = log(1 + relu(E W^T))     (T x D)
// With mel initialization the conv kernels hold windowed cos/sin DFT
// basis pairs (pre-emphasis folded in) and W holds the mel filters, so Y
// reproduces melfbank_features.
#pragma once

#include <cstddef>

#include "dtsv/autodiff/graph.hpp"
#include "dtsv/autodiff/tensor.hpp"
#include "dtsv/dsp/fbank.hpp"
#include "dtsv/dsp/waveform.hpp"

namespace dtsv::dsp {

struct TdfeParams {
  ad::Tensor conv_kernels;  // O x K, applied with stride hop
  ad::Tensor fc_weights;    // D x O, shared across frames
  std::size_t hop = 160;

  std::size_t channels() const noexcept { return conv_kernels.rows(); }
  std::size_t kernel_len() const noexcept { return conv_kernels.cols(); }
  std::size_t out_dims() const noexcept { return fc_weights.rows(); }
  void validate() const;
};

struct TdfeOutput {
  FeatureMap features;
  ad::Tensor energies;  // E, T x O
};

TdfeOutput tdfe_forward(const TdfeParams& p, const Waveform& w);

// Graph form used by the encoder; returns Y and optionally exposes E.
ad::Var tdfe_apply(ad::Var signal, ad::Var conv_kernels, ad::Var fc_weights, std::size_t hop,
                   ad::Var* energies = nullptr);

// O = 2 * (n_fft/2 + 1) channels: rows 2k and 2k+1 are the windowed
// cosine and sine at DFT bin k with per-frame pre-emphasis folded in.
TdfeParams tdfe_init_mel(const FbankConfig& cfg);

}  // namespace dtsv::dsp
