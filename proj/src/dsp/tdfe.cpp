// SPDX-License-Identifier: Apache-2.0
#include "dtsv/dsp/tdfe.hpp"

#include <cmath>
#include <numbers>

#include "dtsv/autodiff/ops.hpp"

namespace dtsv::dsp {

void TdfeParams::validate() const {
  require(conv_kernels.rank() == 2 && fc_weights.rank() == 2, "tdfe: weights must be matrices");
  require(fc_weights.cols() == conv_kernels.rows(),
          "tdfe: fc_weights has " + std::to_string(fc_weights.cols()) + " inputs but conv has " +
              std::to_string(conv_kernels.rows()) + " channels");
  require(hop > 0, "tdfe: hop must be positive");
  if (!conv_kernels.all_finite() || !fc_weights.all_finite()) fail_numeric("tdfe: non-finite weights");
}

ad::Var tdfe_apply(ad::Var signal, ad::Var conv_kernels, ad::Var fc_weights, std::size_t hop,
                   ad::Var* energies) {
  const ad::Var e = ad::square(ad::conv1d(signal, conv_kernels, hop));
  if (energies) *energies = e;
  return ad::log1p(ad::relu(ad::matmul(e, fc_weights, false, true)));
}

TdfeOutput tdfe_forward(const TdfeParams& p, const Waveform& w) {
  p.validate();
  w.validate();
  require(w.size() >= p.kernel_len(), "signal of " + std::to_string(w.size()) +
                                          " samples is shorter than the TDFE kernel (" +
                                          std::to_string(p.kernel_len()) + ")");
  ad::Graph g;
  const ad::Var x = g.constant(ad::Tensor({w.size()}, w.samples));
  ad::Var e;
  const ad::Var y =
      tdfe_apply(x, g.constant(p.conv_kernels), g.constant(p.fc_weights), p.hop, &e);
  return TdfeOutput{FeatureMap{y.value(), static_cast<double>(w.sample_rate) / p.hop}, e.value()};
}

TdfeParams tdfe_init_mel(const FbankConfig& cfg) {
  const ad::Tensor mel = mel_matrix(cfg);
  const std::size_t bins = cfg.n_bins(), k_len = cfg.frame_len;
  const std::vector<double> window = hamming_window(k_len);
  TdfeParams p{ad::Tensor({2 * bins, k_len}), ad::Tensor({cfg.n_mels, 2 * bins}), cfg.hop};
  std::vector<double> basis(k_len + 1);
  for (std::size_t k = 0; k < bins; ++k) {
    for (int part = 0; part < 2; ++part) {
      for (std::size_t n = 0; n < k_len; ++n) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(k * n % cfg.n_fft) /
                             static_cast<double>(cfg.n_fft);
        basis[n] = window[n] * (part == 0 ? std::cos(phase) : std::sin(phase));
      }
      basis[k_len] = 0.0;
      // sum_n b[n] (x[n] - c x[n-1]) = sum_n x[n] (b[n] - c b[n+1]) with y[0] = x[0].
      auto row = p.conv_kernels.row(2 * k + part);
      for (std::size_t n = 0; n < k_len; ++n) row[n] = basis[n] - cfg.preemph * basis[n + 1];
    }
  }
  for (std::size_t b = 0; b < cfg.n_mels; ++b) {
    for (std::size_t k = 0; k < bins; ++k) {
      p.fc_weights.at(b, 2 * k) = mel.at(b, k);
      p.fc_weights.at(b, 2 * k + 1) = mel.at(b, k);
    }
  }
  return p;
}

}  // namespace dtsv::dsp
