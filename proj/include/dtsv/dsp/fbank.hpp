// SPDX-License-Identifier: Apache-2.0
//
// Classical log mel-filterbank extraction: framing, per-frame
// pre-emphasis, Hamming window, energy spectrum, triangular mel filters,
// log(1 + x) compression.
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "dtsv/autodiff/tensor.hpp"
#include "dtsv/dsp/waveform.hpp"

namespace dtsv::dsp {

enum class WindowKind { hamming };

struct FbankConfig {
  int sample_rate = 16000;
  std::size_t frame_len = 400;  // 25 ms
  std::size_t hop = 160;        // 10 ms
  std::size_t n_fft = 512;
  std::size_t n_mels = 80;
  double fmin = 20.0;
  double fmax = 8000.0;
  double preemph = 0.97;
  WindowKind window = WindowKind::hamming;

  std::size_t n_bins() const noexcept { return n_fft / 2 + 1; }
  void validate() const;

  friend bool operator==(const FbankConfig&, const FbankConfig&) = default;
};

// T x D feature matrix.
struct FeatureMap {
  ad::Tensor values;
  double frame_rate = 0.0;

  std::size_t frames() const noexcept { return values.rows(); }
  std::size_t dims() const noexcept { return values.cols(); }
};

// 1 + floor((len - frame_len) / hop); zero when the signal is too short.
std::size_t num_frames(std::size_t len, std::size_t frame_len, std::size_t hop);

// y[0] = x[0], y[t] = x[t] - coeff * x[t-1].
Waveform preemphasis(const Waveform& w, double coeff);
void preemphasis_inplace(std::span<double> x, double coeff);

std::vector<double> hamming_window(std::size_t n);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// n_mels x (n_fft/2 + 1) triangular filters, equally spaced on the mel
// scale between fmin and fmax. A filter covering no FFT bin is an error.
ad::Tensor mel_matrix(const FbankConfig& cfg);

// Pre-emphasis is applied per frame (y[0] = x[0] within each frame), so
// every frame depends only on its own frame_len samples.
FeatureMap melfbank_features(const Waveform& w, const FbankConfig& cfg);

// One CSV row per frame.
void write_feature_csv(const std::filesystem::path& path, const FeatureMap& f);

}  // namespace dtsv::dsp
