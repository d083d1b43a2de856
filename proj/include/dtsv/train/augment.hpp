// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

#include "dtsv/autodiff/tensor.hpp"
#include "dtsv/dsp/fbank.hpp"
#include "dtsv/dsp/waveform.hpp"
#include "dtsv/rng.hpp"

namespace dtsv::train {

struct SpecAugmentConfig {
  bool enabled = false;
  std::size_t n_time_masks = 2;
  std::size_t max_time_width = 10;
  std::size_t n_freq_masks = 2;
  std::size_t max_freq_width = 8;

  friend bool operator==(const SpecAugmentConfig&, const SpecAugmentConfig&) = default;
};

struct AugmentConfig {
  bool noise_enabled = false;
  double snr_db_min = 5.0;
  double snr_db_max = 20.0;
  bool gain_enabled = false;
  double gain_db_min = -6.0;
  double gain_db_max = 6.0;
  SpecAugmentConfig specaug;
  std::uint64_t seed = 0;  // mixed into the per-sample augmentation streams

  bool any_enabled() const noexcept { return noise_enabled || gain_enabled || specaug.enabled; }
  void validate() const;
  // Also checks mask widths against the feature extents they apply to.
  void validate(std::size_t frames, std::size_t dims) const;

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

// Applies a sampled gain, then adds white Gaussian noise scaled so the
// noise-to-signal energy ratio equals a sampled SNR exactly. Returns the
// input unchanged when both are disabled.
dsp::Waveform augment_waveform(const dsp::Waveform& w, const AugmentConfig& cfg, Rng& rng);

// frames x dims 0/1 mask with time and feature stripes zeroed; all ones
// when SpecAugment is disabled.
ad::Tensor specaugment_mask(std::size_t frames, std::size_t dims, const SpecAugmentConfig& cfg,
                            Rng& rng);

dsp::FeatureMap specaugment(const dsp::FeatureMap& f, const AugmentConfig& cfg, Rng& rng);

}  // namespace dtsv::train
