// SPDX-License-Identifier: Apache-2.0
#include "dtsv/train/augment.hpp"

#include <cmath>
#include <string>

#include "dtsv/error.hpp"

namespace dtsv::train {

void AugmentConfig::validate() const {
  require(std::isfinite(snr_db_min) && std::isfinite(snr_db_max) && snr_db_min <= snr_db_max,
          "augment: snr range must be finite with min <= max");
  require(std::isfinite(gain_db_min) && std::isfinite(gain_db_max) && gain_db_min <= gain_db_max,
          "augment: gain range must be finite with min <= max");
}

void AugmentConfig::validate(std::size_t frames, std::size_t dims) const {
  validate();
  if (!specaug.enabled) return;
  require(specaug.max_time_width <= frames,
          "augment: max_time_width " + std::to_string(specaug.max_time_width) + " exceeds " +
              std::to_string(frames) + " frames");
  require(specaug.max_freq_width <= dims,
          "augment: max_freq_width " + std::to_string(specaug.max_freq_width) + " exceeds " +
              std::to_string(dims) + " feature dims");
}

dsp::Waveform augment_waveform(const dsp::Waveform& w, const AugmentConfig& cfg, Rng& rng) {
  dsp::Waveform out = w;
  if (cfg.gain_enabled) {
    const double g = std::pow(10.0, rng.uniform(cfg.gain_db_min, cfg.gain_db_max) / 20.0);
    for (double& s : out.samples) s *= g;
  }
  if (cfg.noise_enabled && !out.samples.empty()) {
    const double snr_db = rng.uniform(cfg.snr_db_min, cfg.snr_db_max);
    std::vector<double> noise(out.samples.size());
    double pn = 0.0, ps = 0.0;
    for (std::size_t i = 0; i < noise.size(); ++i) {
      noise[i] = rng.normal();
      pn += noise[i] * noise[i];
      ps += out.samples[i] * out.samples[i];
    }
    if (ps > 0.0 && pn > 0.0) {
      const double k = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
      for (std::size_t i = 0; i < noise.size(); ++i) out.samples[i] += k * noise[i];
    }
  }
  return out;
}

ad::Tensor specaugment_mask(std::size_t frames, std::size_t dims, const SpecAugmentConfig& cfg,
                            Rng& rng) {
  ad::Tensor mask({frames, dims}, 1.0);
  if (!cfg.enabled || frames == 0 || dims == 0) return mask;
  auto stripe = [&](std::size_t extent, std::size_t max_width) {
    const std::size_t width = static_cast<std::size_t>(rng.uniform_int(std::min(max_width, extent) + 1));
    const std::size_t start = static_cast<std::size_t>(rng.uniform_int(extent - width + 1));
    return std::pair{start, width};
  };
  for (std::size_t n = 0; n < cfg.n_time_masks; ++n) {
    const auto [t0, w] = stripe(frames, cfg.max_time_width);
    for (std::size_t t = t0; t < t0 + w; ++t)
      for (std::size_t d = 0; d < dims; ++d) mask.at(t, d) = 0.0;
  }
  for (std::size_t n = 0; n < cfg.n_freq_masks; ++n) {
    const auto [d0, w] = stripe(dims, cfg.max_freq_width);
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t d = d0; d < d0 + w; ++d) mask.at(t, d) = 0.0;
  }
  return mask;
}

dsp::FeatureMap specaugment(const dsp::FeatureMap& f, const AugmentConfig& cfg, Rng& rng) {
  dsp::FeatureMap out = f;
  if (!cfg.specaug.enabled) return out;
  const ad::Tensor mask = specaugment_mask(f.frames(), f.dims(), cfg.specaug, rng);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= mask[i];
  return out;
}

}  // namespace dtsv::train
