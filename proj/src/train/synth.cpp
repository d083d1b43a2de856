// SPDX-License-Identifier: Apache-2.0
#include "dtsv/train/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <thread>

#include "dtsv/error.hpp"
#include "dtsv/rng.hpp"

namespace dtsv::train {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double resonance(double f, double center, double bw) {
  const double x = (f - center) / (0.5 * bw);
  return 1.0 / (1.0 + x * x);
}

}  // namespace

void SynthDatasetSpec::validate(std::size_t frame_len) const {
  require(n_speakers >= 2, "synth: n_speakers must be >= 2");
  require(utts_per_speaker >= 1, "synth: utts_per_speaker must be >= 1");
  require(sample_rate >= 4000, "synth: sample_rate must be >= 4000");
  require(std::isfinite(duration_s) && duration_s > 0.0, "synth: duration_s must be > 0");
  require(samples_per_utt() >= 2 * frame_len,
          "synth: duration_s too short for two frames of " + std::to_string(frame_len) + " samples");
  require(f0_min > 0.0 && f0_min < f0_max && f0_max < 0.25 * sample_rate,
          "synth: need 0 < f0_min < f0_max < sample_rate/4");
  require(f0_jitter >= 0.0 && f0_jitter < 0.5, "synth: f0_jitter must be in [0, 0.5)");
  require(formant_jitter >= 0.0 && formant_jitter < 0.5, "synth: formant_jitter must be in [0, 0.5)");
  require(std::isfinite(noise_floor_db), "synth: noise_floor_db must be finite");
}

std::size_t SynthDatasetSpec::samples_per_utt() const {
  return static_cast<std::size_t>(std::llround(duration_s * sample_rate));
}

SpeakerProfile speaker_profile(const SynthDatasetSpec& spec, std::size_t speaker) {
  Rng rng(derive_seed(spec.seed, 0x73706b72ULL, speaker));
  SpeakerProfile p;
  // Log-uniform F0 keeps low voices as distinguishable as high ones.
  p.f0 = spec.f0_min * std::pow(spec.f0_max / spec.f0_min, rng.uniform());
  const double nyq = 0.5 * spec.sample_rate;
  p.formants[0] = rng.uniform(300.0, 850.0);
  p.formants[1] = rng.uniform(900.0, 2300.0);
  p.formants[2] = std::min(rng.uniform(2400.0, 3400.0), 0.9 * nyq);
  for (std::size_t k = 0; k < 3; ++k) p.bandwidths[k] = rng.uniform(60.0, 160.0) * (1.0 + 0.5 * k);
  p.tilt_db_per_octave = rng.uniform(-9.0, -3.0);
  p.noise_floor_db = spec.noise_floor_db + rng.uniform(-5.0, 5.0);
  return p;
}

Utterance synth_utterance(const SynthDatasetSpec& spec, std::size_t speaker, std::size_t index) {
  const SpeakerProfile sp = speaker_profile(spec, speaker);
  Rng rng(derive_seed(spec.seed, 0x75747472ULL + speaker, index));
  const double fs = spec.sample_rate;
  const double nyq = 0.5 * fs;
  const std::size_t n = spec.samples_per_utt();

  const double f0 = sp.f0 * (1.0 + rng.uniform(-spec.f0_jitter, spec.f0_jitter));
  std::array<double, 3> formants{};
  for (std::size_t k = 0; k < 3; ++k)
    formants[k] = sp.formants[k] * (1.0 + rng.uniform(-spec.formant_jitter, spec.formant_jitter));
  const double vib_rate = rng.uniform(4.0, 6.5);
  const double vib_depth = rng.uniform(0.005, 0.02);
  const double vib_phase = rng.uniform(0.0, kTwoPi);
  const double glide = rng.uniform(-0.06, 0.06);  // slow F0 drift over the clip
  const double syl_rate = rng.uniform(2.5, 5.0);
  const double syl_phase = rng.uniform(0.0, kTwoPi);

  // Harmonic amplitudes are fixed per utterance at the nominal F0.
  const double f0_peak = f0 * (1.0 + vib_depth) * (1.0 + std::abs(glide));
  const std::size_t n_harm = std::max<std::size_t>(1, static_cast<std::size_t>(0.95 * nyq / f0_peak));
  std::vector<double> amp(n_harm + 1, 0.0);
  for (std::size_t k = 1; k <= n_harm; ++k) {
    const double f = f0 * static_cast<double>(k);
    double env = 0.02;
    for (std::size_t r = 0; r < 3; ++r) env += resonance(f, formants[r], sp.bandwidths[r]);
    const double tilt = std::pow(10.0, sp.tilt_db_per_octave * std::log2(f / 100.0) / 20.0);
    amp[k] = env * tilt;
  }

  std::vector<double> x(n);
  double phase = rng.uniform(0.0, kTwoPi);
  double voiced_energy = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double time = static_cast<double>(t) / fs;
    const double progress = static_cast<double>(t) / static_cast<double>(n);
    const double inst_f0 =
        f0 * (1.0 + glide * (progress - 0.5)) * (1.0 + vib_depth * std::sin(kTwoPi * vib_rate * time + vib_phase));
    phase += kTwoPi * inst_f0 / fs;
    if (phase > kTwoPi) phase -= kTwoPi;
    // sin(k*phase) by the Chebyshev recurrence.
    const double c2 = 2.0 * std::cos(phase);
    double s_prev = 0.0, s_cur = std::sin(phase), acc = 0.0;
    for (std::size_t k = 1; k <= n_harm; ++k) {
      acc += amp[k] * s_cur;
      const double s_next = c2 * s_cur - s_prev;
      s_prev = s_cur;
      s_cur = s_next;
    }
    const double s = std::sin(std::numbers::pi * syl_rate * time + syl_phase);
    const double envelope = 0.25 + 0.75 * s * s;
    x[t] = acc * envelope;
    voiced_energy += x[t] * x[t];
  }

  const double noise_rms =
      std::sqrt(voiced_energy / static_cast<double>(n)) * std::pow(10.0, sp.noise_floor_db / 20.0);
  for (double& v : x) v += noise_rms * rng.normal();

  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : x) v *= 0.5 / peak;

  Utterance u;
  char id[48];
  std::snprintf(id, sizeof id, "spk%03zu/utt%03zu", speaker, index);
  u.id = id;
  u.speaker = static_cast<int>(speaker);
  u.wave.sample_rate = spec.sample_rate;
  u.wave.samples = std::move(x);
  return u;
}

std::vector<Utterance> synth_dataset(const SynthDatasetSpec& spec, unsigned threads) {
  spec.validate();
  const std::size_t total = spec.n_speakers * spec.utts_per_speaker;
  std::vector<Utterance> out(total);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < total; i += stride)
      out[i] = synth_utterance(spec, i / spec.utts_per_speaker, i % spec.utts_per_speaker);
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }
  return out;
}

}  // namespace dtsv::train
