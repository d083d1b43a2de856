// SPDX-License-Identifier: Apache-2.0
//
// Synthetic speakers: a harmonic source at a speaker-specific F0 shaped by
// a fixed formant envelope and spectral tilt, plus a noise floor. Each
// utterance perturbs F0, formants and loudness contour so same-speaker
// clips differ while staying closer to each other than to other speakers.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dtsv/dsp/waveform.hpp"

namespace dtsv::train {

struct SynthDatasetSpec {
  std::size_t n_speakers = 20;
  std::size_t utts_per_speaker = 20;
  double duration_s = 2.0;
  int sample_rate = 16000;
  std::uint64_t seed = 1234;
  double f0_min = 90.0;
  double f0_max = 250.0;
  double f0_jitter = 0.10;       // relative per-utterance F0 shift (uniform +-)
  double formant_jitter = 0.08;  // relative per-utterance formant shift
  double noise_floor_db = -15.0; // speaker noise floor relative to the voiced signal

  // frame_len is the frontend frame length the corpus must cover twice.
  void validate(std::size_t frame_len = 400) const;
  std::size_t samples_per_utt() const;

  friend bool operator==(const SynthDatasetSpec&, const SynthDatasetSpec&) = default;
};

struct SpeakerProfile {
  double f0 = 0.0;
  std::array<double, 3> formants{};    // Hz
  std::array<double, 3> bandwidths{};  // Hz
  double tilt_db_per_octave = 0.0;
  double noise_floor_db = 0.0;
};

struct Utterance {
  std::string id;  // "spkNN/uttNN"
  int speaker = 0;
  dsp::Waveform wave;
};

SpeakerProfile speaker_profile(const SynthDatasetSpec& spec, std::size_t speaker);

// Deterministic in (spec, speaker, index) alone.
Utterance synth_utterance(const SynthDatasetSpec& spec, std::size_t speaker, std::size_t index);

// Speaker-major order: utterance u of speaker s sits at s * utts_per_speaker + u.
std::vector<Utterance> synth_dataset(const SynthDatasetSpec& spec, unsigned threads = 1);

}  // namespace dtsv::train
