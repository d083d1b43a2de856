// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dtsv/error.hpp"

namespace dtsv::dsp {

// Mono samples in [-1, 1] at a fixed rate.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const noexcept { return samples.size(); }
  double seconds() const noexcept { return static_cast<double>(samples.size()) / sample_rate; }

  // Throws unless sample_rate > 0, length >= 1 and all samples are finite.
  void validate() const;
};

enum class WavErrorCode {
  missing_file,
  malformed,
  not_pcm,
  unsupported_bit_depth,
  unsupported_channel_count,
};

class WavError : public Error {
 public:
  WavError(WavErrorCode code, const std::string& what) : Error(ErrorKind::io, what), code_(code) {}
  WavErrorCode code() const noexcept { return code_; }

 private:
  WavErrorCode code_;
};

// RIFF/WAVE, PCM, 16-bit little-endian, mono. Samples are scaled by 1/32768.
Waveform load_wav(const std::filesystem::path& path);

// Writes 16-bit PCM mono at scale 32768 (the inverse of load_wav); samples
// are clipped to [-1, 1] and rounded, so +1.0 saturates at 32767.
void save_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace dtsv::dsp
