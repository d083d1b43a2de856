// SPDX-License-Identifier: Apache-2.0
#include "dtsv/dsp/fbank.hpp"

#include <fftw3.h>

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "dtsv/format.hpp"

namespace dtsv::dsp {
namespace {

// FFTW planning is not thread-safe; execution on fresh aligned buffers is.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
    std::lock_guard lock(plan_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(plan_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }

  // |X_k|^2 for k = 0..n/2 of the current input buffer.
  void energy(std::span<double> out) {
    fftw_execute(plan_);
    for (std::size_t k = 0; k <= n_ / 2; ++k) out[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  static std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
  }

  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace

void FbankConfig::validate() const {
  require(sample_rate > 0, "frontend: sample_rate must be positive");
  require(hop > 0 && hop <= frame_len && frame_len <= n_fft,
          "frontend: need 0 < hop <= frame_len <= n_fft");
  require(n_mels >= 1, "frontend: n_mels must be >= 1");
  require(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0,
          "frontend: need 0 <= fmin < fmax <= sample_rate/2");
  require(preemph >= 0.0 && preemph < 1.0, "frontend: preemph must be in [0, 1)");
}

std::size_t num_frames(std::size_t len, std::size_t frame_len, std::size_t hop) {
  return len < frame_len ? 0 : 1 + (len - frame_len) / hop;
}

void preemphasis_inplace(std::span<double> x, double coeff) {
  for (std::size_t t = x.size(); t-- > 1;) x[t] -= coeff * x[t - 1];
}

Waveform preemphasis(const Waveform& w, double coeff) {
  require(coeff >= 0.0 && coeff < 1.0, "preemphasis: coefficient must be in [0, 1)");
  Waveform out = w;
  preemphasis_inplace(out.samples, coeff);
  return out;
}

std::vector<double> hamming_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n == 1) return w;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                  static_cast<double>(n - 1));
  }
  return w;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

ad::Tensor mel_matrix(const FbankConfig& cfg) {
  cfg.validate();
  const std::size_t bins = cfg.n_bins();
  ad::Tensor m({cfg.n_mels, bins});
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
  const double delta = (hi - lo) / static_cast<double>(cfg.n_mels + 1);
  for (std::size_t b = 0; b < cfg.n_mels; ++b) {
    const double left = lo + static_cast<double>(b) * delta;
    const double center = left + delta;
    const double right = center + delta;
    bool any = false;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(cfg.n_fft);
      const double mk = hz_to_mel(f);
      if (mk <= left || mk >= right) continue;
      m.at(b, k) = mk <= center ? (mk - left) / (center - left) : (right - mk) / (right - center);
      any = any || m.at(b, k) > 0.0;
    }
    if (!any) {
      fail("mel filter " + std::to_string(b) + " covers no FFT bin (degenerate band); "
           "increase n_fft or reduce n_mels");
    }
  }
  return m;
}

FeatureMap melfbank_features(const Waveform& w, const FbankConfig& cfg) {
  cfg.validate();
  w.validate();
  require(w.sample_rate == cfg.sample_rate,
          "sample rate " + std::to_string(w.sample_rate) + " does not match frontend rate " +
              std::to_string(cfg.sample_rate));
  const std::size_t t = num_frames(w.size(), cfg.frame_len, cfg.hop);
  require(t >= 1, "signal of " + std::to_string(w.size()) + " samples is shorter than one frame (" +
                      std::to_string(cfg.frame_len) + ")");
  const ad::Tensor mel = mel_matrix(cfg);
  const std::vector<double> window = hamming_window(cfg.frame_len);
  const std::size_t bins = cfg.n_bins();
  RealFft fft(cfg.n_fft);
  std::vector<double> energy(bins);
  FeatureMap out{ad::Tensor({t, cfg.n_mels}), static_cast<double>(cfg.sample_rate) / cfg.hop};
  for (std::size_t f = 0; f < t; ++f) {
    double* buf = fft.input();
    std::copy_n(w.samples.data() + f * cfg.hop, cfg.frame_len, buf);
    preemphasis_inplace({buf, cfg.frame_len}, cfg.preemph);
    for (std::size_t i = 0; i < cfg.frame_len; ++i) buf[i] *= window[i];
    std::fill(buf + cfg.frame_len, buf + cfg.n_fft, 0.0);
    fft.energy(energy);
    for (std::size_t b = 0; b < cfg.n_mels; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < bins; ++k) s += mel.at(b, k) * energy[k];
      out.values.at(f, b) = std::log1p(s);
    }
  }
  return out;
}

void write_feature_csv(const std::filesystem::path& path, const FeatureMap& f) {
  std::ofstream out(path);
  if (!out) fail_io(path.string() + ": cannot open for writing");
  for (std::size_t r = 0; r < f.frames(); ++r) {
    for (std::size_t c = 0; c < f.dims(); ++c) {
      if (c) out << ',';
      out << format_double(f.values.at(r, c));
    }
    out << '\n';
  }
  if (!out) fail_io(path.string() + ": write failed");
}

}  // namespace dtsv::dsp
