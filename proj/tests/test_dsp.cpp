// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "dtsv/dsp/fbank.hpp"
#include "dtsv/dsp/tdfe.hpp"
#include "dtsv/dsp/waveform.hpp"
#include "dtsv/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace dtsv;
using dsp::FbankConfig;
using dsp::Waveform;

namespace {

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

// Hand-assembled RIFF file, independent of save_wav.
void write_raw_wav(const std::filesystem::path& path, std::uint16_t format, std::uint16_t channels,
                   std::uint32_t rate, std::uint16_t bits, const std::vector<std::int16_t>& pcm) {
  std::string data;
  for (std::int16_t v : pcm) put_u16(data, static_cast<std::uint16_t>(v));
  std::string fmt;
  put_u16(fmt, format);
  put_u16(fmt, channels);
  put_u32(fmt, rate);
  put_u32(fmt, rate * channels * bits / 8);
  put_u16(fmt, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(fmt, bits);
  std::string body = "WAVE";
  body += "fmt ";
  put_u32(body, static_cast<std::uint32_t>(fmt.size()));
  body += fmt;
  body += "data";
  put_u32(body, static_cast<std::uint32_t>(data.size()));
  body += data;
  std::string file = "RIFF";
  put_u32(file, static_cast<std::uint32_t>(body.size()));
  file += body;
  std::ofstream(path, std::ios::binary) << file;
}

dsp::WavErrorCode load_error(const std::filesystem::path& path) {
  try {
    dsp::load_wav(path);
  } catch (const dsp::WavError& e) {
    return e.code();
  }
  FAIL("load_wav accepted " << path.string());
  return dsp::WavErrorCode::malformed;
}

Waveform noise(std::uint64_t seed, std::size_t n, int rate = 16000) {
  Rng rng(seed);
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (double& v : w.samples) v = rng.uniform(-1.0, 1.0);
  return w;
}

}  // namespace

TEST_CASE("load_wav reads 16-bit mono PCM") {
  testing::TempDir dir("dsp");
  std::vector<std::int16_t> pcm(16000);
  for (std::size_t i = 0; i < pcm.size(); ++i) pcm[i] = static_cast<std::int16_t>(i % 200 * 100 - 10000);
  write_raw_wav(dir / "a.wav", 1, 1, 16000, 16, pcm);
  const Waveform w = dsp::load_wav(dir / "a.wav");
  CHECK(w.sample_rate == 16000);
  REQUIRE(w.size() == 16000);
  for (std::size_t i = 0; i < pcm.size(); i += 997) CHECK(w.samples[i] == pcm[i] / 32768.0);

  write_raw_wav(dir / "z.wav", 1, 1, 8000, 16, std::vector<std::int16_t>(50, 0));
  const Waveform z = dsp::load_wav(dir / "z.wav");
  CHECK(z.sample_rate == 8000);
  for (double v : z.samples) CHECK(v == 0.0);
}

TEST_CASE("load_wav reports distinct error codes") {
  testing::TempDir dir("dsp");
  CHECK(load_error(dir / "missing.wav") == dsp::WavErrorCode::missing_file);
  write_raw_wav(dir / "stereo.wav", 1, 2, 16000, 16, std::vector<std::int16_t>(20, 1));
  CHECK(load_error(dir / "stereo.wav") == dsp::WavErrorCode::unsupported_channel_count);
  write_raw_wav(dir / "float.wav", 3, 1, 16000, 16, std::vector<std::int16_t>(20, 1));
  CHECK(load_error(dir / "float.wav") == dsp::WavErrorCode::not_pcm);
  write_raw_wav(dir / "b8.wav", 1, 1, 16000, 8, std::vector<std::int16_t>(20, 1));
  CHECK(load_error(dir / "b8.wav") == dsp::WavErrorCode::unsupported_bit_depth);
  std::ofstream(dir / "junk.wav") << "definitely not a riff file";
  CHECK(load_error(dir / "junk.wav") == dsp::WavErrorCode::malformed);
}

TEST_CASE("save_wav and load_wav round-trip quantized samples") {
  testing::TempDir dir("dsp");
  Waveform w = noise(4, 321, 22050);
  for (double& v : w.samples) v = std::round(v * 32767.0) / 32768.0;
  dsp::save_wav(dir / "r.wav", w);
  const Waveform r = dsp::load_wav(dir / "r.wav");
  CHECK(r.sample_rate == 22050);
  CHECK(r.samples == w.samples);
}

TEST_CASE("preemphasis follows the scalar recurrence") {
  Waveform w;
  w.samples = {1.0, 1.0, 1.0};
  const Waveform y = dsp::preemphasis(w, 0.97);
  CHECK(y.samples[0] == 1.0);
  CHECK(y.samples[1] == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(y.samples[2] == doctest::Approx(0.03).epsilon(1e-12));

  const Waveform x = noise(1, 100);
  CHECK(dsp::preemphasis(x, 0.0).samples == x.samples);
  const Waveform zero{std::vector<double>(64, 0.0), 16000};
  for (double v : dsp::preemphasis(zero, 0.97).samples) CHECK(v == 0.0);
  const Waveform p = dsp::preemphasis(x, 0.5);
  for (std::size_t t = 1; t < x.size(); ++t) CHECK(p.samples[t] == x.samples[t] - 0.5 * x.samples[t - 1]);
  CHECK_THROWS_AS(dsp::preemphasis(x, 1.0), Error);
}

TEST_CASE("mel scale and filter matrix") {
  CHECK(std::abs(dsp::hz_to_mel(1000.0) - 1000.0) < 0.5);
  CHECK(dsp::mel_to_hz(dsp::hz_to_mel(3210.0)) == doctest::Approx(3210.0).epsilon(1e-12));
  FbankConfig cfg;
  cfg.n_mels = 40;
  const ad::Tensor m = dsp::mel_matrix(cfg);
  CHECK(m.rows() == 40);
  CHECK(m.cols() == 257);
  for (std::size_t b = 0; b < m.rows(); ++b) {
    double mx = 0.0;
    for (double v : m.row(b)) {
      CHECK(v >= 0.0);
      mx = std::max(mx, v);
    }
    CHECK(mx > 0.0);
  }
  FbankConfig degenerate;
  degenerate.n_fft = 512;
  degenerate.n_mels = 400;
  CHECK_THROWS_AS(dsp::mel_matrix(degenerate), Error);
}

TEST_CASE("frontend config validation") {
  FbankConfig c;
  CHECK_NOTHROW(c.validate());
  FbankConfig bad = c;
  bad.hop = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.frame_len = 600;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.fmax = 9000.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.preemph = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("melfbank frame count and zero signal") {
  const FbankConfig cfg;
  const Waveform zero{std::vector<double>(16000, 0.0), 16000};
  const dsp::FeatureMap f = dsp::melfbank_features(zero, cfg);
  CHECK(f.frames() == 98);
  CHECK(f.dims() == 80);
  CHECK(f.frame_rate == 100.0);
  for (double v : f.values.values()) CHECK(v == 0.0);
  CHECK(dsp::num_frames(399, 400, 160) == 0);
  CHECK_THROWS_AS(dsp::melfbank_features(Waveform{std::vector<double>(399, 0.0), 16000}, cfg), Error);
  CHECK_THROWS_AS(dsp::melfbank_features(noise(2, 800, 8000), cfg), Error);
}

TEST_CASE("sine at a DFT bin lands in the mel bands covering that bin") {
  const FbankConfig cfg;
  const ad::Tensor mel = dsp::mel_matrix(cfg);
  const std::vector<double> window = dsp::hamming_window(cfg.frame_len);
  for (std::size_t k : {20u, 64u, 130u, 200u}) {
    const double hz = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
    Waveform w{std::vector<double>(4000), cfg.sample_rate};
    for (std::size_t i = 0; i < w.size(); ++i) w.samples[i] = 0.5 * std::sin(2 * std::numbers::pi * hz * i / cfg.sample_rate);

    // Direct DFT of the first windowed, pre-emphasized frame.
    std::vector<double> frame(w.samples.begin(), w.samples.begin() + cfg.frame_len);
    for (std::size_t t = frame.size(); t-- > 1;) frame[t] -= cfg.preemph * frame[t - 1];
    std::size_t peak = 0;
    double peak_e = -1.0;
    for (std::size_t j = 0; j < cfg.n_bins(); ++j) {
      double re = 0, im = 0;
      for (std::size_t n = 0; n < cfg.frame_len; ++n) {
        const double a = 2 * std::numbers::pi * static_cast<double>(j * n) / cfg.n_fft;
        re += frame[n] * window[n] * std::cos(a);
        im -= frame[n] * window[n] * std::sin(a);
      }
      if (re * re + im * im > peak_e) peak_e = re * re + im * im, peak = j;
    }
    CHECK(peak == k);

    const dsp::FeatureMap f = dsp::melfbank_features(w, cfg);
    for (std::size_t t = 0; t < f.frames(); ++t) {
      std::size_t best = 0;
      for (std::size_t b = 1; b < f.dims(); ++b) {
        if (f.values.at(t, b) > f.values.at(t, best)) best = b;
      }
      CHECK(mel.at(best, k) > 0.0);
    }
  }
}

TEST_CASE("tdfe mel initialization matches the reference pipeline") {
  const FbankConfig cfg;
  const dsp::TdfeParams p = dsp::tdfe_init_mel(cfg);
  CHECK(p.channels() == 2 * cfg.n_bins());
  CHECK(p.kernel_len() == cfg.frame_len);
  CHECK(p.out_dims() == cfg.n_mels);
  CHECK(p.hop == cfg.hop);
  CHECK(testing::mel_equivalence_error(11, 10) <= 1e-4);

  const Waveform zero{std::vector<double>(16000, 0.0), 16000};
  const dsp::TdfeOutput z = dsp::tdfe_forward(p, zero);
  for (double v : z.energies.values()) CHECK(v == 0.0);
  for (double v : z.features.values.values()) CHECK(v == 0.0);
}

TEST_CASE("tdfe shape law, nonnegativity and determinism") {
  FbankConfig cfg;
  cfg.sample_rate = 8000;
  cfg.frame_len = 200;
  cfg.hop = 80;
  cfg.n_fft = 256;
  cfg.n_mels = 24;
  cfg.fmax = 4000.0;
  const dsp::TdfeParams p = dsp::tdfe_init_mel(cfg);
  for (std::size_t n : {200u, 279u, 280u, 1234u}) {
    const Waveform w = noise(n, n, 8000);
    const dsp::TdfeOutput a = dsp::tdfe_forward(p, w);
    const dsp::FeatureMap ref = dsp::melfbank_features(w, cfg);
    CHECK(a.features.frames() == ref.frames());
    CHECK(a.features.frames() == dsp::num_frames(n, 200, 80));
    CHECK(a.energies.rows() == a.features.frames());
    CHECK(a.energies.cols() == p.channels());
    for (double v : a.features.values.values()) CHECK(v >= 0.0);
    for (double v : ref.values.values()) CHECK(v >= 0.0);
    CHECK(dsp::tdfe_forward(p, w).features.values == a.features.values);
    CHECK(dsp::melfbank_features(w, cfg).values == ref.values);
  }
  CHECK_THROWS_AS(dsp::tdfe_forward(p, noise(1, 199, 8000)), Error);
}

TEST_CASE("tdfe with selector rows returns log-compressed energies") {
  Rng rng(5);
  dsp::TdfeParams p;
  p.hop = 16;
  p.conv_kernels = testing::random_tensor({6, 32}, rng, 0.3);
  p.fc_weights = ad::Tensor({3, 6});
  const std::size_t pick[3] = {4, 0, 5};
  for (std::size_t d = 0; d < 3; ++d) p.fc_weights.at(d, pick[d]) = 1.0;
  const Waveform w = noise(6, 200, 16000);
  const dsp::TdfeOutput out = dsp::tdfe_forward(p, w);
  REQUIRE(out.features.frames() == dsp::num_frames(200, 32, 16));
  for (std::size_t t = 0; t < out.features.frames(); ++t) {
    for (std::size_t c = 0; c < 6; ++c) {
      double y = 0.0;
      for (std::size_t j = 0; j < 32; ++j) y += p.conv_kernels.at(c, j) * w.samples[t * 16 + j];
      CHECK(out.energies.at(t, c) == doctest::Approx(y * y).epsilon(1e-12));
    }
    for (std::size_t d = 0; d < 3; ++d) {
      CHECK(out.features.values.at(t, d) == doctest::Approx(std::log1p(out.energies.at(t, pick[d]))).epsilon(1e-12));
    }
  }
}

TEST_CASE("feature CSV has one row per frame") {
  testing::TempDir dir("dsp");
  const dsp::FeatureMap f = dsp::melfbank_features(noise(8, 2000), FbankConfig{});
  dsp::write_feature_csv(dir / "f.csv", f);
  std::ifstream in(dir / "f.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    CHECK(static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) == f.dims() - 1);
    ++rows;
  }
  CHECK(rows == f.frames());
}
