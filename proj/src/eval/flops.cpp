// SPDX-License-Identifier: Apache-2.0
#include "dtsv/eval/flops.hpp"

#include <cmath>

#include "dtsv/dsp/fbank.hpp"
#include "dtsv/error.hpp"

namespace dtsv::eval {

FlopsBreakdown flops_estimate(const model::ModelConfig& cfg, double input_seconds) {
  cfg.validate(true);
  require(std::isfinite(input_seconds) && input_seconds > 0.0, "flops: seconds must be > 0");
  const auto samples = static_cast<std::size_t>(std::llround(input_seconds * cfg.frontend.sample_rate));
  const std::size_t T = dsp::num_frames(samples, cfg.frontend.frame_len, cfg.frontend.hop);
  require(T >= 1, "flops: input shorter than one frame");
  const double t = static_cast<double>(T);
  const double n = t + 1.0;
  const double O = static_cast<double>(cfg.tdfe_channels());
  const double K = static_cast<double>(cfg.frontend.frame_len);
  const double D = static_cast<double>(cfg.frontend.n_mels);
  const double d = static_cast<double>(cfg.model_dim);
  const double mlp = static_cast<double>(cfg.mlp_dim);
  const double L = static_cast<double>(cfg.n_layers);

  FlopsBreakdown f;
  f.frames = T;
  f.tdfe_conv = 2.0 * t * O * K;
  f.tdfe_fc = 2.0 * t * O * D;
  f.input_proj = 2.0 * t * D * d;
  f.qkvo = L * 2.0 * 4.0 * n * d * d;
  f.attention = L * 2.0 * 2.0 * n * n * d;
  f.mlp = L * 2.0 * 2.0 * n * d * mlp;
  f.classifier = 2.0 * d * static_cast<double>(cfg.n_classes);
  return f;
}

}  // namespace dtsv::eval
