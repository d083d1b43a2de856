// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint, all integers little-endian:
//   "DTSV" u32 version
//   u32 length, run-config text
//   u32 count, then per tensor: u32 name length, name, u32 rank,
//     rank x u64 extents, float32 payload
//   "ADAM" u64 step, u32 count, per tensor: float32 m then float32 v
//   "RNG " u32 length, engine state text
//   "META" u64 epoch, u64 global step, f64 best EER, u64 best epoch, f64 last EER
//   "END "
#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "dtsv/autodiff/tensor.hpp"
#include "dtsv/model/encoder.hpp"
#include "dtsv/train/adam.hpp"

namespace dtsv::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  ad::Tensor value;
};

struct TrainProgress {
  std::uint64_t epoch = 0;        // completed epochs
  std::uint64_t global_step = 0;  // optimizer steps taken
  double best_eer = std::numeric_limits<double>::infinity();    // +inf until a held-out evaluation ran
  std::uint64_t best_epoch = 0;
  double last_eer = std::numeric_limits<double>::infinity();
};

struct Checkpoint {
  std::string config_text;
  std::vector<NamedTensor> tensors;  // model parameters in canonical order
  AdamState adam;
  std::string rng_state;
  TrainProgress progress;
};

Checkpoint make_checkpoint(const model::Model& m, std::string config_text);

std::string encode_checkpoint(const Checkpoint& c);
// Throws Error(io) on bad magic, unknown version or truncation.
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& source = "<checkpoint>");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies tensors into m by name. Missing, extra or mis-shaped names are
// reported together in one error.
void apply_checkpoint(const Checkpoint& c, model::Model& m);

// Rebuilds the model described by the checkpoint's config text.
model::Model model_from_checkpoint(const Checkpoint& c);

}  // namespace dtsv::train
