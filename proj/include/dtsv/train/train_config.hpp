// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

#include "dtsv/losses/losses.hpp"
#include "dtsv/train/adam.hpp"
#include "dtsv/train/augment.hpp"

namespace dtsv::train {

struct TrainConfig {
  double lr = 0.001;
  double lr_decay = 0.97;
  double weight_decay = 1e-5;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double crop_seconds = 2.0;             // random fixed-length crop per sample
  std::size_t heldout_per_speaker = 4;   // last utterances of each speaker
  unsigned threads = 0;                  // 0 = hardware concurrency; results do not depend on it
  losses::LossConfig loss;
  AugmentConfig augment;
  AdamConfig adam;

  void validate() const;
};

// lr * lr_decay^epoch
double lr_at(std::size_t epoch, const TrainConfig& cfg);

}  // namespace dtsv::train
