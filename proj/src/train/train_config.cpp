// SPDX-License-Identifier: Apache-2.0
#include "dtsv/train/train_config.hpp"

#include <cmath>

#include "dtsv/error.hpp"

namespace dtsv::train {

void TrainConfig::validate() const {
  require(std::isfinite(lr) && lr >= 0.0, "train: lr must be finite and >= 0");
  require(std::isfinite(lr_decay) && lr_decay > 0.0 && lr_decay <= 1.0, "train: lr_decay must be in (0, 1]");
  require(std::isfinite(weight_decay) && weight_decay >= 0.0, "train: weight_decay must be >= 0");
  require(batch_size >= 1, "train: batch_size must be >= 1");
  require(std::isfinite(crop_seconds) && crop_seconds > 0.0, "train: crop_seconds must be > 0");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0,
          "train: adam betas must be in [0, 1)");
  require(adam.eps > 0.0, "train: adam_eps must be > 0");
  loss.validate();
  augment.validate();
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch));
}

}  // namespace dtsv::train
