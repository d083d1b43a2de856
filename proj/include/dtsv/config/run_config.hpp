// SPDX-License-Identifier: Apache-2.0
//
// Run configuration file: `key = value` lines grouped under [model],
// [frontend], [loss], [train], [augment] and [data]. '#' starts a comment.
// Unknown sections and keys are errors; omitted keys keep their defaults.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dtsv/model/config.hpp"
#include "dtsv/train/synth.hpp"
#include "dtsv/train/train_config.hpp"

namespace dtsv::config {

struct RunConfig {
  model::ModelConfig model;
  std::uint64_t model_seed = 0;
  // Zero in the file means "number of speakers in the training data".
  std::size_t n_classes = 0;
  train::TrainConfig train;
  train::SynthDatasetSpec data;

  void validate() const;
};

// Throws Error(invalid_argument) naming source:line and the key.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

// Every key in canonical order; parse(serialize(c)) reproduces c.
std::string serialize_run_config(const RunConfig& cfg);

struct KeyInfo {
  std::string section;
  std::string key;
  std::string default_value;
};

// All recognized keys with their default values.
std::vector<KeyInfo> config_keys();

// DTSV_SEED, when set, replaces the model, training and data seeds.
std::optional<std::uint64_t> seed_from_env();
void apply_seed(RunConfig& cfg, std::uint64_t seed);

}  // namespace dtsv::config
