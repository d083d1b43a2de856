// SPDX-License-Identifier: Apache-2.0
//
// Epoch loop. Each sample gets its own graph; per-sample gradients are
// summed in batch order, so results are bit-identical for any thread
// count. Per-sample randomness (crop, augmentation) comes from streams
// keyed by (seed, epoch, position); only the shuffle generator carries
// state, and it is stored in the checkpoint.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtsv/losses/losses.hpp"
#include "dtsv/model/encoder.hpp"
#include "dtsv/train/checkpoint.hpp"
#include "dtsv/train/synth.hpp"
#include "dtsv/train/train_config.hpp"

namespace dtsv::train {

// Batch means of one optimizer step.
struct MetricsRow {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  losses::LossBreakdown loss;
  double accuracy = 0.0;
};

// step,epoch,lr,total,class,diffluence,accuracy,diffluence_l0..l{L-1}
std::string metrics_header(std::size_t layers);
std::string format_metrics_row(const MetricsRow& row);
std::vector<MetricsRow> parse_metrics_log(const std::string& text);

struct EpochSummary {
  std::size_t epoch = 0;
  double lr = 0.0;
  double total = 0.0;
  double classification = 0.0;
  double diffluence = 0.0;
  double accuracy = 0.0;
  double heldout_eer = 0.0;      // NaN when nothing is held out
  double heldout_min_dcf = 0.0;
  bool best = false;
  double seconds = 0.0;          // wall time; never written to files
};

std::string epoch_summary_header();
std::string format_epoch_summary(const EpochSummary& s);

struct TrainOptions {
  // Per-epoch checkpoints, best.ckpt, metrics.csv and epochs.csv go here
  // when set.
  std::filesystem::path out_dir;
  const Checkpoint* resume = nullptr;
  std::string config_text;  // stored in every checkpoint
  std::size_t max_epochs = static_cast<std::size_t>(-1);  // stop after this many epochs in this call
  std::function<void(const EpochSummary&)> on_epoch;
};

struct TrainResult {
  Checkpoint last;
  std::optional<Checkpoint> best;  // set when this call produced a new best
  std::vector<MetricsRow> log;
  std::vector<EpochSummary> epochs;
};

// Trains m in place on the non-held-out utterances of data.
TrainResult train(model::Model& m, std::span<const Utterance> data, const TrainConfig& cfg,
                  const TrainOptions& opts = {});

// Held-out verification on all pairs of the given utterances.
struct HeldoutResult {
  double eer = 0.0;
  double min_dcf = 0.0;
  std::size_t trials = 0;
};

HeldoutResult evaluate_pairs(const model::Model& m, std::span<const Utterance> data,
                             std::span<const std::size_t> indices, unsigned threads);

}  // namespace dtsv::train
