// SPDX-License-Identifier: Apache-2.0
//
// Per-layer, per-head distance between the CLS vector and the other
// frames. Head h uses the contiguous dimension block [h*d/H, (h+1)*d/H)
// of each hidden vector. KL is uncapped and uses the same softmax
// normalization as the training loss.
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "dtsv/dsp/waveform.hpp"
#include "dtsv/model/encoder.hpp"
#include "dtsv/model/hidden_states.hpp"

namespace dtsv::eval {

enum class DistanceKind { kl, cosine };

const char* distance_name(DistanceKind k);

struct AttentionDistanceReport {
  DistanceKind kind = DistanceKind::kl;
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t utterances = 0;
  std::vector<double> values;  // layers x heads, row-major

  double at(std::size_t layer, std::size_t head) const { return values[layer * heads + head]; }
};

// d[l][h] pools all (utterance, frame) terms: sum of distances divided by
// the total frame count, so longer utterances weigh more.
AttentionDistanceReport attention_distance(std::span<const model::HiddenStates> states,
                                           std::size_t heads, DistanceKind kind);

AttentionDistanceReport attention_distance(const model::Model& m, std::span<const dsp::Waveform> utts,
                                           DistanceKind kind, unsigned threads = 1);

// CSV columns: layer,head,distance (layers and heads 0-based).
void write_attention_csv(const std::filesystem::path& path, const AttentionDistanceReport& r);
// Layer on x (1-based), distance on y, one marker per head.
void write_attention_svg(const std::filesystem::path& path, const AttentionDistanceReport& r);

}  // namespace dtsv::eval
