// SPDX-License-Identifier: Apache-2.0
//
// Corpus directories and lists. A list file has one `<wav-path> <speaker>`
// line per utterance, paths relative to the list's directory. Speaker
// labels are arbitrary tokens mapped to class ids in sorted order.
//
// A corpus directory written by write_corpus holds the WAV files plus
//   wav.lst     every utterance
//   train.lst   utterances used for training
//   test.lst    held-out utterances (last k of each speaker)
//   trials.txt  all held-out pairs, target when speakers match
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dtsv/eval/scoring.hpp"
#include "dtsv/train/synth.hpp"

namespace dtsv::train {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> heldout;
};

// The last `per_speaker` utterances of each speaker (in corpus order) are
// held out. Every speaker must keep at least one training utterance.
Split split_heldout(std::span<const Utterance> utts, std::size_t per_speaker);

// All unordered pairs i < j of the given utterances, by id.
eval::TrialList pair_trials(std::span<const Utterance> utts, std::span<const std::size_t> indices);

std::size_t count_speakers(std::span<const Utterance> utts);

void write_corpus(const std::filesystem::path& dir, std::span<const Utterance> utts,
                  std::size_t heldout_per_speaker);

// Loads every listed WAV; ids are the paths as written in the list.
std::vector<Utterance> load_list(const std::filesystem::path& list_file, unsigned threads = 1);

// Paths only (speaker column optional), for extraction and analysis.
std::vector<std::string> read_wav_paths(const std::filesystem::path& list_file);

}  // namespace dtsv::train
