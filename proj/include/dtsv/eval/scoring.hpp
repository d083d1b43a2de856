// SPDX-License-Identifier: Apache-2.0
//
// Trial lists, embedding/score files and cosine scoring.
//   trials:     <0|1> <enroll> <test>          (1 = target)
//   scores:     <score> <enroll> <test>
//   embeddings: <utt> <d> <v_1> ... <v_d>
// Relative utterance paths resolve against a base directory, normally the
// directory of the list file.
#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dtsv/eval/metrics.hpp"
#include "dtsv/model/encoder.hpp"

namespace dtsv::eval {

struct Trial {
  bool target = false;
  std::string enroll;
  std::string test;

  friend bool operator==(const Trial&, const Trial&) = default;
};

struct TrialList {
  std::vector<Trial> entries;
};

TrialList read_trials(const std::filesystem::path& path);
void write_trials(const std::filesystem::path& path, const TrialList& trials);

struct ScoredTrial {
  double score = 0.0;
  std::string enroll;
  std::string test;
};

std::vector<ScoredTrial> read_scores(const std::filesystem::path& path);
void write_scores(const std::filesystem::path& path, std::span<const ScoredTrial> scores);

struct EmbeddingEntry {
  std::string utt;
  std::vector<double> values;
};

std::vector<EmbeddingEntry> parse_embeddings(const std::string& text);
std::string format_embeddings(std::span<const EmbeddingEntry> entries);
std::vector<EmbeddingEntry> read_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, std::span<const EmbeddingEntry> entries);

// Dot product of two unit vectors; rejects norms off by more than 1e-4.
double cosine_score(std::span<const double> a, std::span<const double> b);

std::filesystem::path resolve_path(const std::string& utt, const std::filesystem::path& base_dir);

// Embeds each listed utterance; order preserved. Read failures name the
// list index. threads > 1 parallelizes over utterances.
std::vector<EmbeddingEntry> extract_embeddings(const model::Model& m, std::span<const std::string> utts,
                                               const std::filesystem::path& base_dir,
                                               unsigned threads = 1);

struct TrialScores {
  ScoreSet set;
  std::vector<ScoredTrial> rows;  // trial order
};

// Each distinct utterance is embedded once; scores keep trial order.
TrialScores score_trials(const model::Model& m, const TrialList& trials,
                         const std::filesystem::path& base_dir, unsigned threads = 1);

// Scores from precomputed embeddings keyed by utterance id.
TrialScores score_trials(const std::map<std::string, std::vector<double>>& embeddings,
                         const TrialList& trials);

}  // namespace dtsv::eval
