// SPDX-License-Identifier: Apache-2.0
#include "dtsv/eval/scoring.hpp"

#include <cmath>
#include <string>

#include "dtsv/dsp/waveform.hpp"
#include "dtsv/error.hpp"
#include "dtsv/format.hpp"
#include "dtsv/parallel.hpp"

namespace dtsv::eval {

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line + 1);
}

bool blank_or_comment(const std::string& line) {
  const std::string_view t = trim(line);
  return t.empty() || t.front() == '#';
}

}  // namespace

TrialList read_trials(const std::filesystem::path& path) {
  const auto lines = split_lines(read_text_file(path));
  TrialList out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank_or_comment(lines[i])) continue;
    const auto tok = split_whitespace(lines[i]);
    if (tok.size() != 3 || (tok[0] != "0" && tok[0] != "1"))
      fail_io(where(path, i) + ": expected '<0|1> <enroll> <test>'");
    out.entries.push_back({tok[0] == "1", tok[1], tok[2]});
  }
  if (out.entries.empty()) fail_io(path.string() + ": no trials");
  return out;
}

void write_trials(const std::filesystem::path& path, const TrialList& trials) {
  std::string text;
  for (const Trial& t : trials.entries) text += (t.target ? "1 " : "0 ") + t.enroll + ' ' + t.test + '\n';
  write_text_file(path, text);
}

std::vector<ScoredTrial> read_scores(const std::filesystem::path& path) {
  const auto lines = split_lines(read_text_file(path));
  std::vector<ScoredTrial> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank_or_comment(lines[i])) continue;
    const auto tok = split_whitespace(lines[i]);
    if (tok.size() != 3) fail_io(where(path, i) + ": expected '<score> <enroll> <test>'");
    double s = 0.0;
    try {
      s = parse_double(tok[0], "score");
    } catch (const Error& e) {
      fail_io(where(path, i) + ": " + e.what());
    }
    if (!std::isfinite(s)) fail_numeric(where(path, i) + ": non-finite score");
    out.push_back({s, tok[1], tok[2]});
  }
  if (out.empty()) fail_io(path.string() + ": no scores");
  return out;
}

void write_scores(const std::filesystem::path& path, std::span<const ScoredTrial> scores) {
  std::string text;
  for (const ScoredTrial& s : scores) text += format_double(s.score) + ' ' + s.enroll + ' ' + s.test + '\n';
  write_text_file(path, text);
}

std::vector<EmbeddingEntry> parse_embeddings(const std::string& text) {
  const auto lines = split_lines(text);
  std::vector<EmbeddingEntry> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank_or_comment(lines[i])) continue;
    const auto tok = split_whitespace(lines[i]);
    const std::string at = "embeddings line " + std::to_string(i + 1);
    if (tok.size() < 2) fail_io(at + ": expected '<utt> <d> <v_1> ... <v_d>'");
    long long d = 0;
    try {
      d = parse_int(tok[1], "dimension");
    } catch (const Error& e) {
      fail_io(at + ": " + e.what());
    }
    if (d < 1 || static_cast<std::size_t>(d) + 2 != tok.size())
      fail_io(at + ": dimension " + tok[1] + " does not match " + std::to_string(tok.size() - 2) + " values");
    EmbeddingEntry e{tok[0], {}};
    e.values.reserve(static_cast<std::size_t>(d));
    for (std::size_t k = 2; k < tok.size(); ++k) {
      try {
        e.values.push_back(parse_double(tok[k], "embedding value"));
      } catch (const Error& err) {
        fail_io(at + ": " + err.what());
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string format_embeddings(std::span<const EmbeddingEntry> entries) {
  std::string text;
  for (const EmbeddingEntry& e : entries) {
    text += e.utt;
    text += ' ';
    text += std::to_string(e.values.size());
    for (double v : e.values) {
      text += ' ';
      text += format_double(v);
    }
    text += '\n';
  }
  return text;
}

std::vector<EmbeddingEntry> read_embeddings(const std::filesystem::path& path) {
  try {
    return parse_embeddings(read_text_file(path));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::io) throw;
    throw Error(ErrorKind::io, path.string() + ": " + e.what());
  }
}

void write_embeddings(const std::filesystem::path& path, std::span<const EmbeddingEntry> entries) {
  write_text_file(path, format_embeddings(entries));
}

double cosine_score(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && !a.empty(), "cosine_score: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (std::abs(std::sqrt(na) - 1.0) > 1e-4 || std::abs(std::sqrt(nb) - 1.0) > 1e-4)
    fail("cosine_score: inputs must be unit vectors (norms " + format_double(std::sqrt(na)) + ", " +
         format_double(std::sqrt(nb)) + ")");
  return dot;
}

std::filesystem::path resolve_path(const std::string& utt, const std::filesystem::path& base_dir) {
  std::filesystem::path p(utt);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

std::vector<EmbeddingEntry> extract_embeddings(const model::Model& m, std::span<const std::string> utts,
                                               const std::filesystem::path& base_dir, unsigned threads) {
  std::vector<EmbeddingEntry> out(utts.size());
  parallel_for(utts.size(), threads, [&](std::size_t i) {
    dsp::Waveform w;
    try {
      w = dsp::load_wav(resolve_path(utts[i], base_dir));
    } catch (const Error& e) {
      throw Error(e.kind(), "utterance " + std::to_string(i) + " (" + utts[i] + "): " + e.what());
    }
    out[i] = {utts[i], model::extract_embedding(m, w)};
  });
  return out;
}

TrialScores score_trials(const std::map<std::string, std::vector<double>>& embeddings,
                         const TrialList& trials) {
  TrialScores out;
  for (std::size_t i = 0; i < trials.entries.size(); ++i) {
    const Trial& t = trials.entries[i];
    auto a = embeddings.find(t.enroll);
    auto b = embeddings.find(t.test);
    if (a == embeddings.end() || b == embeddings.end())
      fail("trial " + std::to_string(i) + ": no embedding for " + (a == embeddings.end() ? t.enroll : t.test));
    const double s = cosine_score(a->second, b->second);
    out.set.add(s, t.target);
    out.rows.push_back({s, t.enroll, t.test});
  }
  return out;
}

TrialScores score_trials(const model::Model& m, const TrialList& trials,
                         const std::filesystem::path& base_dir, unsigned threads) {
  std::map<std::string, std::size_t> first_use;  // utterance -> first trial index
  std::vector<std::string> utts;
  for (std::size_t i = 0; i < trials.entries.size(); ++i) {
    for (const std::string* u : {&trials.entries[i].enroll, &trials.entries[i].test}) {
      if (first_use.emplace(*u, i).second) utts.push_back(*u);
    }
  }
  std::map<std::string, std::vector<double>> cache;
  std::vector<EmbeddingEntry> embs;
  try {
    embs = extract_embeddings(m, utts, base_dir, threads);
  } catch (const Error& e) {
    // Re-anchor the failure on the first trial that references the utterance.
    const std::string msg = e.what();
    for (const std::string& u : utts) {
      if (msg.find("(" + u + ")") != std::string::npos)
        throw Error(e.kind(), "trial " + std::to_string(first_use[u]) + ": " + msg);
    }
    throw;
  }
  for (EmbeddingEntry& e : embs) cache.emplace(e.utt, std::move(e.values));
  return score_trials(cache, trials);
}

}  // namespace dtsv::eval
