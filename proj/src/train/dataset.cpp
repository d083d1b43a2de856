// SPDX-License-Identifier: Apache-2.0
#include "dtsv/train/dataset.hpp"

#include <map>
#include <set>

#include "dtsv/error.hpp"
#include "dtsv/format.hpp"
#include "dtsv/parallel.hpp"

namespace dtsv::train {

namespace fs = std::filesystem;

Split split_heldout(std::span<const Utterance> utts, std::size_t per_speaker) {
  std::map<int, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < utts.size(); ++i) by_speaker[utts[i].speaker].push_back(i);
  Split s;
  std::vector<std::uint8_t> held(utts.size(), 0);
  for (const auto& [spk, idx] : by_speaker) {
    require(idx.size() > per_speaker, "dataset: speaker " + std::to_string(spk) + " has " +
                                          std::to_string(idx.size()) + " utterances, need more than " +
                                          std::to_string(per_speaker) + " held out");
    for (std::size_t k = idx.size() - per_speaker; k < idx.size(); ++k) held[idx[k]] = 1;
  }
  for (std::size_t i = 0; i < utts.size(); ++i) (held[i] ? s.heldout : s.train).push_back(i);
  return s;
}

eval::TrialList pair_trials(std::span<const Utterance> utts, std::span<const std::size_t> indices) {
  eval::TrialList t;
  for (std::size_t a = 0; a < indices.size(); ++a)
    for (std::size_t b = a + 1; b < indices.size(); ++b) {
      const Utterance& x = utts[indices[a]];
      const Utterance& y = utts[indices[b]];
      t.entries.push_back({x.speaker == y.speaker, x.id, y.id});
    }
  return t;
}

std::size_t count_speakers(std::span<const Utterance> utts) {
  std::set<int> s;
  for (const Utterance& u : utts) s.insert(u.speaker);
  return s.size();
}

namespace {

std::string speaker_token(int s) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "spk%03d", s);
  return buf;
}

std::string wav_name(const Utterance& u) {
  return u.id.ends_with(".wav") ? u.id : u.id + ".wav";
}

}  // namespace

void write_corpus(const fs::path& dir, std::span<const Utterance> utts, std::size_t heldout_per_speaker) {
  const Split split = split_heldout(utts, heldout_per_speaker);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail_io("cannot create " + dir.string() + ": " + ec.message());
  std::string all, train, test;
  for (const Utterance& u : utts) {
    const std::string name = wav_name(u);
    const fs::path p = dir / name;
    fs::create_directories(p.parent_path(), ec);
    if (ec) fail_io("cannot create " + p.parent_path().string() + ": " + ec.message());
    dsp::save_wav(p, u.wave);
    all += name + ' ' + speaker_token(u.speaker) + '\n';
  }
  for (std::size_t i : split.train) train += wav_name(utts[i]) + ' ' + speaker_token(utts[i].speaker) + '\n';
  for (std::size_t i : split.heldout) test += wav_name(utts[i]) + ' ' + speaker_token(utts[i].speaker) + '\n';
  write_text_file(dir / "wav.lst", all);
  write_text_file(dir / "train.lst", train);
  write_text_file(dir / "test.lst", test);

  std::vector<Utterance> named(utts.begin(), utts.end());
  for (Utterance& u : named) u.id = wav_name(u);
  eval::write_trials(dir / "trials.txt", pair_trials(named, split.heldout));
}

std::vector<Utterance> load_list(const fs::path& list_file, unsigned threads) {
  const auto lines = split_lines(read_text_file(list_file));
  std::vector<std::pair<std::string, std::string>> entries;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view t = trim(lines[i]);
    if (t.empty() || t.front() == '#') continue;
    const auto tok = split_whitespace(t);
    if (tok.size() != 2)
      fail_io(list_file.string() + ":" + std::to_string(i + 1) + ": expected '<wav-path> <speaker>'");
    entries.emplace_back(tok[0], tok[1]);
  }
  if (entries.empty()) fail_io(list_file.string() + ": empty list");
  std::map<std::string, int> label_ids;
  for (const auto& e : entries) label_ids.emplace(e.second, 0);
  int next = 0;
  for (auto& [label, id] : label_ids) id = next++;

  const fs::path base = list_file.parent_path();
  std::vector<Utterance> out(entries.size());
  parallel_for(entries.size(), threads, [&](std::size_t i) {
    out[i].id = entries[i].first;
    out[i].speaker = label_ids.at(entries[i].second);
    out[i].wave = dsp::load_wav(eval::resolve_path(entries[i].first, base));
  });
  return out;
}

std::vector<std::string> read_wav_paths(const fs::path& list_file) {
  const auto lines = split_lines(read_text_file(list_file));
  std::vector<std::string> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view t = trim(lines[i]);
    if (t.empty() || t.front() == '#') continue;
    const auto tok = split_whitespace(t);
    if (tok.size() > 2)
      fail_io(list_file.string() + ":" + std::to_string(i + 1) + ": expected '<wav-path> [<speaker>]'");
    out.push_back(tok[0]);
  }
  if (out.empty()) fail_io(list_file.string() + ": empty list");
  return out;
}

}  // namespace dtsv::train
