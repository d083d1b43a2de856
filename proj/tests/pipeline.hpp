// SPDX-License-Identifier: Apache-2.0
//
// Drives the real command-line binary through synth -> train -> extract ->
// score -> metrics -> analyze. Shared by the CLI tests and the acceptance
// binary.
#pragma once

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace dtsv::testing {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

// Runs `dtsv <args>` with stdout and stderr redirected; returns the exit code.
inline int run_cli(const std::string& args, const std::filesystem::path& out, const std::filesystem::path& err,
                   const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + quoted(DTSV_CLI_PATH) + " " + args + " > " +
                          quoted(out) + " 2> " + quoted(err);
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct PipelineRun {
  bool ok = false;
  std::string failed_step;
  std::filesystem::path dir;
};

// Every file the pipeline writes, as (relative path, bytes). Console logs
// are skipped since they echo output paths and timings; the metrics
// summary is kept because it is the metrics command's only output.
inline std::vector<std::pair<std::string, std::string>> pipeline_outputs(const std::filesystem::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = std::filesystem::relative(e.path(), dir).string();
    if ((rel.ends_with(".out") && rel != "metrics.out") || rel.ends_with(".err")) continue;
    out.emplace_back(rel, read_file(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline PipelineRun run_pipeline(const std::filesystem::path& dir, const std::filesystem::path& config,
                                const std::string& env = "") {
  PipelineRun r;
  r.dir = dir;
  std::filesystem::create_directories(dir);
  const auto corpus = dir / "corpus";
  const std::string cfg = "--config " + quoted(config);
  const std::vector<std::pair<std::string, std::string>> steps = {
      {"synth", "synth --spec " + quoted(config) + " --out " + quoted(corpus)},
      {"train", "train " + cfg + " --data " + quoted(corpus) + " --out " + quoted(dir / "model.ckpt")},
      {"extract", "extract --ckpt " + quoted(dir / "model.ckpt") + " --wav-list " + quoted(corpus / "test.lst") +
                      " --out " + quoted(dir / "embeddings.txt")},
      {"score", "score --ckpt " + quoted(dir / "model.ckpt") + " --trials " + quoted(corpus / "trials.txt") +
                    " --out " + quoted(dir / "scores.txt")},
      {"metrics", "metrics --scores " + quoted(dir / "scores.txt") + " --trials " + quoted(corpus / "trials.txt") +
                      " --det " + quoted(dir / "det.svg")},
      {"analyze", "analyze --ckpt " + quoted(dir / "model.ckpt") + " --wav-list " + quoted(corpus / "test.lst") +
                      " --out " + quoted(dir / "analysis")},
  };
  for (const auto& [name, args] : steps) {
    if (run_cli(args, dir / (name + ".out"), dir / (name + ".err"), env) != 0) {
      r.failed_step = name + ": " + read_file(dir / (name + ".err"));
      return r;
    }
  }
  r.ok = true;
  return r;
}

}  // namespace dtsv::testing
