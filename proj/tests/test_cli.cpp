// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dtsv/cli/cli.hpp"
#include "dtsv/config/run_config.hpp"
#include "dtsv/eval/scoring.hpp"
#include "grad_suite.hpp"
#include "pipeline.hpp"
#include "support.hpp"

using namespace dtsv;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::vector<const char*> argv = {"dtsv"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string small_config_text() {
  config::RunConfig c;
  c.model = testing::tiny_model_config();
  c.model.n_classes = 2;
  c.data.n_speakers = 4;
  c.data.utts_per_speaker = 4;
  c.data.duration_s = 0.3;
  c.data.sample_rate = 8000;
  c.train.epochs = 2;
  c.train.batch_size = 4;
  c.train.heldout_per_speaker = 2;
  c.train.crop_seconds = 0.2;
  c.train.threads = 1;
  return config::serialize_run_config(c);
}

}  // namespace

TEST_CASE("help lists every subcommand and flag") {
  const Result top = run({"--help"});
  CHECK(top.code == 0);
  for (const char* sub : {"synth", "train", "extract", "score", "metrics", "analyze", "flops"}) {
    CHECK(top.out.find(sub) != std::string::npos);
  }
  const Result metrics = run({"metrics", "--help"});
  CHECK(metrics.code == 0);
  for (const char* flag : {"--scores", "--trials", "--p-tar", "--c-fa", "--c-fr", "--det"}) {
    CHECK(metrics.out.find(flag) != std::string::npos);
  }
  CHECK(metrics.out.find("0.01") != std::string::npos);
  const Result train = run({"train", "--help"});
  for (const char* flag : {"--config", "--data", "--out", "--run-dir", "--resume", "--seed", "--threads"}) {
    CHECK(train.out.find(flag) != std::string::npos);
  }
  const Result flops = run({"flops", "--help"});
  CHECK(flops.out.find("--seconds") != std::string::npos);
}

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"metrics"}).code == cli::kExitUsage);
  CHECK(run({"flops", "--seconds", "abc"}).code == cli::kExitUsage);
}

TEST_CASE("metrics on perfectly separated scores") {
  testing::TempDir dir("cli");
  std::ofstream(dir / "scores.txt") << "0.9 a b\n0.8 a c\n0.1 b c\n0.2 c d\n";
  std::ofstream(dir / "trials.txt") << "1 a b\n1 a c\n0 b c\n0 c d\n";
  const Result r = run({"metrics", "--scores", (dir / "scores.txt").string(), "--trials", (dir / "trials.txt").string()});
  CHECK(r.code == 0);
  CHECK(r.out == "EER 0.0000  minDCF 0.0000\n");

  std::ofstream(dir / "labeled.txt") << "# score enroll test label\n0.9 a b 1\n0.1 b c 0\n0.5 c d 1\n0.6 d e 0\n";
  const Result l = run({"metrics", "--scores", (dir / "labeled.txt").string(), "--det", (dir / "det.svg").string()});
  CHECK(l.code == 0);
  CHECK(l.out.rfind("EER 0.5000", 0) == 0);
  CHECK(std::filesystem::exists(dir / "det.svg"));

  std::ofstream(dir / "mismatch.txt") << "1 a b\n";
  CHECK(run({"metrics", "--scores", (dir / "scores.txt").string(), "--trials", (dir / "mismatch.txt").string()}).code ==
        cli::kExitUsage);
}

TEST_CASE("I/O and numeric failures map to exit codes 2 and 3") {
  testing::TempDir dir("cli");
  const Result missing = run({"metrics", "--scores", (dir / "none.txt").string()});
  CHECK(missing.code == cli::kExitIo);
  CHECK(missing.err.find("none.txt") != std::string::npos);
  std::ofstream(dir / "nan.txt") << "0.5 a b 1\nnan a c 0\n";
  const Result nan = run({"metrics", "--scores", (dir / "nan.txt").string()});
  CHECK(nan.code == cli::kExitNumeric);
  CHECK(nan.err.find("nan.txt:2") != std::string::npos);
  std::ofstream(dir / "bad.ckpt") << "garbage";
  CHECK(run({"score", "--ckpt", (dir / "bad.ckpt").string(), "--trials", (dir / "nan.txt").string(), "--out",
             (dir / "s.txt").string()})
            .code == cli::kExitIo);
}

TEST_CASE("train rejects an unknown config key") {
  testing::TempDir dir("cli");
  std::ofstream(dir / "bad.cfg") << "[train]\nlr = 0.001\nlearning_rate = 0.1\n";
  const Result r = run({"train", "--config", (dir / "bad.cfg").string(), "--data", dir.path().string(), "--out",
                        (dir / "m.ckpt").string()});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("train.learning_rate") != std::string::npos);
  CHECK(r.err.find("bad.cfg:3") != std::string::npos);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}

TEST_CASE("flops reports compute and parameters for a preset") {
  const std::string cfg = std::string(DTSV_SOURCE_DIR) + "/configs/dtsv-light.cfg";
  const Result r = run({"flops", "--config", cfg, "--seconds", "2"});
  CHECK(r.code == 0);
  CHECK(r.out.find("GFLOPs") != std::string::npos);
  CHECK(r.out.find("params") != std::string::npos);
}

TEST_CASE("the binary reports exit codes through the process status") {
  testing::TempDir dir("cli");
  CHECK(testing::run_cli("--help", dir / "o", dir / "e") == 0);
  CHECK(testing::run_cli("bogus", dir / "o", dir / "e") == 1);
  CHECK(testing::run_cli("metrics --scores " + testing::quoted(dir / "none"), dir / "o", dir / "e") == 2);
}

TEST_CASE("pipeline outputs are identical across same-seed runs") {
  testing::TempDir dir("cli");
  std::ofstream(dir / "small.cfg") << small_config_text();
  const testing::PipelineRun a = testing::run_pipeline(dir / "a", dir / "small.cfg");
  REQUIRE_MESSAGE(a.ok, a.failed_step);
  const testing::PipelineRun b = testing::run_pipeline(dir / "b", dir / "small.cfg");
  REQUIRE_MESSAGE(b.ok, b.failed_step);
  const auto fa = testing::pipeline_outputs(dir / "a"), fb = testing::pipeline_outputs(dir / "b");
  REQUIRE(fa.size() == fb.size());
  for (std::size_t i = 0; i < fa.size(); ++i) {
    CHECK(fa[i].first == fb[i].first);
    CHECK_MESSAGE(fa[i].second == fb[i].second, fa[i].first);
  }
  for (const char* f : {"model.ckpt", "scores.txt", "embeddings.txt", "metrics.out", "analysis/attention_distance.csv",
                        "analysis/attention_distance.svg", "corpus/trials.txt", "model.ckpt.run/metrics.csv"}) {
    CHECK_MESSAGE(std::filesystem::exists(dir / "a" / f), f);
  }
  CHECK(testing::read_file(dir / "a" / "metrics.out").rfind("EER ", 0) == 0);

  // Embedding files re-serialize byte-identically.
  const std::string emb = testing::read_file(dir / "a" / "embeddings.txt");
  CHECK(eval::format_embeddings(eval::parse_embeddings(emb)) == emb);

  // A different DTSV_SEED changes the corpus.
  const testing::PipelineRun c = testing::run_pipeline(dir / "c", dir / "small.cfg", "DTSV_SEED=99");
  REQUIRE_MESSAGE(c.ok, c.failed_step);
  CHECK(testing::read_file(dir / "c" / "model.ckpt") != testing::read_file(dir / "a" / "model.ckpt"));
}
