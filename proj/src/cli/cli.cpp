// SPDX-License-Identifier: Apache-2.0
#include "dtsv/cli/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "dtsv/config/run_config.hpp"
#include "dtsv/error.hpp"
#include "dtsv/eval/attention_distance.hpp"
#include "dtsv/eval/flops.hpp"
#include "dtsv/eval/metrics.hpp"
#include "dtsv/eval/scoring.hpp"
#include "dtsv/format.hpp"
#include "dtsv/parallel.hpp"
#include "dtsv/train/checkpoint.hpp"
#include "dtsv/train/dataset.hpp"
#include "dtsv/train/synth.hpp"
#include "dtsv/train/trainer.hpp"

namespace dtsv::cli {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

config::RunConfig load_config_with_seed(const std::string& path, std::optional<std::uint64_t> seed_flag) {
  config::RunConfig cfg = path.empty() ? config::RunConfig{} : config::load_run_config(path);
  if (seed_flag) {
    config::apply_seed(cfg, *seed_flag);
  } else if (const auto env = config::seed_from_env()) {
    config::apply_seed(cfg, *env);
  }
  return cfg;
}

struct SynthArgs {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  config::RunConfig cfg = load_config_with_seed(a.spec, a.seed);
  cfg.data.validate(cfg.model.frontend.frame_len);
  const auto utts = train::synth_dataset(cfg.data, resolve_threads(a.threads));
  train::write_corpus(a.out, utts, cfg.train.heldout_per_speaker);
  out << "wrote " << utts.size() << " utterances from " << cfg.data.n_speakers << " speakers to " << a.out << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string run_dir;
  std::string resume;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  config::RunConfig cfg = load_config_with_seed(a.config, a.seed);
  if (a.threads) cfg.train.threads = *a.threads;
  fs::path list = a.data;
  if (fs::is_directory(list)) list /= "wav.lst";
  const auto utts = train::load_list(list, resolve_threads(cfg.train.threads));
  const std::size_t speakers = train::count_speakers(utts);
  if (cfg.n_classes == 0) cfg.n_classes = speakers;
  require(cfg.n_classes >= speakers, "config: classes (" + std::to_string(cfg.n_classes) +
                                         ") is smaller than the " + std::to_string(speakers) +
                                         " speakers in " + list.string());
  cfg.model.n_classes = cfg.n_classes;
  cfg.validate();

  std::optional<train::Checkpoint> resume;
  if (!a.resume.empty()) resume = train::load_checkpoint(a.resume);
  model::Model m = model::build_model(cfg.model, cfg.model_seed);

  train::TrainOptions opts;
  opts.out_dir = a.run_dir.empty() ? fs::path(a.out + ".run") : fs::path(a.run_dir);
  opts.config_text = config::serialize_run_config(cfg);
  opts.resume = resume ? &*resume : nullptr;
  opts.on_epoch = [&](const train::EpochSummary& s) {
    out << "epoch " << s.epoch << "  lr " << format_double(s.lr) << "  loss " << fixed(s.total, 4) << "  class "
        << fixed(s.classification, 4) << "  diffluence " << fixed(s.diffluence, 4) << "  acc "
        << fixed(s.accuracy, 3) << "  heldout EER " << fixed(s.heldout_eer, 4) << (s.best ? "  *" : "")
        << "  (" << fixed(s.seconds, 1) << " s)\n";
    out.flush();
  };
  train::TrainResult r = train::train(m, utts, cfg.train, opts);
  const fs::path best = opts.out_dir / "best.ckpt";
  if (fs::exists(best)) {
    write_text_file(a.out, read_text_file(best));
  } else {
    train::save_checkpoint(a.out, r.last);
  }
  out << "best epoch " << r.last.progress.best_epoch << "  heldout EER " << fixed(r.last.progress.best_eer, 4)
      << "\nwrote " << a.out << " (run files in " << opts.out_dir.string() << ")\n";
  return kExitOk;
}

struct ExtractArgs {
  std::string ckpt;
  std::string wav_list;
  std::string out;
  unsigned threads = 0;
};

int cmd_extract(const ExtractArgs& a, std::ostream& out) {
  const model::Model m = train::model_from_checkpoint(train::load_checkpoint(a.ckpt));
  const auto paths = train::read_wav_paths(a.wav_list);
  const auto embs = eval::extract_embeddings(m, paths, fs::path(a.wav_list).parent_path(), resolve_threads(a.threads));
  eval::write_embeddings(a.out, embs);
  out << "wrote " << embs.size() << " embeddings of dimension " << m.config.model_dim << " to " << a.out << "\n";
  return kExitOk;
}

struct ScoreArgs {
  std::string ckpt;
  std::string trials;
  std::string out;
  unsigned threads = 0;
};

int cmd_score(const ScoreArgs& a, std::ostream& out) {
  const model::Model m = train::model_from_checkpoint(train::load_checkpoint(a.ckpt));
  const eval::TrialList trials = eval::read_trials(a.trials);
  const eval::TrialScores s =
      eval::score_trials(m, trials, fs::path(a.trials).parent_path(), resolve_threads(a.threads));
  eval::write_scores(a.out, s.rows);
  out << "scored " << s.rows.size() << " trials to " << a.out << "\n";
  return kExitOk;
}

struct MetricsArgs {
  std::string scores;
  std::string trials;
  double p_tar = 0.01;
  double c_fa = 1.0;
  double c_fr = 1.0;
  std::string det;
};

// Without a trial list, every score line carries its label as a fourth
// column: <score> <enroll> <test> <0|1>.
eval::ScoreSet labeled_scores(const std::string& path) {
  eval::ScoreSet set;
  const auto lines = split_lines(read_text_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tok = split_whitespace(lines[i]);
    if (tok.empty() || tok[0].front() == '#') continue;
    const std::string where = path + ":" + std::to_string(i + 1);
    if (tok.size() != 4 || (tok[3] != "0" && tok[3] != "1")) {
      fail_io(where + ": expected '<score> <enroll> <test> <0|1>' (or pass --trials)");
    }
    double v = 0.0;
    try {
      v = parse_double(tok[0], "score");
    } catch (const Error& e) {
      fail_io(where + ": " + e.what());
    }
    if (!std::isfinite(v)) fail_numeric(where + ": non-finite score");
    set.add(v, tok[3] == "1");
  }
  return set;
}

int cmd_metrics(const MetricsArgs& a, std::ostream& out) {
  eval::ScoreSet set;
  if (a.trials.empty()) {
    set = labeled_scores(a.scores);
  } else {
    const auto scores = eval::read_scores(a.scores);
    const eval::TrialList trials = eval::read_trials(a.trials);
    require(scores.size() == trials.entries.size(),
            a.scores + " has " + std::to_string(scores.size()) + " scores but " + a.trials + " has " +
                std::to_string(trials.entries.size()) + " trials");
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const eval::Trial& t = trials.entries[i];
      require(scores[i].enroll == t.enroll && scores[i].test == t.test,
              a.scores + ":" + std::to_string(i + 1) + ": pair does not match trial line " + std::to_string(i + 1));
      set.add(scores[i].score, t.target);
    }
  }
  const eval::DcfParams p{a.p_tar, a.c_fa, a.c_fr};
  const eval::MetricResult r = eval::compute_metrics(set, p);
  if (!a.det.empty()) eval::write_det_svg(a.det, set);
  out << "EER " << fixed(r.eer, 4) << "  minDCF " << fixed(r.min_dcf, 4) << "\n";
  return kExitOk;
}

struct AnalyzeArgs {
  std::string ckpt;
  std::string wav_list;
  std::string out;
  std::string distance = "kl";
  unsigned threads = 0;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  const model::Model m = train::model_from_checkpoint(train::load_checkpoint(a.ckpt));
  const auto paths = train::read_wav_paths(a.wav_list);
  const fs::path base = fs::path(a.wav_list).parent_path();
  std::vector<dsp::Waveform> waves(paths.size());
  parallel_for(paths.size(), resolve_threads(a.threads),
               [&](std::size_t i) { waves[i] = dsp::load_wav(eval::resolve_path(paths[i], base)); });
  const eval::DistanceKind kind = a.distance == "cosine" ? eval::DistanceKind::cosine : eval::DistanceKind::kl;
  const eval::AttentionDistanceReport r = eval::attention_distance(m, waves, kind, resolve_threads(a.threads));
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) fail_io("cannot create " + a.out + ": " + ec.message());
  eval::write_attention_csv(fs::path(a.out) / "attention_distance.csv", r);
  eval::write_attention_svg(fs::path(a.out) / "attention_distance.svg", r);
  for (std::size_t l = 0; l < r.layers; ++l) {
    out << "layer " << l + 1 << ":";
    for (std::size_t h = 0; h < r.heads; ++h) out << ' ' << fixed(r.at(l, h), 4);
    out << "\n";
  }
  out << "wrote attention_distance.csv and attention_distance.svg to " << a.out << "\n";
  return kExitOk;
}

struct FlopsArgs {
  std::string config;
  double seconds = 2.0;
};

int cmd_flops(const FlopsArgs& a, std::ostream& out) {
  config::RunConfig cfg = load_config_with_seed(a.config, std::nullopt);
  cfg.model.n_classes = cfg.n_classes > 0 ? cfg.n_classes : cfg.data.n_speakers;
  const eval::FlopsBreakdown f = eval::flops_estimate(cfg.model, a.seconds);
  const model::ParamCount pc = model::count_params(cfg.model);
  out << "frames " << f.frames << " (" << format_double(a.seconds) << " s)\n";
  auto line = [&](const char* name, double v) { out << "  " << name << ' ' << fixed(v * 1e-9, 6) << " GFLOPs\n"; };
  line("tdfe_conv ", f.tdfe_conv);
  line("tdfe_fc   ", f.tdfe_fc);
  line("input_proj", f.input_proj);
  line("qkvo      ", f.qkvo);
  line("attention ", f.attention);
  line("mlp       ", f.mlp);
  line("classifier", f.classifier);
  out << "GFLOPs " << fixed(f.gflops(), 6) << "\n";
  out << "params " << pc.total << " (without classifier " << pc.without_classifier() << ")\n";
  for (const auto& [name, n] : pc.by_submodule) out << "  " << name << ' ' << n << "\n";
  return kExitOk;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return kExitUsage;
    case ErrorKind::io: return kExitIo;
    case ErrorKind::numeric: return kExitNumeric;
  }
  return kExitUsage;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Speaker verification with a learnable time-domain frontend and a Transformer encoder", "dtsv"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic multi-speaker corpus");
  s->add_option("--spec", synth.spec, "Run config; its [data] section describes the corpus (built-in defaults when omitted)")
      ->capture_default_str();
  s->add_option("--out", synth.out, "Output corpus directory")->required();
  s->add_option("--seed", synth.seed, "Seed override (takes precedence over DTSV_SEED and the config)");
  s->add_option("--threads", synth.threads, "Worker threads (0 = all cores)")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model on a corpus directory or list file");
  t->add_option("--config", tr.config, "Run config file (built-in defaults when omitted)")->capture_default_str();
  t->add_option("--data", tr.data, "Corpus directory (uses wav.lst) or a '<wav> <speaker>' list file")->required();
  t->add_option("--out", tr.out, "Checkpoint to write (best epoch by held-out EER)")->required();
  t->add_option("--run-dir", tr.run_dir, "Directory for per-epoch checkpoints and logs (default: <out>.run)")
      ->capture_default_str();
  t->add_option("--resume", tr.resume, "Resume from an epoch checkpoint")->capture_default_str();
  t->add_option("--seed", tr.seed, "Seed override (takes precedence over DTSV_SEED and the config)");
  t->add_option("--threads", tr.threads, "Worker threads, overrides [train] threads (0 = all cores)");

  ExtractArgs ex;
  auto* e = app.add_subcommand("extract", "Write unit-norm utterance embeddings");
  e->add_option("--ckpt", ex.ckpt, "Model checkpoint")->required();
  e->add_option("--wav-list", ex.wav_list, "List of WAV paths, one per line")->required();
  e->add_option("--out", ex.out, "Embeddings file")->required();
  e->add_option("--threads", ex.threads, "Worker threads (0 = all cores)")->capture_default_str();

  ScoreArgs sc;
  auto* c = app.add_subcommand("score", "Score a trial list with cosine similarity");
  c->add_option("--ckpt", sc.ckpt, "Model checkpoint")->required();
  c->add_option("--trials", sc.trials, "Trial list '<0|1> <enroll> <test>'")->required();
  c->add_option("--out", sc.out, "Score file")->required();
  c->add_option("--threads", sc.threads, "Worker threads (0 = all cores)")->capture_default_str();

  MetricsArgs me;
  auto* mt = app.add_subcommand("metrics", "Compute EER and minDCF from a score file");
  mt->add_option("--scores", me.scores, "Score file '<score> <enroll> <test>'")->required();
  mt->add_option("--trials", me.trials,
                 "Trial list supplying the labels, line-aligned with the scores (otherwise a fourth 0|1 column)")
      ->capture_default_str();
  mt->add_option("--p-tar", me.p_tar, "Target prior")->capture_default_str();
  mt->add_option("--c-fa", me.c_fa, "False acceptance cost")->capture_default_str();
  mt->add_option("--c-fr", me.c_fr, "False rejection cost")->capture_default_str();
  mt->add_option("--det", me.det, "Also write a DET curve SVG here")->capture_default_str();

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "Per-layer, per-head attention distance report");
  a->add_option("--ckpt", an.ckpt, "Model checkpoint")->required();
  a->add_option("--wav-list", an.wav_list, "List of WAV paths")->required();
  a->add_option("--out", an.out, "Report directory")->required();
  a->add_option("--distance", an.distance, "Distance: kl or cosine")
      ->check(CLI::IsMember({"kl", "cosine"}))
      ->capture_default_str();
  a->add_option("--threads", an.threads, "Worker threads (0 = all cores)")->capture_default_str();

  FlopsArgs fl;
  auto* f = app.add_subcommand("flops", "Closed-form compute and parameter count");
  f->add_option("--config", fl.config, "Run config file (built-in defaults when omitted)")->capture_default_str();
  f->add_option("--seconds", fl.seconds, "Input duration in seconds")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& pe) {
    // Subcommand --help surfaces here as well.
    if (pe.get_exit_code() == 0) {
      const CLI::App* sub = nullptr;
      for (const CLI::App* cand : app.get_subcommands()) sub = cand;
      out << (sub ? sub->help() : app.help());
      return kExitOk;
    }
    err << "dtsv: " << pe.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*s) return cmd_synth(synth, out);
    if (*t) return cmd_train(tr, out);
    if (*e) return cmd_extract(ex, out);
    if (*c) return cmd_score(sc, out);
    if (*mt) return cmd_metrics(me, out);
    if (*a) return cmd_analyze(an, out);
    if (*f) return cmd_flops(fl, out);
  } catch (const Error& ex_) {
    err << "dtsv: " << ex_.what() << "\n";
    return exit_code(ex_.kind());
  } catch (const std::exception& ex_) {
    err << "dtsv: " << ex_.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace dtsv::cli
