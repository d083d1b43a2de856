// SPDX-License-Identifier: Apache-2.0
#include "dtsv/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>

#include "dtsv/autodiff/ops.hpp"
#include "dtsv/error.hpp"
#include "dtsv/eval/metrics.hpp"
#include "dtsv/eval/scoring.hpp"
#include "dtsv/format.hpp"
#include "dtsv/parallel.hpp"
#include "dtsv/train/dataset.hpp"

namespace dtsv::train {

namespace fs = std::filesystem;

std::string metrics_header(std::size_t layers) {
  std::string h = "step,epoch,lr,total,class,diffluence,accuracy";
  for (std::size_t l = 0; l < layers; ++l) h += ",diffluence_l" + std::to_string(l);
  return h;
}

std::string format_metrics_row(const MetricsRow& r) {
  std::string s = std::to_string(r.step) + ',' + std::to_string(r.epoch) + ',' + format_double(r.lr) + ',' +
                  format_double(r.loss.total) + ',' + format_double(r.loss.classification) + ',' +
                  format_double(r.loss.diffluence) + ',' + format_double(r.accuracy);
  for (double v : r.loss.per_layer) s += ',' + format_double(v);
  return s;
}

std::vector<MetricsRow> parse_metrics_log(const std::string& text) {
  const auto lines = split_lines(text);
  require(!lines.empty() && lines[0].starts_with("step,epoch,lr,total,class,diffluence"),
          "metrics log: missing header");
  std::vector<MetricsRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    std::vector<std::string> f;
    std::size_t b = 0;
    for (;;) {
      const std::size_t e = lines[i].find(',', b);
      f.push_back(lines[i].substr(b, e == std::string::npos ? std::string::npos : e - b));
      if (e == std::string::npos) break;
      b = e + 1;
    }
    require(f.size() >= 7, "metrics log line " + std::to_string(i + 1) + ": too few columns");
    MetricsRow r;
    r.step = static_cast<std::uint64_t>(parse_int(f[0], "step"));
    r.epoch = static_cast<std::size_t>(parse_int(f[1], "epoch"));
    r.lr = parse_double(f[2], "lr");
    r.loss.total = parse_double(f[3], "total");
    r.loss.classification = parse_double(f[4], "class");
    r.loss.diffluence = parse_double(f[5], "diffluence");
    r.accuracy = parse_double(f[6], "accuracy");
    for (std::size_t k = 7; k < f.size(); ++k) r.loss.per_layer.push_back(parse_double(f[k], "diffluence"));
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string epoch_summary_header() {
  return "epoch,lr,total,class,diffluence,accuracy,heldout_eer,heldout_min_dcf,best";
}

std::string format_epoch_summary(const EpochSummary& s) {
  return std::to_string(s.epoch) + ',' + format_double(s.lr) + ',' + format_double(s.total) + ',' +
         format_double(s.classification) + ',' + format_double(s.diffluence) + ',' + format_double(s.accuracy) +
         ',' + format_double(s.heldout_eer) + ',' + format_double(s.heldout_min_dcf) + ',' + (s.best ? "1" : "0");
}

HeldoutResult evaluate_pairs(const model::Model& m, std::span<const Utterance> data,
                             std::span<const std::size_t> indices, unsigned threads) {
  std::vector<std::vector<double>> emb(indices.size());
  parallel_for(indices.size(), threads,
               [&](std::size_t i) { emb[i] = model::extract_embedding(m, data[indices[i]].wave); });
  eval::ScoreSet s;
  for (std::size_t a = 0; a < indices.size(); ++a)
    for (std::size_t b = a + 1; b < indices.size(); ++b)
      s.add(eval::cosine_score(emb[a], emb[b]), data[indices[a]].speaker == data[indices[b]].speaker);
  const eval::MetricResult r = eval::compute_metrics(s);
  return {r.eer, r.min_dcf, s.size()};
}

namespace {

struct SampleResult {
  std::unique_ptr<ad::Graph> graph;
  double total = 0.0;
  double classification = 0.0;
  double diffluence = 0.0;
  std::vector<double> per_layer;
  bool correct = false;
};

SampleResult run_sample(const model::Model& m, const Utterance& u, const TrainConfig& cfg, Rng rng,
                        std::size_t crop) {
  dsp::Waveform w;
  w.sample_rate = u.wave.sample_rate;
  std::size_t off = 0;
  std::size_t len = u.wave.size();
  if (len > crop) {
    off = static_cast<std::size_t>(rng.uniform_int(len - crop + 1));
    len = crop;
  }
  w.samples.assign(u.wave.samples.begin() + static_cast<std::ptrdiff_t>(off),
                   u.wave.samples.begin() + static_cast<std::ptrdiff_t>(off + len));
  w = augment_waveform(w, cfg.augment, rng);

  const dsp::FbankConfig& fc = m.config.frontend;
  ad::Tensor mask;
  model::ForwardOptions fo;
  fo.track_grads = true;
  if (cfg.augment.specaug.enabled) {
    mask = specaugment_mask(dsp::num_frames(w.size(), fc.frame_len, fc.hop), fc.n_mels, cfg.augment.specaug, rng);
    fo.feature_mask = &mask;
  }

  SampleResult r;
  r.graph = std::make_unique<ad::Graph>();
  ad::Graph& g = *r.graph;
  const model::ForwardVars v = model::forward_graph(g, m, w, fo);
  const int label[] = {u.speaker};
  const ad::Var lc = losses::aam_from_cosines(v.cosines, label, cfg.loss.scale, cfg.loss.margin);
  ad::Var loss = lc;
  if (cfg.loss.variant != losses::DiffluenceVariant::none) {
    const losses::DiffluenceVars dv = losses::diffluence(v.hidden, cfg.loss);
    loss = losses::total_loss(lc, dv.value, cfg.loss);
    r.diffluence = dv.value.value()[0];
    for (ad::Var t : dv.per_layer) r.per_layer.push_back(t.value()[0]);
  } else {
    r.per_layer.assign(v.hidden.size(), 0.0);
  }
  r.classification = lc.value()[0];
  r.total = loss.value()[0];
  const auto cos = v.cosines.value().values();
  r.correct = static_cast<int>(std::max_element(cos.begin(), cos.end()) - cos.begin()) == u.speaker;
  g.backward(loss);
  return r;
}

void write_log_files(const fs::path& dir, std::size_t layers, const std::vector<MetricsRow>& rows,
                     const std::vector<EpochSummary>& epochs) {
  std::string m = metrics_header(layers) + '\n';
  for (const MetricsRow& r : rows) m += format_metrics_row(r) + '\n';
  write_text_file(dir / "metrics.csv", m);
  std::string e = epoch_summary_header() + '\n';
  for (const EpochSummary& s : epochs) e += format_epoch_summary(s) + '\n';
  write_text_file(dir / "epochs.csv", e);
}

std::string epoch_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch-%03zu.ckpt", epoch);
  return buf;
}

}  // namespace

TrainResult train(model::Model& m, std::span<const Utterance> data, const TrainConfig& cfg,
                  const TrainOptions& opts) {
  cfg.validate();
  require(!data.empty(), "train: empty dataset");
  require(count_speakers(data) >= 2, "train: need at least two speakers");
  const int fs_model = m.config.frontend.sample_rate;
  for (const Utterance& u : data) {
    require(u.speaker >= 0 && static_cast<std::size_t>(u.speaker) < m.config.n_classes,
            "train: speaker id " + std::to_string(u.speaker) + " outside the " +
                std::to_string(m.config.n_classes) + " model classes");
    require(u.wave.sample_rate == fs_model, "train: " + u.id + " has sample rate " +
                                                std::to_string(u.wave.sample_rate) + ", model expects " +
                                                std::to_string(fs_model));
  }
  const Split split = split_heldout(data, cfg.heldout_per_speaker);
  require(!split.train.empty(), "train: no training utterances after the held-out split");

  const unsigned threads = resolve_threads(cfg.threads);
  const auto crop = static_cast<std::size_t>(std::llround(cfg.crop_seconds * fs_model));
  std::size_t shortest = crop;
  for (std::size_t i : split.train) shortest = std::min(shortest, data[i].wave.size());
  const dsp::FbankConfig& fc = m.config.frontend;
  require(shortest >= fc.frame_len, "train: training utterances shorter than one frame");
  cfg.augment.validate(dsp::num_frames(shortest, fc.frame_len, fc.hop), fc.n_mels);

  std::vector<ad::Parameter*> params = m.parameters();
  std::vector<std::uint8_t> active(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) active[i] = m.is_trainable(*params[i]) ? 1 : 0;

  AdamState adam;
  Rng shuffle(derive_seed(cfg.seed, 0x7368756666ULL));
  TrainProgress progress;
  std::vector<MetricsRow> prior_rows;
  std::vector<EpochSummary> prior_epochs;
  if (opts.resume != nullptr) {
    apply_checkpoint(*opts.resume, m);
    adam = opts.resume->adam;
    shuffle.set_state(opts.resume->rng_state);
    progress = opts.resume->progress;
    if (!opts.out_dir.empty() && fs::exists(opts.out_dir / "metrics.csv")) {
      for (MetricsRow& r : parse_metrics_log(read_text_file(opts.out_dir / "metrics.csv")))
        if (r.step <= progress.global_step) prior_rows.push_back(std::move(r));
    }
    if (!opts.out_dir.empty() && fs::exists(opts.out_dir / "epochs.csv")) {
      const auto lines = split_lines(read_text_file(opts.out_dir / "epochs.csv"));
      for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto comma = lines[i].find(',');
        if (comma == std::string::npos) continue;
        EpochSummary s;
        s.epoch = static_cast<std::size_t>(parse_int(lines[i].substr(0, comma), "epoch"));
        if (s.epoch >= progress.epoch) continue;
        // Keep the original text by reparsing each column.
        std::vector<std::string> f;
        std::size_t b = 0;
        for (;;) {
          const std::size_t e = lines[i].find(',', b);
          f.push_back(lines[i].substr(b, e == std::string::npos ? std::string::npos : e - b));
          if (e == std::string::npos) break;
          b = e + 1;
        }
        require(f.size() == 9, "epochs.csv: malformed line " + std::to_string(i + 1));
        s.lr = parse_double(f[1]);
        s.total = parse_double(f[2]);
        s.classification = parse_double(f[3]);
        s.diffluence = parse_double(f[4]);
        s.accuracy = parse_double(f[5]);
        s.heldout_eer = f[6] == "nan" ? std::nan("") : parse_double(f[6]);
        s.heldout_min_dcf = f[7] == "nan" ? std::nan("") : parse_double(f[7]);
        s.best = f[8] == "1";
        prior_epochs.push_back(s);
      }
    }
  }
  if (!opts.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(opts.out_dir, ec);
    if (ec) fail_io("cannot create " + opts.out_dir.string() + ": " + ec.message());
  }

  const std::uint64_t aug_key = mix64(cfg.augment.seed ^ 0x617567ULL);
  TrainResult result;
  std::size_t ran = 0;
  for (std::size_t epoch = progress.epoch; epoch < cfg.epochs && ran < opts.max_epochs; ++epoch, ++ran) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_at(epoch, cfg);
    std::vector<std::size_t> order = split.train;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(i))]);

    EpochSummary summary;
    summary.epoch = epoch;
    summary.lr = lr;
    std::size_t n_seen = 0, n_correct = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t bn = std::min(cfg.batch_size, order.size() - b0);
      for (ad::Parameter* p : params) p->zero_grad();
      MetricsRow row;
      row.step = progress.global_step + 1;
      row.epoch = epoch;
      row.lr = lr;
      row.loss.per_layer.assign(m.layers.size(), 0.0);
      std::size_t correct = 0;
      for (std::size_t c0 = 0; c0 < bn; c0 += threads) {
        const std::size_t cn = std::min<std::size_t>(threads, bn - c0);
        std::vector<SampleResult> chunk(cn);
        try {
          parallel_for(cn, threads, [&](std::size_t k) {
            const std::size_t pos = b0 + c0 + k;
            Rng rng(derive_seed(cfg.seed ^ aug_key, epoch, pos));
            chunk[k] = run_sample(m, data[order[pos]], cfg, rng, crop);
          });
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::numeric) throw;
          fail_numeric("step " + std::to_string(row.step) + ": " + e.what());
        }
        for (SampleResult& s : chunk) {
          for (std::size_t i = 0; i < params.size(); ++i) {
            if (!active[i]) continue;
            if (const ad::Tensor* gp = s.graph->param_grad(*params[i])) {
              double* dst = params[i]->grad.data();
              const double* src = gp->data();
              for (std::size_t k = 0; k < gp->size(); ++k) dst[k] += src[k];
            }
          }
          row.loss.total += s.total;
          row.loss.classification += s.classification;
          row.loss.diffluence += s.diffluence;
          for (std::size_t l = 0; l < s.per_layer.size(); ++l) row.loss.per_layer[l] += s.per_layer[l];
          correct += s.correct ? 1 : 0;
          s.graph.reset();
        }
      }
      const double inv = 1.0 / static_cast<double>(bn);
      for (std::size_t i = 0; i < params.size(); ++i)
        if (active[i])
          for (double& g : params[i]->grad.values()) g *= inv;
      row.loss.total *= inv;
      row.loss.classification *= inv;
      row.loss.diffluence *= inv;
      for (double& v : row.loss.per_layer) v *= inv;
      row.accuracy = static_cast<double>(correct) * inv;
      if (!std::isfinite(row.loss.total))
        fail_numeric("step " + std::to_string(row.step) + ": non-finite loss");

      adam_step(params, adam, lr, cfg.weight_decay, cfg.adam, active);
      progress.global_step = row.step;

      summary.total += row.loss.total * static_cast<double>(bn);
      summary.classification += row.loss.classification * static_cast<double>(bn);
      summary.diffluence += row.loss.diffluence * static_cast<double>(bn);
      n_seen += bn;
      n_correct += correct;
      result.log.push_back(std::move(row));
    }
    for (ad::Parameter* p : params) p->zero_grad();
    summary.total /= static_cast<double>(n_seen);
    summary.classification /= static_cast<double>(n_seen);
    summary.diffluence /= static_cast<double>(n_seen);
    summary.accuracy = static_cast<double>(n_correct) / static_cast<double>(n_seen);

    summary.heldout_eer = std::nan("");
    summary.heldout_min_dcf = std::nan("");
    if (!split.heldout.empty()) {
      const HeldoutResult h = evaluate_pairs(m, data, split.heldout, threads);
      summary.heldout_eer = h.eer;
      summary.heldout_min_dcf = h.min_dcf;
      progress.last_eer = h.eer;
      if (h.eer < progress.best_eer) {
        progress.best_eer = h.eer;
        progress.best_epoch = epoch;
        summary.best = true;
      }
    } else if (!std::isfinite(progress.best_eer)) {
      // Nothing to rank by: the latest epoch stands in for the best.
      summary.best = true;
      progress.best_epoch = epoch;
    }
    progress.epoch = epoch + 1;

    Checkpoint ck = make_checkpoint(m, opts.config_text);
    ck.adam = adam;
    ck.rng_state = shuffle.state();
    ck.progress = progress;
    if (summary.best) result.best = ck;
    summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epochs.push_back(summary);

    if (!opts.out_dir.empty()) {
      save_checkpoint(opts.out_dir / epoch_name(epoch), ck);
      if (summary.best) save_checkpoint(opts.out_dir / "best.ckpt", ck);
      std::vector<MetricsRow> rows = prior_rows;
      rows.insert(rows.end(), result.log.begin(), result.log.end());
      std::vector<EpochSummary> eps = prior_epochs;
      eps.insert(eps.end(), result.epochs.begin(), result.epochs.end());
      write_log_files(opts.out_dir, m.layers.size(), rows, eps);
    }
    result.last = std::move(ck);
    if (opts.on_epoch) opts.on_epoch(summary);
  }
  if (ran == 0) {
    result.last = make_checkpoint(m, opts.config_text);
    result.last.adam = adam;
    result.last.rng_state = shuffle.state();
    result.last.progress = progress;
  }
  return result;
}

}  // namespace dtsv::train
