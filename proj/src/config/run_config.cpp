// SPDX-License-Identifier: Apache-2.0
#include "dtsv/config/run_config.hpp"

#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <type_traits>

#include "dtsv/error.hpp"
#include "dtsv/format.hpp"

namespace dtsv::config {

namespace {

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <class T>
std::string to_text(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return format_double(v);
  } else {
    return std::to_string(v);
  }
}

template <class T>
T from_text(std::string_view s) {
  if constexpr (std::is_same_v<T, bool>) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    fail("expected true or false, got '" + std::string(s) + "'");
  } else if constexpr (std::is_floating_point_v<T>) {
    return parse_double(s, "number");
  } else if constexpr (std::is_unsigned_v<T>) {
    const long long v = parse_int(s, "non-negative integer");
    if (v < 0) fail("expected a non-negative integer, got '" + std::string(s) + "'");
    if constexpr (sizeof(T) < sizeof(long long)) {
      if (static_cast<unsigned long long>(v) > std::numeric_limits<T>::max())
        fail("value out of range: '" + std::string(s) + "'");
    }
    return static_cast<T>(v);
  } else {
    const long long v = parse_int(s, "integer");
    if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max())
      fail("value out of range: '" + std::string(s) + "'");
    return static_cast<T>(v);
  }
}

template <class Acc>
Field field(std::string section, std::string key, Acc acc) {
  using T = std::remove_reference_t<decltype(acc(std::declval<RunConfig&>()))>;
  return {std::move(section), std::move(key),
          [acc](const RunConfig& c) { return to_text<T>(acc(const_cast<RunConfig&>(c))); },
          [acc](RunConfig& c, std::string_view s) { acc(c) = from_text<T>(s); }};
}

template <class E, class Acc>
Field enum_field(std::string section, std::string key, Acc acc, std::vector<std::pair<E, std::string>> names) {
  auto get = [acc, names](const RunConfig& c) {
    const E v = acc(const_cast<RunConfig&>(c));
    for (const auto& [e, n] : names)
      if (e == v) return n;
    return std::string("?");
  };
  auto set = [acc, names](RunConfig& c, std::string_view s) {
    std::string allowed;
    for (const auto& [e, n] : names) {
      if (n == s) {
        acc(c) = e;
        return;
      }
      allowed += (allowed.empty() ? "" : "|") + n;
    }
    fail("expected one of " + allowed + ", got '" + std::string(s) + "'");
  };
  return {std::move(section), std::move(key), get, set};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    // [model]
    f.push_back(field("model", "layers", [](RunConfig& c) -> auto& { return c.model.n_layers; }));
    f.push_back(field("model", "dim", [](RunConfig& c) -> auto& { return c.model.model_dim; }));
    f.push_back(field("model", "heads", [](RunConfig& c) -> auto& { return c.model.n_heads; }));
    f.push_back(field("model", "mlp_dim", [](RunConfig& c) -> auto& { return c.model.mlp_dim; }));
    f.push_back(field("model", "max_rel_dist", [](RunConfig& c) -> auto& { return c.model.max_rel_dist; }));
    f.push_back(field("model", "classes", [](RunConfig& c) -> auto& { return c.n_classes; }));
    f.push_back(enum_field<model::TdfeInit>("model", "tdfe_init",
                                            [](RunConfig& c) -> auto& { return c.model.tdfe_init; },
                                            {{model::TdfeInit::mel, "mel"}, {model::TdfeInit::random, "random"}}));
    f.push_back(field("model", "tdfe_trainable", [](RunConfig& c) -> auto& { return c.model.tdfe_trainable; }));
    f.push_back(field("model", "seed", [](RunConfig& c) -> auto& { return c.model_seed; }));
    // [frontend]
    f.push_back(field("frontend", "sample_rate", [](RunConfig& c) -> auto& { return c.model.frontend.sample_rate; }));
    f.push_back(field("frontend", "frame_len", [](RunConfig& c) -> auto& { return c.model.frontend.frame_len; }));
    f.push_back(field("frontend", "hop", [](RunConfig& c) -> auto& { return c.model.frontend.hop; }));
    f.push_back(field("frontend", "n_fft", [](RunConfig& c) -> auto& { return c.model.frontend.n_fft; }));
    f.push_back(field("frontend", "n_mels", [](RunConfig& c) -> auto& { return c.model.frontend.n_mels; }));
    f.push_back(field("frontend", "fmin", [](RunConfig& c) -> auto& { return c.model.frontend.fmin; }));
    f.push_back(field("frontend", "fmax", [](RunConfig& c) -> auto& { return c.model.frontend.fmax; }));
    f.push_back(field("frontend", "preemph", [](RunConfig& c) -> auto& { return c.model.frontend.preemph; }));
    // [loss]
    f.push_back(field("loss", "scale", [](RunConfig& c) -> auto& { return c.train.loss.scale; }));
    f.push_back(field("loss", "margin", [](RunConfig& c) -> auto& { return c.train.loss.margin; }));
    f.push_back(field("loss", "lambda", [](RunConfig& c) -> auto& { return c.train.loss.lambda; }));
    f.push_back(enum_field<losses::DiffluenceVariant>(
        "loss", "variant", [](RunConfig& c) -> auto& { return c.train.loss.variant; },
        {{losses::DiffluenceVariant::kl, "kl"},
         {losses::DiffluenceVariant::cosine, "cosine"},
         {losses::DiffluenceVariant::none, "none"}}));
    f.push_back(field("loss", "kl_cap", [](RunConfig& c) -> auto& { return c.train.loss.kl_cap; }));
    // [train]
    f.push_back(field("train", "lr", [](RunConfig& c) -> auto& { return c.train.lr; }));
    f.push_back(field("train", "lr_decay", [](RunConfig& c) -> auto& { return c.train.lr_decay; }));
    f.push_back(field("train", "weight_decay", [](RunConfig& c) -> auto& { return c.train.weight_decay; }));
    f.push_back(field("train", "epochs", [](RunConfig& c) -> auto& { return c.train.epochs; }));
    f.push_back(field("train", "batch_size", [](RunConfig& c) -> auto& { return c.train.batch_size; }));
    f.push_back(field("train", "seed", [](RunConfig& c) -> auto& { return c.train.seed; }));
    f.push_back(field("train", "crop_seconds", [](RunConfig& c) -> auto& { return c.train.crop_seconds; }));
    f.push_back(field("train", "heldout_per_speaker", [](RunConfig& c) -> auto& { return c.train.heldout_per_speaker; }));
    f.push_back(field("train", "threads", [](RunConfig& c) -> auto& { return c.train.threads; }));
    f.push_back(field("train", "adam_beta1", [](RunConfig& c) -> auto& { return c.train.adam.beta1; }));
    f.push_back(field("train", "adam_beta2", [](RunConfig& c) -> auto& { return c.train.adam.beta2; }));
    f.push_back(field("train", "adam_eps", [](RunConfig& c) -> auto& { return c.train.adam.eps; }));
    // [augment]
    f.push_back(field("augment", "noise", [](RunConfig& c) -> auto& { return c.train.augment.noise_enabled; }));
    f.push_back(field("augment", "snr_db_min", [](RunConfig& c) -> auto& { return c.train.augment.snr_db_min; }));
    f.push_back(field("augment", "snr_db_max", [](RunConfig& c) -> auto& { return c.train.augment.snr_db_max; }));
    f.push_back(field("augment", "gain", [](RunConfig& c) -> auto& { return c.train.augment.gain_enabled; }));
    f.push_back(field("augment", "gain_db_min", [](RunConfig& c) -> auto& { return c.train.augment.gain_db_min; }));
    f.push_back(field("augment", "gain_db_max", [](RunConfig& c) -> auto& { return c.train.augment.gain_db_max; }));
    f.push_back(field("augment", "specaug", [](RunConfig& c) -> auto& { return c.train.augment.specaug.enabled; }));
    f.push_back(field("augment", "time_masks", [](RunConfig& c) -> auto& { return c.train.augment.specaug.n_time_masks; }));
    f.push_back(field("augment", "max_time_width", [](RunConfig& c) -> auto& { return c.train.augment.specaug.max_time_width; }));
    f.push_back(field("augment", "freq_masks", [](RunConfig& c) -> auto& { return c.train.augment.specaug.n_freq_masks; }));
    f.push_back(field("augment", "max_freq_width", [](RunConfig& c) -> auto& { return c.train.augment.specaug.max_freq_width; }));
    f.push_back(field("augment", "seed", [](RunConfig& c) -> auto& { return c.train.augment.seed; }));
    // [data]
    f.push_back(field("data", "speakers", [](RunConfig& c) -> auto& { return c.data.n_speakers; }));
    f.push_back(field("data", "utts_per_speaker", [](RunConfig& c) -> auto& { return c.data.utts_per_speaker; }));
    f.push_back(field("data", "duration_s", [](RunConfig& c) -> auto& { return c.data.duration_s; }));
    f.push_back(field("data", "sample_rate", [](RunConfig& c) -> auto& { return c.data.sample_rate; }));
    f.push_back(field("data", "seed", [](RunConfig& c) -> auto& { return c.data.seed; }));
    f.push_back(field("data", "f0_min", [](RunConfig& c) -> auto& { return c.data.f0_min; }));
    f.push_back(field("data", "f0_max", [](RunConfig& c) -> auto& { return c.data.f0_max; }));
    f.push_back(field("data", "f0_jitter", [](RunConfig& c) -> auto& { return c.data.f0_jitter; }));
    f.push_back(field("data", "formant_jitter", [](RunConfig& c) -> auto& { return c.data.formant_jitter; }));
    f.push_back(field("data", "noise_floor_db", [](RunConfig& c) -> auto& { return c.data.noise_floor_db; }));
    return f;
  }();
  return table;
}

const std::vector<std::string> kSections = {"model", "frontend", "loss", "train", "augment", "data"};

}  // namespace

void RunConfig::validate() const {
  model::ModelConfig m = model;
  if (n_classes > 0) m.n_classes = n_classes;
  m.validate();
  train.validate();
  data.validate(model.frontend.frame_len);
  require(data.sample_rate == model.frontend.sample_rate,
          "config: data.sample_rate (" + std::to_string(data.sample_rate) +
              ") must equal frontend.sample_rate (" + std::to_string(model.frontend.sample_rate) + ")");
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  std::map<std::string, const Field*> index;
  for (const Field& f : fields()) index[f.section + "." + f.key] = &f;

  RunConfig cfg;
  std::string section;
  std::set<std::string> seen;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string at = source + ":" + std::to_string(i + 1);
    std::string_view line = lines[i];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(at + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      bool known = false;
      for (const auto& s : kSections) known |= s == section;
      if (!known) fail(at + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(at + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (section.empty()) fail(at + ": key '" + key + "' outside any section");
    const std::string full = section + "." + key;
    auto it = index.find(full);
    if (it == index.end()) fail(at + ": unknown key '" + full + "'");
    if (!seen.insert(full).second) fail(at + ": duplicate key '" + full + "'");
    try {
      it->second->set(cfg, value);
    } catch (const Error& e) {
      fail(at + ": key '" + full + "': " + e.what());
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path), path.string());
}

std::string serialize_run_config(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const Field& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

std::vector<KeyInfo> config_keys() {
  const RunConfig defaults;
  std::vector<KeyInfo> out;
  for (const Field& f : fields()) out.push_back({f.section, f.key, f.get(defaults)});
  return out;
}

std::optional<std::uint64_t> seed_from_env() {
  const char* v = std::getenv("DTSV_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    const long long s = parse_int(v, "DTSV_SEED");
    if (s < 0) fail("DTSV_SEED must be non-negative");
    return static_cast<std::uint64_t>(s);
  } catch (const Error& e) {
    fail(std::string("environment: ") + e.what());
  }
}

void apply_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.model_seed = seed;
  cfg.train.seed = seed;
  cfg.data.seed = seed;
}

}  // namespace dtsv::config
