// SPDX-License-Identifier: Apache-2.0
#include "dtsv/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "dtsv/config/run_config.hpp"
#include "dtsv/error.hpp"
#include "dtsv/format.hpp"

namespace dtsv::train {

namespace {

class Writer {
 public:
  void tag(const char (&t)[5]) { out_.append(t, 4); }
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void floats(const ad::Tensor& t) {
    for (double v : t.values()) le(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  std::string take() { return std::move(out_); }

 private:
  template <class T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_ += static_cast<char>((v >> (8 * i)) & 0xff);
  }
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& in, std::string source) : in_(in), source_(std::move(source)) {}

  void expect_tag(const char (&t)[5]) {
    need(4);
    if (std::memcmp(in_.data() + pos_, t, 4) != 0)
      fail_io(source_ + ": expected block '" + std::string(t) + "' at offset " + std::to_string(pos_));
    pos_ += 4;
  }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::string bytes() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void floats(ad::Tensor& t) {
    need(4 * t.size());
    for (double& v : t.values()) v = static_cast<double>(std::bit_cast<float>(le<std::uint32_t>()));
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) {
    if (in_.size() - pos_ < n) fail_io(source_ + ": truncated checkpoint");
  }
  template <class T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  const std::string& in_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

Checkpoint make_checkpoint(const model::Model& m, std::string config_text) {
  Checkpoint c;
  c.config_text = std::move(config_text);
  for (const ad::Parameter* p : m.parameters()) c.tensors.push_back({p->name, p->value});
  return c;
}

std::string encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.tag("DTSV");
  w.u32(kCheckpointVersion);
  w.bytes(c.config_text);
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const NamedTensor& t : c.tensors) {
    w.bytes(t.name);
    w.u32(static_cast<std::uint32_t>(t.value.rank()));
    for (std::size_t e : t.value.shape()) w.u64(e);
    w.floats(t.value);
  }
  w.tag("ADAM");
  w.u64(c.adam.step);
  w.u32(static_cast<std::uint32_t>(c.adam.m.size()));
  for (std::size_t i = 0; i < c.adam.m.size(); ++i) {
    w.u64(c.adam.m[i].size());
    w.floats(c.adam.m[i]);
    w.floats(c.adam.v[i]);
  }
  w.tag("RNG ");
  w.bytes(c.rng_state);
  w.tag("META");
  w.u64(c.progress.epoch);
  w.u64(c.progress.global_step);
  w.f64(c.progress.best_eer);
  w.u64(c.progress.best_epoch);
  w.f64(c.progress.last_eer);
  w.tag("END ");
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& source) {
  Reader r(bytes, source);
  if (bytes.size() < 4 || bytes.compare(0, 4, "DTSV") != 0) fail_io(source + ": not a checkpoint (bad magic)");
  r.expect_tag("DTSV");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    fail_io(source + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.config_text = r.bytes();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.bytes();
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) fail_io(source + ": bad rank for " + t.name);
    ad::Shape shape(rank);
    std::uint64_t total = 1;
    for (auto& e : shape) {
      e = r.u64();
      if (e == 0 || total > (std::uint64_t{1} << 40) / e) fail_io(source + ": bad extents for " + t.name);
      total *= e;
    }
    if (total * 4 > bytes.size()) fail_io(source + ": truncated checkpoint");
    t.value = ad::Tensor(shape);
    r.floats(t.value);
    c.tensors.push_back(std::move(t));
  }
  r.expect_tag("ADAM");
  c.adam.step = r.u64();
  const std::uint32_t n_moments = r.u32();
  for (std::uint32_t i = 0; i < n_moments; ++i) {
    const std::uint64_t n = r.u64();
    if (i >= c.tensors.size() || n != c.tensors[i].value.size())
      fail_io(source + ": optimizer moments do not match tensor " + std::to_string(i));
    c.adam.m.emplace_back(c.tensors[i].value.shape());
    c.adam.v.emplace_back(c.tensors[i].value.shape());
    r.floats(c.adam.m.back());
    r.floats(c.adam.v.back());
  }
  r.expect_tag("RNG ");
  c.rng_state = r.bytes();
  r.expect_tag("META");
  c.progress.epoch = r.u64();
  c.progress.global_step = r.u64();
  c.progress.best_eer = r.f64();
  c.progress.best_epoch = r.u64();
  c.progress.last_eer = r.f64();
  r.expect_tag("END ");
  if (!r.at_end()) fail_io(source + ": trailing bytes after checkpoint");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_text_file(path, encode_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_text_file(path), path.string());
}

void apply_checkpoint(const Checkpoint& c, model::Model& m) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const NamedTensor& t : c.tensors) by_name[t.name] = &t;
  std::string missing, extra, mismatched;
  std::map<std::string, bool> used;
  for (ad::Parameter* p : m.parameters()) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) {
      missing += (missing.empty() ? "" : ", ") + p->name;
      continue;
    }
    used[p->name] = true;
    if (it->second->value.shape() != p->value.shape())
      mismatched += (mismatched.empty() ? "" : ", ") + p->name + " " + ad::shape_str(it->second->value.shape()) +
                    " vs " + ad::shape_str(p->value.shape());
  }
  for (const NamedTensor& t : c.tensors)
    if (!used.count(t.name)) extra += (extra.empty() ? "" : ", ") + t.name;
  if (!missing.empty() || !extra.empty() || !mismatched.empty()) {
    std::string msg = "checkpoint does not match model config;";
    if (!missing.empty()) msg += " missing: " + missing + ";";
    if (!extra.empty()) msg += " extra: " + extra + ";";
    if (!mismatched.empty()) msg += " shape mismatch: " + mismatched + ";";
    fail(msg);
  }
  for (ad::Parameter* p : m.parameters()) {
    p->value = by_name.at(p->name)->value;
    p->zero_grad();
  }
}

model::Model model_from_checkpoint(const Checkpoint& c) {
  const config::RunConfig rc = config::parse_run_config(c.config_text, "checkpoint config");
  model::ModelConfig mc = rc.model;
  require(rc.n_classes > 0, "checkpoint config: classes must be resolved");
  mc.n_classes = rc.n_classes;
  model::Model m = model::build_model(mc, rc.model_seed);
  apply_checkpoint(c, m);
  return m;
}

}  // namespace dtsv::train
