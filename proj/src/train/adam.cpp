// SPDX-License-Identifier: Apache-2.0
#include "dtsv/train/adam.hpp"

#include <cmath>
#include <string>

#include "dtsv/error.hpp"

namespace dtsv::train {

namespace {

inline double to_float(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace

void AdamState::init(std::span<const ad::Parameter* const> params) {
  if (!m.empty()) {
    require(m.size() == params.size(), "adam: state holds " + std::to_string(m.size()) +
                                           " moments for " + std::to_string(params.size()) +
                                           " parameters");
    return;
  }
  for (const ad::Parameter* p : params) {
    m.emplace_back(p->value.shape());
    v.emplace_back(p->value.shape());
  }
}

void AdamState::init(std::span<ad::Parameter* const> params) {
  std::vector<const ad::Parameter*> c(params.begin(), params.end());
  init(std::span<const ad::Parameter* const>(c));
}

void adam_step(std::span<ad::Parameter* const> params, AdamState& state, double lr,
               double weight_decay, const AdamConfig& cfg, std::span<const std::uint8_t> active) {
  require(lr >= 0.0 && std::isfinite(lr), "adam: lr must be finite and >= 0");
  require(weight_decay >= 0.0, "adam: weight_decay must be >= 0");
  require(active.empty() || active.size() == params.size(), "adam: active mask size mismatch");
  auto is_active = [&](std::size_t i) { return active.empty() || active[i] != 0; };
  state.init(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!is_active(i)) continue;
    const ad::Parameter& p = *params[i];
    require(p.grad.shape() == p.value.shape() && state.m[i].shape() == p.value.shape(),
            "adam: shape mismatch for " + p.name);
    if (!p.grad.all_finite()) fail_numeric("adam: non-finite gradient for " + p.name);
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - lr * weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!is_active(i)) continue;
    ad::Parameter& p = *params[i];
    double* w = p.value.data();
    const double* g = p.grad.data();
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      m[k] = to_float(cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k]);
      v[k] = to_float(cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k]);
      const double mh = m[k] / bc1;
      const double vh = v[k] / bc2;
      w[k] = to_float(w[k] * decay - lr * mh / (std::sqrt(vh) + cfg.eps));
    }
  }
}

}  // namespace dtsv::train
