// SPDX-License-Identifier: Apache-2.0
#include "dtsv/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "dtsv/error.hpp"
#include "dtsv/simd/kernels.hpp"

namespace dtsv::ad {
namespace {

template <class Fn>
void accumulate(Graph& g, std::size_t id, Fn&& fn) {
  if (g.requires_grad(id)) fn(g.grad_accumulator(id));
}

enum class Broadcast { same, row, scalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (b.size() == 1) return Broadcast::scalar;
  if (b.size() == a.cols() && (b.rank() == 1 || b.rows() == 1)) return Broadcast::row;
  fail(std::string(op) + ": cannot broadcast " + shape_str(b.shape()) + " onto " +
       shape_str(a.shape()));
}

// Reduces a full-shape gradient onto b's broadcast shape.
void reduce_into(Tensor& gb, Broadcast k, const Tensor& full, std::size_t cols, double sign = 1.0) {
  const std::size_t n = full.size();
  switch (k) {
    case Broadcast::same:
      for (std::size_t i = 0; i < n; ++i) gb[i] += sign * full[i];
      break;
    case Broadcast::row:
      for (std::size_t r = 0; r < n; r += cols) {
        for (std::size_t c = 0; c < cols; ++c) gb[c] += sign * full[r + c];
      }
      break;
    case Broadcast::scalar: {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += full[i];
      gb[0] += sign * s;
      break;
    }
  }
}

// out[i] = f(a[i], b'[i]) where b' is b broadcast onto a.
template <class F>
void broadcast_apply(const Tensor& a, const Tensor& b, Broadcast k, std::size_t cols, Tensor& out, F f) {
  const std::size_t n = a.size();
  switch (k) {
    case Broadcast::same:
      for (std::size_t i = 0; i < n; ++i) out[i] = f(a[i], b[i]);
      break;
    case Broadcast::row:
      for (std::size_t r = 0; r < n; r += cols) {
        for (std::size_t c = 0; c < cols; ++c) out[r + c] = f(a[r + c], b[c]);
      }
      break;
    case Broadcast::scalar: {
      const double s = b[0];
      for (std::size_t i = 0; i < n; ++i) out[i] = f(a[i], s);
      break;
    }
  }
}

Var add_like(Var a, Var b, double sign, const char* name) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast k = broadcast_kind(av, bv, name);
  const std::size_t cols = av.cols();
  Tensor out(av.shape());
  broadcast_apply(av, bv, k, cols, out, [sign](double x, double y) { return x + sign * y; });
  const Var parents[] = {a, b};
  return g.record(std::move(out), parents,
                  [ia = a.id, ib = b.id, k, cols, sign](Graph& g, std::size_t self) {
                    const Tensor& go = g.grad(self);
                    accumulate(g, ia, [&](Tensor& ga) {
                      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
                    });
                    accumulate(g, ib, [&](Tensor& gb) { reduce_into(gb, k, go, cols, sign); });
                  },
                  name);
}

// Unary elementwise op: value f(x) and local derivative df(x, y).
template <class F, class DF>
Var unary(Var a, const char* name, F f, DF df) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  const Var parents[] = {a};
  return g.record(std::move(out), parents,
                  [ia = a.id, df](Graph& g, std::size_t self) {
                    const Tensor& go = g.grad(self);
                    const Tensor& x = g.value(ia);
                    const Tensor& y = g.value(self);
                    Tensor& ga = g.grad_accumulator(ia);
                    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * df(x[i], y[i]);
                  },
                  name);
}

struct AxisSplit {
  std::size_t outer, len, inner;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, const char* op) {
  require(axis < s.size(), std::string(op) + ": axis " + std::to_string(axis) +
                               " out of range for shape " + shape_str(s));
  AxisSplit r{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  require(r.len > 0, std::string(op) + ": empty axis");
  return r;
}

void require_matrix(const Tensor& t, const char* op) {
  require(t.rank() == 2, std::string(op) + ": expected a matrix, got shape " + shape_str(t.shape()));
}

}  // namespace

Var add(Var a, Var b) { return add_like(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_like(a, b, -1.0, "sub"); }

Var mul(Var a, Var b) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast k = broadcast_kind(av, bv, "mul");
  const std::size_t cols = av.cols();
  Tensor out(av.shape());
  broadcast_apply(av, bv, k, cols, out, [](double x, double y) { return x * y; });
  const Var parents[] = {a, b};
  return g.record(std::move(out), parents,
                  [ia = a.id, ib = b.id, k, cols](Graph& g, std::size_t self) {
                    const Tensor& go = g.grad(self);
                    const Tensor& av = g.value(ia);
                    const Tensor& bv = g.value(ib);
                    accumulate(g, ia, [&](Tensor& ga) {
                      Tensor full(go.shape());
                      broadcast_apply(go, bv, k, cols, full, [](double x, double y) { return x * y; });
                      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += full[i];
                    });
                    accumulate(g, ib, [&](Tensor& gb) {
                      Tensor full(go.shape());
                      for (std::size_t i = 0; i < go.size(); ++i) full[i] = go[i] * av[i];
                      reduce_into(gb, k, full, cols);
                    });
                  },
                  "mul");
}

Var scale(Var a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var square(Var a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var log1p(Var a) {
  for (double x : a.value().values()) {
    if (!(x > -1.0)) fail_numeric("log1p: argument " + std::to_string(x) + " outside (-1, inf)");
  }
  return unary(a, "log1p", [](double x) { return std::log1p(x); },
               [](double x, double) { return 1.0 / (1.0 + x); });
}

Var relu(Var a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var clamp_max(Var a, double cap) {
  return unary(a, "clamp_max", [cap](double x) { return x < cap ? x : cap; },
               [cap](double x, double) { return x < cap ? 1.0 : 0.0; });
}

Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  const std::size_t m = trans_a ? av.dim(1) : av.dim(0);
  const std::size_t ka = trans_a ? av.dim(0) : av.dim(1);
  const std::size_t kb = trans_b ? bv.dim(1) : bv.dim(0);
  const std::size_t n = trans_b ? bv.dim(0) : bv.dim(1);
  require(ka == kb, "matmul: inner extents differ (" + shape_str(av.shape()) + " x " +
                        shape_str(bv.shape()) + ")");
  Tensor out({m, n});
  simd::gemm({trans_a, trans_b, m, n, ka, av.data(), av.dim(1), bv.data(), bv.dim(1), out.data(), n,
              false});
  const Var parents[] = {a, b};
  return g.record(
      std::move(out), parents,
      [ia = a.id, ib = b.id, trans_a, trans_b, m, n, k = ka](Graph& g, std::size_t self) {
        const Tensor& go = g.grad(self);
        const Tensor& av = g.value(ia);
        const Tensor& bv = g.value(ib);
        const std::size_t lda = av.dim(1), ldb = bv.dim(1);
        accumulate(g, ia, [&](Tensor& ga) {
          if (!trans_a) {
            // dA (m x k) = dC * op(B)^T
            simd::gemm({false, !trans_b, m, k, n, go.data(), n, bv.data(), ldb, ga.data(), lda, true});
          } else {
            // dA (k x m) = op(B) * dC^T
            simd::gemm({trans_b, true, k, m, n, bv.data(), ldb, go.data(), n, ga.data(), lda, true});
          }
        });
        accumulate(g, ib, [&](Tensor& gb) {
          if (!trans_b) {
            // dB (k x n) = op(A)^T * dC
            simd::gemm({!trans_a, false, k, n, m, av.data(), lda, go.data(), n, gb.data(), ldb, true});
          } else {
            // dB (n x k) = dC^T * op(A)
            simd::gemm({true, trans_a, n, k, m, go.data(), n, av.data(), lda, gb.data(), ldb, true});
          }
        });
      },
      "matmul");
}

Var conv1d(Var x, Var kernels, std::size_t stride) {
  Graph& g = *x.graph;
  const Tensor& xv = x.value();
  const Tensor& kv = kernels.value();
  require_matrix(kv, "conv1d");
  require(stride > 0, "conv1d: stride must be positive");
  const std::size_t len = xv.size(), o = kv.dim(0), k = kv.dim(1);
  require(len >= k, "conv1d: signal of " + std::to_string(len) + " samples is shorter than kernel " +
                        std::to_string(k));
  const std::size_t t = 1 + (len - k) / stride;
  auto frames = std::make_shared<std::vector<double>>(t * k);
  for (std::size_t i = 0; i < t; ++i) {
    std::copy_n(xv.data() + i * stride, k, frames->data() + i * k);
  }
  Tensor out({t, o});
  simd::gemm({false, true, t, o, k, frames->data(), k, kv.data(), k, out.data(), o, false});
  const Var parents[] = {x, kernels};
  return g.record(
      std::move(out), parents,
      [ix = x.id, ik = kernels.id, frames, stride, t, o, k](Graph& g, std::size_t self) {
        const Tensor& go = g.grad(self);
        accumulate(g, ik, [&](Tensor& gk) {
          simd::gemm({true, false, o, k, t, go.data(), o, frames->data(), k, gk.data(), k, true});
        });
        accumulate(g, ix, [&](Tensor& gx) {
          const Tensor& kv = g.value(ik);
          std::vector<double> gf(t * k);
          simd::gemm({false, false, t, k, o, go.data(), o, kv.data(), k, gf.data(), k, false});
          for (std::size_t i = 0; i < t; ++i) {
            for (std::size_t j = 0; j < k; ++j) gx[i * stride + j] += gf[i * k + j];
          }
        });
      },
      "conv1d");
}

Var softmax(Var a, std::size_t axis) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const AxisSplit s = split_axis(av.shape(), axis, "softmax");
  Tensor out(av.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mx = av[base];
      for (std::size_t i = 1; i < s.len; ++i) mx = std::max(mx, av[base + i * s.inner]);
      double z = 0.0;
      for (std::size_t i = 0; i < s.len; ++i) {
        const double e = std::exp(av[base + i * s.inner] - mx);
        out[base + i * s.inner] = e;
        z += e;
      }
      for (std::size_t i = 0; i < s.len; ++i) out[base + i * s.inner] /= z;
    }
  }
  const Var parents[] = {a};
  return g.record(std::move(out), parents,
                  [ia = a.id, s](Graph& g, std::size_t self) {
                    const Tensor& go = g.grad(self);
                    const Tensor& y = g.value(self);
                    Tensor& ga = g.grad_accumulator(ia);
                    for (std::size_t o = 0; o < s.outer; ++o) {
                      for (std::size_t in = 0; in < s.inner; ++in) {
                        const std::size_t base = o * s.len * s.inner + in;
                        double dot = 0.0;
                        for (std::size_t i = 0; i < s.len; ++i) {
                          dot += go[base + i * s.inner] * y[base + i * s.inner];
                        }
                        for (std::size_t i = 0; i < s.len; ++i) {
                          const std::size_t p = base + i * s.inner;
                          ga[p] += y[p] * (go[p] - dot);
                        }
                      }
                    }
                  },
                  "softmax");
}

Var layer_norm(Var a, std::size_t axis, double eps) {
  require(eps > 0.0, "layer_norm: eps must be positive");
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const AxisSplit s = split_axis(av.shape(), axis, "layer_norm");
  Tensor out(av.shape());
  auto inv_std = std::make_shared<std::vector<double>>(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mu = 0.0;
      for (std::size_t i = 0; i < s.len; ++i) mu += av[base + i * s.inner];
      mu /= static_cast<double>(s.len);
      double var = 0.0;
      for (std::size_t i = 0; i < s.len; ++i) {
        const double d = av[base + i * s.inner] - mu;
        var += d * d;
      }
      var /= static_cast<double>(s.len);
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv_std)[o * s.inner + in] = is;
      for (std::size_t i = 0; i < s.len; ++i) {
        out[base + i * s.inner] = (av[base + i * s.inner] - mu) * is;
      }
    }
  }
  const Var parents[] = {a};
  return g.record(std::move(out), parents,
                  [ia = a.id, s, inv_std](Graph& g, std::size_t self) {
                    const Tensor& go = g.grad(self);
                    const Tensor& y = g.value(self);
                    Tensor& ga = g.grad_accumulator(ia);
                    const double n = static_cast<double>(s.len);
                    for (std::size_t o = 0; o < s.outer; ++o) {
                      for (std::size_t in = 0; in < s.inner; ++in) {
                        const std::size_t base = o * s.len * s.inner + in;
                        double mg = 0.0, mgy = 0.0;
                        for (std::size_t i = 0; i < s.len; ++i) {
                          const std::size_t p = base + i * s.inner;
                          mg += go[p];
                          mgy += go[p] * y[p];
                        }
                        mg /= n;
                        mgy /= n;
                        const double is = (*inv_std)[o * s.inner + in];
                        for (std::size_t i = 0; i < s.len; ++i) {
                          const std::size_t p = base + i * s.inner;
                          ga[p] += is * (go[p] - mg - y[p] * mgy);
                        }
                      }
                    }
                  },
                  "layer_norm");
}

Var sum(Var a) {
  Graph& g = *a.graph;
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const Var parents[] = {a};
  return g.record(Tensor::scalar(s), parents,
                  [ia = a.id](Graph& g, std::size_t self) {
                    const double go = g.grad(self)[0];
                    Tensor& ga = g.grad_accumulator(ia);
                    for (double& v : ga.values()) v += go;
                  },
                  "sum");
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var kl_div(Var p, Var q) {
  Graph& g = *p.graph;
  const Tensor& pv = p.value();
  const Tensor& qv = q.value();
  const std::size_t d = qv.cols(), m = qv.rows();
  require(pv.cols() == d, "kl_div: distribution lengths differ");
  require(pv.rows() == 1 || pv.rows() == m, "kl_div: p must have 1 or " + std::to_string(m) + " rows");
  const bool bcast = pv.rows() == 1 && m != 1;
  Tensor out({m});
  for (std::size_t r = 0; r < m; ++r) {
    const double* pr = pv.data() + (bcast ? 0 : r * d);
    const double* qr = qv.data() + r * d;
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (pr[j] < 0.0) fail_numeric("kl_div: negative probability");
      if (pr[j] == 0.0) continue;
      if (!(qr[j] > 0.0)) fail_numeric("kl_div: q has zero mass where p does not");
      s += pr[j] * std::log(pr[j] / qr[j]);
    }
    out[r] = s;
  }
  const Var parents[] = {p, q};
  return g.record(std::move(out), parents,
                  [ip = p.id, iq = q.id, bcast, m, d](Graph& g, std::size_t self) {
                    const Tensor& go = g.grad(self);
                    const Tensor& pv = g.value(ip);
                    const Tensor& qv = g.value(iq);
                    accumulate(g, ip, [&](Tensor& gp) {
                      for (std::size_t r = 0; r < m; ++r) {
                        const std::size_t pb = bcast ? 0 : r * d;
                        for (std::size_t j = 0; j < d; ++j) {
                          const double pj = pv[pb + j];
                          if (pj == 0.0) continue;
                          gp[pb + j] += go[r] * (std::log(pj / qv[r * d + j]) + 1.0);
                        }
                      }
                    });
                    accumulate(g, iq, [&](Tensor& gq) {
                      for (std::size_t r = 0; r < m; ++r) {
                        const std::size_t pb = bcast ? 0 : r * d;
                        for (std::size_t j = 0; j < d; ++j) {
                          gq[r * d + j] -= go[r] * pv[pb + j] / qv[r * d + j];
                        }
                      }
                    });
                  },
                  "kl_div");
}

namespace {

void log_softmax_row(const double* x, std::size_t d, double* out) {
  double mx = x[0];
  for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, x[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += std::exp(x[j] - mx);
  const double lse = mx + std::log(s);
  for (std::size_t j = 0; j < d; ++j) out[j] = x[j] - lse;
}

}  // namespace

Var kl_div_logits(Var a, Var b) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t d = bv.cols(), m = bv.rows();
  require(av.cols() == d, "kl_div_logits: row lengths differ");
  require(av.rows() == 1 || av.rows() == m,
          "kl_div_logits: a must have 1 or " + std::to_string(m) + " rows");
  const bool bcast = av.rows() == 1 && m != 1;
  // Cache log-softmax of both operands for the backward pass.
  auto la = std::make_shared<Tensor>(av.shape());
  auto lb = std::make_shared<Tensor>(bv.shape());
  for (std::size_t r = 0; r < av.rows(); ++r) log_softmax_row(av.data() + r * d, d, la->data() + r * d);
  for (std::size_t r = 0; r < m; ++r) log_softmax_row(bv.data() + r * d, d, lb->data() + r * d);
  Tensor out({m});
  for (std::size_t r = 0; r < m; ++r) {
    const double* lp = la->data() + (bcast ? 0 : r * d);
    const double* lq = lb->data() + r * d;
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += std::exp(lp[j]) * (lp[j] - lq[j]);
    out[r] = std::max(s, 0.0);
  }
  const Var parents[] = {a, b};
  return g.record(std::move(out), parents,
                  [ia = a.id, ib = b.id, la, lb, bcast, m, d](Graph& g, std::size_t self) {
                    const Tensor& go = g.grad(self);
                    accumulate(g, ia, [&](Tensor& ga) {
                      // dKL/da_k = p_k (x_k - sum_j p_j x_j), x = log p - log q
                      for (std::size_t r = 0; r < m; ++r) {
                        const std::size_t pb = bcast ? 0 : r * d;
                        const double* lp = la->data() + pb;
                        const double* lq = lb->data() + r * d;
                        double mean_x = 0.0;
                        for (std::size_t j = 0; j < d; ++j) mean_x += std::exp(lp[j]) * (lp[j] - lq[j]);
                        for (std::size_t j = 0; j < d; ++j)
                          ga[pb + j] += go[r] * std::exp(lp[j]) * (lp[j] - lq[j] - mean_x);
                      }
                    });
                    accumulate(g, ib, [&](Tensor& gb) {
                      // dKL/db = q - p
                      for (std::size_t r = 0; r < m; ++r) {
                        const double* lp = la->data() + (bcast ? 0 : r * d);
                        const double* lq = lb->data() + r * d;
                        for (std::size_t j = 0; j < d; ++j)
                          gb[r * d + j] += go[r] * (std::exp(lq[j]) - std::exp(lp[j]));
                      }
                    });
                  },
                  "kl_div_logits");
}

Var cosine_sim(Var a, Var b) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t d = av.cols();
  require(bv.cols() == d, "cosine_sim: row lengths differ");
  const std::size_t m = av.rows(), n = bv.rows();
  auto norms = std::make_shared<std::vector<double>>(m + n);
  for (std::size_t i = 0; i < m; ++i) (*norms)[i] = std::sqrt(simd::dot(av.row(i), av.row(i)));
  for (std::size_t j = 0; j < n; ++j) (*norms)[m + j] = std::sqrt(simd::dot(bv.row(j), bv.row(j)));
  for (double nv : *norms) {
    if (!(nv > 0.0)) fail_numeric("cosine_sim: zero-norm vector");
  }
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.at(i, j) = simd::dot(av.row(i), bv.row(j)) / ((*norms)[i] * (*norms)[m + j]);
    }
  }
  const Var parents[] = {a, b};
  return g.record(
      std::move(out), parents,
      [ia = a.id, ib = b.id, norms, m, n, d](Graph& g, std::size_t self) {
        const Tensor& go = g.grad(self);
        const Tensor& c = g.value(self);
        const Tensor& av = g.value(ia);
        const Tensor& bv = g.value(ib);
        const auto& nr = *norms;
        accumulate(g, ia, [&](Tensor& ga) {
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
              const double w = go.at(i, j);
              if (w == 0.0) continue;
              const double na = nr[i], nb = nr[m + j];
              for (std::size_t k = 0; k < d; ++k) {
                ga.at(i, k) += w * (bv.at(j, k) / (na * nb) - c.at(i, j) * av.at(i, k) / (na * na));
              }
            }
          }
        });
        accumulate(g, ib, [&](Tensor& gb) {
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
              const double w = go.at(i, j);
              if (w == 0.0) continue;
              const double na = nr[i], nb = nr[m + j];
              for (std::size_t k = 0; k < d; ++k) {
                gb.at(j, k) += w * (av.at(i, k) / (na * nb) - c.at(i, j) * bv.at(j, k) / (nb * nb));
              }
            }
          }
        });
      },
      "cosine_sim");
}

Var cross_entropy_from_logits(Var logits, std::span<const int> labels) {
  Graph& g = *logits.graph;
  const Tensor& lv = logits.value();
  require_matrix(lv, "cross_entropy_from_logits");
  const std::size_t n = lv.rows(), j = lv.cols();
  require(labels.size() == n, "cross_entropy_from_logits: label count differs from rows");
  auto probs = std::make_shared<std::vector<double>>(n * j);
  auto lab = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const int l = labels[r];
    require(l >= 0 && static_cast<std::size_t>(l) < j,
            "label " + std::to_string(l) + " out of range [0, " + std::to_string(j) + ")");
    const double* x = lv.data() + r * j;
    const double mx = *std::max_element(x, x + j);
    double z = 0.0;
    for (std::size_t c = 0; c < j; ++c) z += std::exp(x[c] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < j; ++c) (*probs)[r * j + c] = std::exp(x[c] - lse);
    loss += lse - x[l];
  }
  loss /= static_cast<double>(n);
  const Var parents[] = {logits};
  return g.record(Tensor::scalar(loss), parents,
                  [il = logits.id, probs, lab, n, j](Graph& g, std::size_t self) {
                    const double go = g.grad(self)[0] / static_cast<double>(n);
                    Tensor& gl = g.grad_accumulator(il);
                    for (std::size_t r = 0; r < n; ++r) {
                      for (std::size_t c = 0; c < j; ++c) {
                        const double onehot = static_cast<int>(c) == (*lab)[r] ? 1.0 : 0.0;
                        gl[r * j + c] += go * ((*probs)[r * j + c] - onehot);
                      }
                    }
                  },
                  "cross_entropy_from_logits");
}

Var angular_margin(Var cosines, std::span<const int> labels, double margin) {
  constexpr double kClamp = 1.0 - 1e-7;
  Graph& g = *cosines.graph;
  const Tensor& cv = cosines.value();
  require_matrix(cv, "angular_margin");
  const std::size_t n = cv.rows(), j = cv.cols();
  require(labels.size() == n, "angular_margin: label count differs from rows");
  auto lab = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  auto deriv = std::make_shared<std::vector<double>>(n);
  Tensor out = cv;
  for (std::size_t r = 0; r < n; ++r) {
    const int l = labels[r];
    require(l >= 0 && static_cast<std::size_t>(l) < j,
            "label " + std::to_string(l) + " out of range [0, " + std::to_string(j) + ")");
    const double c = cv.at(r, l);
    const double cc = std::clamp(c, -kClamp, kClamp);
    const double theta = std::acos(cc);
    out.at(r, l) = std::cos(theta + margin);
    // d cos(theta + m) / dc = sin(theta + m) / sin(theta); zero once clamped.
    (*deriv)[r] = (c == cc) ? std::sin(theta + margin) / std::sin(theta) : 0.0;
  }
  const Var parents[] = {cosines};
  return g.record(std::move(out), parents,
                  [ic = cosines.id, lab, deriv, n, j](Graph& g, std::size_t self) {
                    const Tensor& go = g.grad(self);
                    Tensor& gc = g.grad_accumulator(ic);
                    for (std::size_t r = 0; r < n; ++r) {
                      for (std::size_t c = 0; c < j; ++c) {
                        const bool target = static_cast<int>(c) == (*lab)[r];
                        gc[r * j + c] += go[r * j + c] * (target ? (*deriv)[r] : 1.0);
                      }
                    }
                  },
                  "angular_margin");
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const std::size_t cols = av.cols();
  require(count > 0 && begin + count <= av.rows(), "slice_rows: range out of bounds");
  Tensor out({count, cols});
  std::copy_n(av.data() + begin * cols, count * cols, out.data());
  const Var parents[] = {a};
  return g.record(std::move(out), parents,
                  [ia = a.id, begin, cols](Graph& g, std::size_t self) {
                    const Tensor& go = g.grad(self);
                    Tensor& ga = g.grad_accumulator(ia);
                    for (std::size_t i = 0; i < go.size(); ++i) ga[begin * cols + i] += go[i];
                  },
                  "slice_rows");
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  require(count > 0 && begin + count <= cols, "slice_cols: range out of bounds");
  Tensor out({rows, count});
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(av.data() + r * cols + begin, count, out.data() + r * count);
  const Var parents[] = {a};
  return g.record(std::move(out), parents,
                  [ia = a.id, begin, count, rows, cols](Graph& g, std::size_t self) {
                    const Tensor& go = g.grad(self);
                    Tensor& ga = g.grad_accumulator(ia);
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t c = 0; c < count; ++c) ga[r * cols + begin + c] += go[r * count + c];
                    }
                  },
                  "slice_cols");
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no operands");
  Graph& g = *parts[0].graph;
  const std::size_t cols = parts[0].value().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require(p.value().cols() == cols, "concat_rows: column counts differ");
    rows += p.value().rows();
  }
  Tensor out({rows, cols});
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + off);
    ids.push_back(p.id);
    offsets.push_back(off);
    off += p.value().size();
  }
  return g.record(std::move(out), parts,
                  [ids, offsets](Graph& g, std::size_t self) {
                    const Tensor& go = g.grad(self);
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      accumulate(g, ids[k], [&](Tensor& gp) {
                        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += go[offsets[k] + i];
                      });
                    }
                  },
                  "concat_rows");
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no operands");
  Graph& g = *parts[0].graph;
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    require(p.value().rows() == rows, "concat_cols: row counts differ");
    cols += p.value().cols();
  }
  Tensor out({rows, cols});
  std::vector<std::size_t> ids, offsets, widths;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    const std::size_t w = v.cols();
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(v.data() + r * w, w, out.data() + r * cols + off);
    ids.push_back(p.id);
    offsets.push_back(off);
    widths.push_back(w);
    off += w;
  }
  return g.record(std::move(out), parts,
                  [ids, offsets, widths, rows, cols](Graph& g, std::size_t self) {
                    const Tensor& go = g.grad(self);
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      accumulate(g, ids[k], [&](Tensor& gp) {
                        const std::size_t w = widths[k];
                        for (std::size_t r = 0; r < rows; ++r) {
                          for (std::size_t c = 0; c < w; ++c) gp[r * w + c] += go[r * cols + offsets[k] + c];
                        }
                      });
                    }
                  },
                  "concat_cols");
}

Var rel_pos_bias(Var table, std::size_t n, std::size_t max_dist, std::size_t head) {
  Graph& g = *table.graph;
  const Tensor& tv = table.value();
  require_matrix(tv, "rel_pos_bias");
  require(tv.dim(0) == 2 * max_dist + 1, "rel_pos_bias: table must have 2*max_dist+1 rows");
  require(head < tv.dim(1), "rel_pos_bias: head index out of range");
  require(n > 0, "rel_pos_bias: empty sequence");
  const std::size_t heads = tv.dim(1);
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = tv.at(rel_pos_index(i, j, max_dist), head);
  }
  const Var parents[] = {table};
  return g.record(std::move(out), parents,
                  [it = table.id, n, max_dist, head, heads](Graph& g, std::size_t self) {
                    const Tensor& go = g.grad(self);
                    Tensor& gt = g.grad_accumulator(it);
                    for (std::size_t i = 0; i < n; ++i) {
                      for (std::size_t j = 0; j < n; ++j) {
                        gt[rel_pos_index(i, j, max_dist) * heads + head] += go[i * n + j];
                      }
                    }
                  },
                  "rel_pos_bias");
}

}  // namespace dtsv::ad
