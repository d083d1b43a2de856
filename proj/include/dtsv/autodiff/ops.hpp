// SPDX-License-Identifier: Apache-2.0
//
// Differentiable operations. Tensors are treated as matrices (rows x last
// extent) unless stated otherwise.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dtsv/autodiff/graph.hpp"

namespace dtsv::ad {

// Elementwise with broadcasting of b as: same shape, a row vector of
// length a.cols(), or a single value.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);

Var square(Var a);
Var log1p(Var a);  // requires a > -1
Var relu(Var a);
Var clamp_max(Var a, double cap);

// op(a) * op(b) for 2-D operands.
Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);

// Valid 1-D convolution (cross-correlation) of the flat signal x with each
// row of kernels (O x K): out(t, o) = sum_k x[t*stride + k] * kernels(o, k).
// Result is T x O with T = 1 + (len(x) - K) / stride.
Var conv1d(Var x, Var kernels, std::size_t stride);

Var softmax(Var a, std::size_t axis);
Var layer_norm(Var a, std::size_t axis, double eps = 1e-5);

Var sum(Var a);
Var mean(Var a);

// Row-wise KL(p_m || q_m) in nats over the last axis. p has one row
// (broadcast) or as many rows as q. Result shape {rows(q)}.
Var kl_div(Var p, Var q);

// Row-wise KL(softmax(a_m) || softmax(b_m)) from unnormalized logits,
// evaluated through log-softmax so saturated rows stay finite. a has one
// row (broadcast) or as many rows as b. Result shape {rows(b)}.
Var kl_div_logits(Var a, Var b);

// Pairwise cosine similarity between rows: (M x D, N x D) -> M x N.
Var cosine_sim(Var a, Var b);

// Mean over rows of -log softmax(logits)[label].
Var cross_entropy_from_logits(Var logits, std::span<const int> labels);

// Replaces the label column of a cosine matrix with cos(acos(c) + margin).
// Cosines are clamped to [-1 + 1e-7, 1 - 1e-7] before the arccos.
Var angular_margin(Var cosines, std::span<const int> labels, double margin);

Var slice_rows(Var a, std::size_t begin, std::size_t count);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);

// n x n additive attention bias for one head, gathered from a
// (2*max_dist + 1) x heads table by clipped signed offset j - i.
Var rel_pos_bias(Var table, std::size_t n, std::size_t max_dist, std::size_t head);

// Index helper shared by the op and the plain-value bias builder.
inline std::size_t rel_pos_index(std::size_t i, std::size_t j, std::size_t max_dist) {
  const long long d = static_cast<long long>(j) - static_cast<long long>(i);
  const long long r = static_cast<long long>(max_dist);
  const long long c = d < -r ? -r : (d > r ? r : d);
  return static_cast<std::size_t>(c + r);
}

}  // namespace dtsv::ad
