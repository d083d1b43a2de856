// SPDX-License-Identifier: Apache-2.0
//
// ISA-generic blocked kernels. V supplies a register type and
// load/store/fma/hsum; each vector TU instantiates this with its own
// internal-linkage policy, so no instantiation is shared across ISAs.
#pragma once

#include <cstddef>
#include <vector>

#include "dtsv/simd/kernels.hpp"

namespace dtsv::simd::detail {

template <class V>
struct VecKernels {
  static constexpr std::size_t W = V::width;

  static double dot(const double* a, const double* b, std::size_t n) {
    auto acc0 = V::zero();
    auto acc1 = V::zero();
    std::size_t i = 0;
    for (; i + 2 * W <= n; i += 2 * W) {
      acc0 = V::fma(V::load(a + i), V::load(b + i), acc0);
      acc1 = V::fma(V::load(a + i + W), V::load(b + i + W), acc1);
    }
    for (; i + W <= n; i += W) acc0 = V::fma(V::load(a + i), V::load(b + i), acc0);
    double s = V::hsum(V::add(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
  }

  static void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const auto va = V::set1(alpha);
    std::size_t i = 0;
    for (; i + W <= n; i += W) V::store(y + i, V::fma(va, V::load(x + i), V::load(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
  }

  // Packed, register-blocked GEMM. op(A) is packed into MR-row panels and
  // op(B) into NR-column panels (zero-padded), so one micro-kernel serves
  // every transpose combination.
  static constexpr std::size_t MR = 4;
  static constexpr std::size_t NR = 2 * W;
  static constexpr std::size_t KC = 256;
  static constexpr std::size_t MC = 64;
  static constexpr std::size_t NC = 1024;

  static double a_at(const GemmArgs& g, std::size_t i, std::size_t k) {
    return g.trans_a ? g.a[k * g.lda + i] : g.a[i * g.lda + k];
  }
  static double b_at(const GemmArgs& g, std::size_t k, std::size_t j) {
    return g.trans_b ? g.b[j * g.ldb + k] : g.b[k * g.ldb + j];
  }

  // Layout: for each MR panel, kc consecutive groups of MR values.
  static void pack_a(const GemmArgs& g, std::size_t i0, std::size_t mc, std::size_t k0, std::size_t kc,
                     double* dst) {
    for (std::size_t ip = 0; ip < mc; ip += MR) {
      const std::size_t rows = mc - ip < MR ? mc - ip : MR;
      for (std::size_t k = 0; k < kc; ++k) {
        for (std::size_t r = 0; r < rows; ++r) dst[r] = a_at(g, i0 + ip + r, k0 + k);
        for (std::size_t r = rows; r < MR; ++r) dst[r] = 0.0;
        dst += MR;
      }
    }
  }

  // Layout: for each NR panel, kc consecutive groups of NR values.
  static void pack_b(const GemmArgs& g, std::size_t k0, std::size_t kc, std::size_t j0, std::size_t nc,
                     double* dst) {
    for (std::size_t jp = 0; jp < nc; jp += NR) {
      const std::size_t cols = nc - jp < NR ? nc - jp : NR;
      if (!g.trans_b && cols == NR) {
        for (std::size_t k = 0; k < kc; ++k) {
          const double* src = g.b + (k0 + k) * g.ldb + j0 + jp;
          for (std::size_t c = 0; c < NR; ++c) dst[c] = src[c];
          dst += NR;
        }
        continue;
      }
      for (std::size_t k = 0; k < kc; ++k) {
        for (std::size_t c = 0; c < cols; ++c) dst[c] = b_at(g, k0 + k, j0 + jp + c);
        for (std::size_t c = cols; c < NR; ++c) dst[c] = 0.0;
        dst += NR;
      }
    }
  }

  // tile(MR x NR) = Apanel * Bpanel over kc.
  static void micro(std::size_t kc, const double* a, const double* b, double* tile) {
    auto c00 = V::zero(), c01 = V::zero(), c10 = V::zero(), c11 = V::zero();
    auto c20 = V::zero(), c21 = V::zero(), c30 = V::zero(), c31 = V::zero();
    for (std::size_t k = 0; k < kc; ++k) {
      const auto b0 = V::load(b);
      const auto b1 = V::load(b + W);
      auto av = V::set1(a[0]);
      c00 = V::fma(av, b0, c00);
      c01 = V::fma(av, b1, c01);
      av = V::set1(a[1]);
      c10 = V::fma(av, b0, c10);
      c11 = V::fma(av, b1, c11);
      av = V::set1(a[2]);
      c20 = V::fma(av, b0, c20);
      c21 = V::fma(av, b1, c21);
      av = V::set1(a[3]);
      c30 = V::fma(av, b0, c30);
      c31 = V::fma(av, b1, c31);
      a += MR;
      b += NR;
    }
    V::store(tile, c00);
    V::store(tile + W, c01);
    V::store(tile + NR, c10);
    V::store(tile + NR + W, c11);
    V::store(tile + 2 * NR, c20);
    V::store(tile + 2 * NR + W, c21);
    V::store(tile + 3 * NR, c30);
    V::store(tile + 3 * NR + W, c31);
  }

  static void gemm(const GemmArgs& g) {
    if (!g.accumulate) {
      for (std::size_t i = 0; i < g.m; ++i) {
        double* c = g.c + i * g.ldc;
        for (std::size_t j = 0; j < g.n; ++j) c[j] = 0.0;
      }
    }
    if (g.m == 0 || g.n == 0 || g.k == 0) return;
    thread_local std::vector<double> abuf, bbuf;
    const std::size_t kc_max = g.k < KC ? g.k : KC;
    const std::size_t nc_max = g.n < NC ? g.n : NC;
    const std::size_t mc_max = g.m < MC ? g.m : MC;
    abuf.resize(((mc_max + MR - 1) / MR) * MR * kc_max);
    bbuf.resize(((nc_max + NR - 1) / NR) * NR * kc_max);
    double tile[MR * NR];

    for (std::size_t j0 = 0; j0 < g.n; j0 += NC) {
      const std::size_t nc = g.n - j0 < NC ? g.n - j0 : NC;
      for (std::size_t k0 = 0; k0 < g.k; k0 += KC) {
        const std::size_t kc = g.k - k0 < KC ? g.k - k0 : KC;
        pack_b(g, k0, kc, j0, nc, bbuf.data());
        for (std::size_t i0 = 0; i0 < g.m; i0 += MC) {
          const std::size_t mc = g.m - i0 < MC ? g.m - i0 : MC;
          pack_a(g, i0, mc, k0, kc, abuf.data());
          for (std::size_t jp = 0; jp < nc; jp += NR) {
            const std::size_t cols = nc - jp < NR ? nc - jp : NR;
            const double* bp = bbuf.data() + (jp / NR) * NR * kc;
            for (std::size_t ip = 0; ip < mc; ip += MR) {
              const std::size_t rows = mc - ip < MR ? mc - ip : MR;
              micro(kc, abuf.data() + (ip / MR) * MR * kc, bp, tile);
              for (std::size_t r = 0; r < rows; ++r) {
                double* c = g.c + (i0 + ip + r) * g.ldc + j0 + jp;
                const double* t = tile + r * NR;
                for (std::size_t q = 0; q < cols; ++q) c[q] += t[q];
              }
            }
          }
        }
      }
    }
  }
};

}  // namespace dtsv::simd::detail
