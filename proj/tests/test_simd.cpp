// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dtsv/rng.hpp"
#include "dtsv/simd/kernels.hpp"

using namespace dtsv;
using simd::GemmArgs;
using simd::Isa;

namespace {

std::vector<Isa> available() {
  std::vector<Isa> out;
  for (Isa i : {Isa::scalar, Isa::avx2, Isa::neon}) {
    if (simd::isa_supported(i)) out.push_back(i);
  }
  return out;
}

std::vector<double> randv(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// Textbook triple loop.
void naive_gemm(const GemmArgs& g) {
  for (std::size_t i = 0; i < g.m; ++i) {
    for (std::size_t j = 0; j < g.n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < g.k; ++k) {
        const double a = g.trans_a ? g.a[k * g.lda + i] : g.a[i * g.lda + k];
        const double b = g.trans_b ? g.b[j * g.ldb + k] : g.b[k * g.ldb + j];
        s += a * b;
      }
      g.c[i * g.ldc + j] = (g.accumulate ? g.c[i * g.ldc + j] : 0.0) + s;
    }
  }
}

}  // namespace

TEST_CASE("scalar table is always available") {
  CHECK(simd::isa_supported(Isa::scalar));
  CHECK(simd::kernels_for(Isa::scalar).isa == Isa::scalar);
  CHECK(simd::isa_name(Isa::avx2) == "avx2");
}

TEST_CASE("unsupported isa is rejected") {
  for (Isa i : {Isa::avx2, Isa::neon}) {
    if (!simd::isa_supported(i)) CHECK_THROWS(simd::kernels_for(i));
  }
}

TEST_CASE("dot and axpy agree with the scalar reference") {
  Rng rng(11);
  const auto& ref = simd::kernels_for(Isa::scalar);
  for (Isa isa : available()) {
    const auto& kt = simd::kernels_for(isa);
    CAPTURE(simd::isa_name(isa));
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 17u, 64u, 129u, 1000u}) {
      const auto a = randv(n, rng);
      const auto b = randv(n, rng);
      const double want = ref.dot(a.data(), b.data(), n);
      CHECK(kt.dot(a.data(), b.data(), n) == doctest::Approx(want).epsilon(1e-13));

      auto y1 = b;
      auto y2 = b;
      ref.axpy(0.37, a.data(), y1.data(), n);
      kt.axpy(0.37, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15);
    }
  }
}

TEST_CASE("gemm variants match a naive triple loop for every transpose case") {
  Rng rng(12);
  const std::size_t shapes[][3] = {{1, 1, 1},   {2, 3, 5},    {4, 8, 16},   {5, 9, 3},
                                   {13, 17, 7}, {31, 1, 64},  {64, 64, 64}, {70, 130, 300},
                                   {3, 1100, 2}, {201, 16, 201}};
  for (Isa isa : available()) {
    const auto& kt = simd::kernels_for(isa);
    CAPTURE(simd::isa_name(isa));
    for (const auto& s : shapes) {
      for (int mode = 0; mode < 8; ++mode) {
        const std::size_t m = s[0], n = s[1], k = s[2];
        GemmArgs g;
        g.trans_a = mode & 1;
        g.trans_b = mode & 2;
        g.accumulate = mode & 4;
        g.m = m;
        g.n = n;
        g.k = k;
        // Padded strides exercise lda/ldb/ldc handling.
        g.lda = (g.trans_a ? m : k) + 1;
        g.ldb = (g.trans_b ? k : n) + 2;
        g.ldc = n + 3;
        const auto a = randv((g.trans_a ? k : m) * g.lda, rng);
        const auto b = randv((g.trans_b ? n : k) * g.ldb, rng);
        const auto c0 = randv(m * g.ldc, rng);
        auto want = c0;
        auto got = c0;
        g.a = a.data();
        g.b = b.data();
        g.c = want.data();
        naive_gemm(g);
        g.c = got.data();
        kt.gemm(g);
        double err = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) err = std::max(err, std::abs(got[i * g.ldc + j] - want[i * g.ldc + j]));
          // Padding columns must be untouched.
          for (std::size_t j = n; j < g.ldc; ++j) CHECK(got[i * g.ldc + j] == c0[i * g.ldc + j]);
        }
        CAPTURE(m);
        CAPTURE(n);
        CAPTURE(k);
        CAPTURE(mode);
        CHECK(err <= 1e-12 * static_cast<double>(k + 1));
      }
    }
  }
}

TEST_CASE("set_active_isa switches the dispatch table") {
  const Isa before = simd::active_kernels().isa;
  simd::set_active_isa(Isa::scalar);
  CHECK(simd::active_kernels().isa == Isa::scalar);
  simd::set_active_isa(before);
  CHECK(simd::active_kernels().isa == before);
}
