// SPDX-License-Identifier: Apache-2.0
//
// Compiled with -mavx2 -mfma. Everything here has internal linkage except
// the table accessor, so no AVX2 code can leak into shared inline symbols.
#include "dtsv/simd/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

#include "gemm_impl.hpp"

namespace dtsv::simd::detail {
namespace {

struct Avx2 {
  using reg = __m256d;
  static constexpr std::size_t width = 4;
  static reg zero() { return _mm256_setzero_pd(); }
  static reg set1(double x) { return _mm256_set1_pd(x); }
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    const __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
  }
};

using K = VecKernels<Avx2>;

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{Isa::avx2, &K::dot, &K::axpy, &K::gemm};
  return &table;
}

}  // namespace dtsv::simd::detail

#else

namespace dtsv::simd::detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace dtsv::simd::detail

#endif
