// SPDX-License-Identifier: Apache-2.0
#include "dtsv/simd/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

#include "gemm_impl.hpp"

namespace dtsv::simd::detail {
namespace {

struct Neon {
  using reg = float64x2_t;
  static constexpr std::size_t width = 2;
  static reg zero() { return vdupq_n_f64(0.0); }
  static reg set1(double x) { return vdupq_n_f64(x); }
  static reg load(const double* p) { return vld1q_f64(p); }
  static void store(double* p, reg v) { vst1q_f64(p, v); }
  static reg add(reg a, reg b) { return vaddq_f64(a, b); }
  static reg fma(reg a, reg b, reg c) { return vfmaq_f64(c, a, b); }
  static double hsum(reg v) { return vaddvq_f64(v); }
};

using K = VecKernels<Neon>;

}  // namespace

const KernelTable* neon_table() {
  static const KernelTable table{Isa::neon, &K::dot, &K::axpy, &K::gemm};
  return &table;
}

}  // namespace dtsv::simd::detail

#else

namespace dtsv::simd::detail {
const KernelTable* neon_table() { return nullptr; }
}  // namespace dtsv::simd::detail

#endif
