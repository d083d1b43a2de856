// SPDX-License-Identifier: Apache-2.0
//
// Double-precision inner-loop kernels. Every kernel has a plain scalar
// reference implementation plus vectorized variants (AVX2+FMA on x86-64,
// NEON on AArch64). The active table is chosen once at runtime from CPU
// features and may be pinned with DTSV_SIMD=scalar|avx2|neon.
#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace dtsv::simd {

enum class Isa { scalar, avx2, neon };

// Row-major C(m x n) = op(A) * op(B) [+ C when accumulate].
// op(A) is m x k, op(B) is k x n; lda/ldb/ldc are row strides of the
// stored (untransposed) matrices.
struct GemmArgs {
  bool trans_a = false;
  bool trans_b = false;
  std::size_t m = 0, n = 0, k = 0;
  const double* a = nullptr;
  std::size_t lda = 0;
  const double* b = nullptr;
  std::size_t ldb = 0;
  double* c = nullptr;
  std::size_t ldc = 0;
  bool accumulate = false;
};

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*gemm)(const GemmArgs& args);
};

std::string_view isa_name(Isa isa);

bool isa_supported(Isa isa);

// Throws if the ISA is not supported on this machine.
const KernelTable& kernels_for(Isa isa);

const KernelTable& active_kernels();

// Pins the active table (tests and benchmarks). Not thread-safe with
// concurrent kernel calls.
void set_active_isa(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active_kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active_kernels().axpy(alpha, x.data(), y.data(), x.size());
}

inline void gemm(const GemmArgs& args) { active_kernels().gemm(args); }

namespace detail {
const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled in
const KernelTable* neon_table();
}  // namespace detail

}  // namespace dtsv::simd
