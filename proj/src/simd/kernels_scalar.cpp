// SPDX-License-Identifier: Apache-2.0
//
// Reference kernels: the definitions every vector variant is tested against.
#include "dtsv/simd/kernels.hpp"

namespace dtsv::simd::detail {
namespace {

double dot_ref(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_ref(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_ref(const GemmArgs& g) {
  for (std::size_t i = 0; i < g.m; ++i) {
    for (std::size_t j = 0; j < g.n; ++j) {
      double s = 0.0;
      for (std::size_t kk = 0; kk < g.k; ++kk) {
        const double a = g.trans_a ? g.a[kk * g.lda + i] : g.a[i * g.lda + kk];
        const double b = g.trans_b ? g.b[j * g.ldb + kk] : g.b[kk * g.ldb + j];
        s += a * b;
      }
      double& c = g.c[i * g.ldc + j];
      c = g.accumulate ? c + s : s;
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::scalar, &dot_ref, &axpy_ref, &gemm_ref};
  return table;
}

}  // namespace dtsv::simd::detail
