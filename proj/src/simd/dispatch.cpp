// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <string>

#include "dtsv/error.hpp"
#include "dtsv/simd/kernels.hpp"

namespace dtsv::simd {
namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* pick_default() {
  const char* env = std::getenv("DTSV_SIMD");
  const std::string want = env ? env : "auto";
  if (want == "scalar") return &detail::scalar_table();
  if (want == "avx2") return &kernels_for(Isa::avx2);
  if (want == "neon") return &kernels_for(Isa::neon);
  if (want != "auto") fail("DTSV_SIMD: unknown value '" + want + "'");
  if (isa_supported(Isa::avx2)) return detail::avx2_table();
  if (isa_supported(Isa::neon)) return detail::neon_table();
  return &detail::scalar_table();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{pick_default()};
  return slot;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2: return detail::avx2_table() != nullptr && cpu_has_avx2_fma();
    case Isa::neon: return detail::neon_table() != nullptr;
  }
  return false;
}

const KernelTable& kernels_for(Isa isa) {
  if (!isa_supported(isa)) fail("SIMD variant '" + std::string(isa_name(isa)) + "' unavailable");
  switch (isa) {
    case Isa::avx2: return *detail::avx2_table();
    case Isa::neon: return *detail::neon_table();
    case Isa::scalar: break;
  }
  return detail::scalar_table();
}

const KernelTable& active_kernels() { return *active_slot().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) { active_slot().store(&kernels_for(isa)); }

}  // namespace dtsv::simd
