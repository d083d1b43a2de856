// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "dtsv/cli/cli.hpp"

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Autodiff tapes allocate many short-lived buffers above the default mmap
  // threshold; keeping them on the heap avoids a page-fault storm per sample.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  return dtsv::cli::run(argc, argv, std::cout, std::cerr);
}
