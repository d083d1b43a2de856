// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace dtsv::cli {

// Exit codes: 0 success, 1 usage or config error, 2 I/O error, 3 numeric failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitNumeric = 3;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dtsv::cli
