// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dtsv {

// Broad failure class; the CLI maps these onto exit codes.
enum class ErrorKind {
  invalid_argument,  // bad config value, shape mismatch, contract violation
  io,                // unreadable/unwritable file, malformed file contents
  numeric,           // NaN/Inf or other non-finite arithmetic
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(const std::string& what) {
  throw Error(ErrorKind::invalid_argument, what);
}

[[noreturn]] inline void fail_io(const std::string& what) {
  throw Error(ErrorKind::io, what);
}

[[noreturn]] inline void fail_numeric(const std::string& what) {
  throw Error(ErrorKind::numeric, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(what);
}

}  // namespace dtsv
