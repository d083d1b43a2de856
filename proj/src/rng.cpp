// SPDX-License-Identifier: Apache-2.0
#include "dtsv/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "dtsv/error.hpp"

namespace dtsv {

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  require(n > 0, "uniform_int: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& text) {
  std::istringstream is(text);
  is >> engine_;
  if (!is) fail_io("corrupt RNG state");
}

}  // namespace dtsv
