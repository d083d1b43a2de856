// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dtsv/autodiff/graph.hpp"

namespace dtsv::ad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t probes = 0;
};

// Relative error |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

using ScalarFn = std::function<Var(Graph&, std::span<const Var>)>;

// Central differences with step eps * max(1, |x|) on every input element.
GradCheckResult grad_check(const ScalarFn& f, const std::vector<Tensor>& inputs,
                           double eps = 1e-5);

// Same, perturbing Parameter values in place (restored afterwards).
// Graph::param() leaves provide the analytic side.
GradCheckResult grad_check_parameters(const std::function<Var(Graph&)>& f,
                                      std::span<Parameter* const> params, double eps = 1e-5);

}  // namespace dtsv::ad
