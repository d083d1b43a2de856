// SPDX-License-Identifier: Apache-2.0
#include "dtsv/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "dtsv/error.hpp"

namespace dtsv::ad {
namespace {

double probe_step(double eps, double x) { return eps * std::max(1.0, std::abs(x)); }

void note(GradCheckResult& r, std::size_t input, std::size_t index, double a, double n) {
  const double e = relative_error(a, n);
  if (r.probes == 0 || e > r.max_rel_error) {
    r.max_rel_error = e;
    r.worst_input = input;
    r.worst_index = index;
    r.analytic = a;
    r.numeric = n;
  }
  ++r.probes;
}

double checked(double v) {
  if (!std::isfinite(v)) fail_numeric("grad_check: function is non-finite at a probe point");
  return v;
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps) {
  require(eps > 0.0, "grad_check: eps must be positive");
  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(g.input(t));
    const Var out = f(g, vars);
    checked(out.value()[0]);
    g.backward(out);
    for (const Var& v : vars) {
      const Tensor& gr = g.grad(v);
      analytic.push_back(gr.empty() ? Tensor(v.value().shape()) : gr);
    }
  }
  auto evaluate = [&](const std::vector<Tensor>& xs) {
    Graph g;
    std::vector<Var> vars;
    for (const Tensor& t : xs) vars.push_back(g.constant(t));
    return checked(f(g, vars).value()[0]);
  };
  GradCheckResult result;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x = inputs[k][i];
      const double h = probe_step(eps, x);
      probe[k][i] = x + h;
      const double fp = evaluate(probe);
      probe[k][i] = x - h;
      const double fm = evaluate(probe);
      probe[k][i] = x;
      note(result, k, i, analytic[k][i], (fp - fm) / (2.0 * h));
    }
  }
  return result;
}

GradCheckResult grad_check_parameters(const std::function<Var(Graph&)>& f,
                                      std::span<Parameter* const> params, double eps) {
  require(eps > 0.0, "grad_check: eps must be positive");
  std::vector<Tensor> analytic;
  {
    Graph g;
    for (Parameter* p : params) g.param(*p);
    const Var out = f(g);
    checked(out.value()[0]);
    g.backward(out);
    for (Parameter* p : params) {
      const Tensor* gr = g.param_grad(*p);
      analytic.push_back(gr ? *gr : Tensor(p->value.shape()));
    }
  }
  auto evaluate = [&] {
    Graph g;
    return checked(f(g).value()[0]);
  };
  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& v = params[k]->value;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double x = v[i];
      const double h = probe_step(eps, x);
      v[i] = x + h;
      const double fp = evaluate();
      v[i] = x - h;
      const double fm = evaluate();
      v[i] = x;
      note(result, k, i, analytic[k][i], (fp - fm) / (2.0 * h));
    }
  }
  return result;
}

}  // namespace dtsv::ad
