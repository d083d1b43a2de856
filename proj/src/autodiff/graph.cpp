// SPDX-License-Identifier: Apache-2.0
#include "dtsv/autodiff/graph.hpp"

#include "dtsv/error.hpp"

namespace dtsv::ad {

Var Graph::push(Tensor value, bool requires_grad, BackwardFn backward) {
  nodes_.push_back(Node{std::move(value), Tensor{}, std::move(backward), requires_grad});
  return Var{this, nodes_.size() - 1};
}

Var Graph::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Graph::input(Tensor value) { return push(std::move(value), true, nullptr); }

Var Graph::param(const Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{this, it->second};
  Var v = push(p.value, true, nullptr);
  param_nodes_.emplace(&p, v.id);
  return v;
}

Var Graph::record(Tensor value, std::span<const Var> parents, BackwardFn backward,
                  const char* op_name) {
  if (!value.all_finite()) fail_numeric(std::string(op_name) + " produced a non-finite value");
  bool needs = false;
  for (const Var& p : parents) {
    require(p.graph == this, std::string(op_name) + ": operand from another graph");
    needs = needs || nodes_[p.id].requires_grad;
  }
  return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
}

Tensor& Graph::grad_accumulator(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Graph::backward(Var loss) {
  require(!backward_done_, "backward() already ran on this graph");
  require(loss.graph == this, "backward: loss from another graph");
  require(value(loss).size() == 1, "backward: loss must be a single value, got shape " +
                                       shape_str(value(loss).shape()));
  backward_done_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  grad_accumulator(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

const Tensor* Graph::param_grad(const Parameter& p) const {
  auto it = param_nodes_.find(&p);
  if (it == param_nodes_.end()) return nullptr;
  const Tensor& g = nodes_[it->second].grad;
  return g.empty() ? nullptr : &g;
}

}  // namespace dtsv::ad
