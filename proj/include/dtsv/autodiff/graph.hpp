// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode differentiation. Nodes are appended in
// evaluation order, so the tape is already topologically sorted and
// backward is a single reverse sweep. Each op's backward closure adds into
// its parents' gradients, which gives additive accumulation at fan-out.
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>

#include "dtsv/autodiff/tensor.hpp"

namespace dtsv::ad {

class Graph;

// Handle to a node on a Graph's tape.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf without gradient.
  Var constant(Tensor value);
  // Leaf that receives a gradient.
  Var input(Tensor value);
  // Leaf bound to a Parameter; repeated calls return the same node.
  Var param(const Parameter& p);

  // Appends an op result. The node requires grad iff any parent does; the
  // backward closure is dropped otherwise. Non-finite values are an error.
  Var record(Tensor value, std::span<const Var> parents, BackwardFn backward,
             const char* op_name);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient of a node after backward(); empty tensor when unreached.
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  // Zero-allocated on first use; only valid on nodes that require grad.
  Tensor& grad_accumulator(std::size_t id);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape once in reverse.
  void backward(Var loss);

  // Gradient reaching a bound Parameter; nullptr when it was not used.
  const Tensor* param_grad(const Parameter& p) const;

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var push(Tensor value, bool requires_grad, BackwardFn backward);

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  bool backward_done_ = false;
};

inline const Tensor& Var::value() const { return graph->value(*this); }

}  // namespace dtsv::ad
