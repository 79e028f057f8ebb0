// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "negprompt/numcore/tape.hpp"

#include "negprompt/errors.hpp"

namespace negprompt {

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor{}, nullptr, false});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(const std::string& name, const Tensor& value) {
  if (auto it = param_ids_.find(name); it != param_ids_.end()) return Var{this, it->second};
  nodes_.push_back(Node{value, Tensor{}, nullptr, track_});
  const int id = static_cast<int>(nodes_.size() - 1);
  param_ids_.emplace(name, id);
  return Var{this, id};
}

Var Tape::param(const ParamMap& params, const std::string& name) {
  if (auto it = param_ids_.find(name); it != param_ids_.end()) return Var{this, it->second};
  auto found = params.find(name);
  if (found == params.end()) throw ShapeError("unknown parameter '" + name + "'");
  return param(name, found->second);
}

Var Tape::record(Tensor value, const std::vector<int>& inputs, Backward backward) {
  bool needs = false;
  if (track_)
    for (int i : inputs) needs = needs || nodes_[static_cast<std::size_t>(i)].needs_grad;
  nodes_.push_back(Node{std::move(value), Tensor{}, needs ? std::move(backward) : nullptr, needs});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.dims(), 0.0);
  return n.grad;
}

bool Tape::has_grad(int id) const { return !nodes_[static_cast<std::size_t>(id)].grad.empty(); }

void Tape::backward(Var output) {
  if (!track_) throw EvaluationError("backward on a tape without gradient tracking");
  if (output.tape != this) throw EvaluationError("backward on a foreign Var");
  if (value(output.id).size() != 1) throw ShapeError("backward needs a scalar output");
  grad(output.id)[0] = 1.0;
  for (int id = output.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

ParamMap Tape::param_grads() const {
  ParamMap out;
  for (const auto& [name, id] : param_ids_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    out.emplace(name, n.grad.empty() ? Tensor(n.value.dims(), 0.0) : n.grad);
  }
  return out;
}

void Tape::note_branch(std::uint64_t decision) {
  // FNV-1a over the 8 bytes of the decision.
  for (int i = 0; i < 8; ++i) {
    signature_ ^= (decision >> (8 * i)) & 0xffU;
    signature_ *= 0x100000001b3ULL;
  }
}

}  // namespace negprompt
