// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "negprompt/numcore/tensor.hpp"

namespace negprompt {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  bool valid() const noexcept { return tape != nullptr && id >= 0; }
};

/// Named parameter tensors. Ordered so iteration (and therefore optimizer
/// updates and checkpoint layout) is deterministic.
using ParamMap = std::map<std::string, Tensor>;

/// Reverse-mode gradient tape.
///
/// A forward pass records one node per primitive together with a closure that
/// pushes the node's output gradient into its inputs. `backward` replays the
/// closures in reverse order. Parameters are leaves identified by name; a
/// parameter bound twice resolves to the same node.
///
/// Non-smooth primitives (relu, max, hinge, |x|, clamps) and discrete choices
/// made from recorded values (matching, top-k) call `note_branch`, which folds
/// the decision into a running signature. Two forward passes with equal
/// signatures took the same branch everywhere; the gradient checker relies on
/// this to exclude probes that straddle a kink.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  /// A tape with `track_gradients == false` records values only. Useful for
  /// inference where closures and gradient buffers would be wasted work.
  explicit Tape(bool track_gradients = true) : track_(track_gradients) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var param(const std::string& name, const Tensor& value);
  /// Binds `name` from `params`; a missing name is a ShapeError.
  Var param(const ParamMap& params, const std::string& name);

  /// Records an op node. `inputs` determine whether the node needs a gradient.
  Var record(Tensor value, const std::vector<int>& inputs, Backward backward);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  bool tracking() const noexcept { return track_; }

  /// Gradient buffer for node `id`, zero-allocated on first access.
  Tensor& grad(int id);
  bool has_grad(int id) const;

  /// Seeds d(output)/d(output) = 1 and runs all closures in reverse order.
  /// `output` must hold a single element.
  void backward(Var output);

  /// One entry per bound parameter, zero-filled when the parameter did not
  /// influence the output.
  ParamMap param_grads() const;
  const std::map<std::string, int>& param_ids() const noexcept { return param_ids_; }

  void note_branch(std::uint64_t decision);
  std::uint64_t branch_signature() const noexcept { return signature_; }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward backward;
    bool needs_grad = false;
  };

  bool track_;
  std::vector<Node> nodes_;
  std::map<std::string, int> param_ids_;
  std::uint64_t signature_ = 0xcbf29ce484222325ULL;
};

}  // namespace negprompt
