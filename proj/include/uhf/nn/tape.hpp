#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "uhf/nn/tensor.hpp"

namespace uhf::nn {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Records primitive operations in execution order for reverse-mode
/// accumulation. Nodes are created after their inputs, so a reverse sweep
/// visits every node after all of its consumers.
///
/// A tape is single-use: backward() releases the saved closures and
/// intermediate gradients. Parameter leaves add their gradient into the
/// bound Tensor's grad buffer, so successive tapes accumulate until the
/// optimizer clears them.
class Tape {
 public:
  /// Called with the node's own handle; reads its gradient and accumulates into inputs.
  using Backward = std::function<void(Tape&, Var)>;

  Var constant(Tensor value);
  /// Gradient-tracked leaf bound to `param`, which must outlive the tape.
  Var parameter(Tensor& param);
  /// Leaf that reads `value` in place without tracking gradients; `value`
  /// must outlive the tape.
  Var reference(const Tensor& value);
  Var record(Tensor value, bool needs_grad, Backward backward);

  const Tensor& value(Var v) const {
    const auto& n = nodes_.at(v.id);
    return n.ref != nullptr ? *n.ref : n.value;
  }
  const Shape& shape(Var v) const { return value(v).shape(); }
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
  /// Gradient buffer of a node, zero-allocated on first access.
  std::span<double> grad(Var v);

  std::size_t size() const { return nodes_.size(); }
  bool replayed() const { return replayed_; }

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    Buffer grad;
    Backward backward;
    Tensor* param = nullptr;
    const Tensor* ref = nullptr;
    bool needs_grad = false;
  };
  std::deque<Node> nodes_;
  bool replayed_ = false;
};

}  // namespace uhf::nn
