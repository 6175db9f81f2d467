#include "uhf/nn/tape.hpp"

#include <stdexcept>

namespace uhf::nn {

Var Tape::constant(Tensor value) {
  if (replayed_) throw std::logic_error("cannot record on a replayed tape");
  nodes_.push_back({std::move(value), {}, {}, nullptr, nullptr, false});
  return {nodes_.size() - 1};
}

Var Tape::parameter(Tensor& param) {
  if (replayed_) throw std::logic_error("cannot record on a replayed tape");
  nodes_.push_back({Tensor{}, {}, {}, &param, &param, true});
  return {nodes_.size() - 1};
}

Var Tape::reference(const Tensor& value) {
  if (replayed_) throw std::logic_error("cannot record on a replayed tape");
  nodes_.push_back({Tensor{}, {}, {}, nullptr, &value, false});
  return {nodes_.size() - 1};
}

Var Tape::record(Tensor value, bool needs_grad, Backward backward) {
  if (replayed_) throw std::logic_error("cannot record on a replayed tape");
  nodes_.push_back(
      {std::move(value), {}, needs_grad ? std::move(backward) : Backward{}, nullptr, nullptr, needs_grad});
  return {nodes_.size() - 1};
}

std::span<double> Tape::grad(Var v) {
  auto& node = nodes_.at(v.id);
  const std::size_t n = value(v).size();
  if (node.grad.size() != n) node.grad.assign(n, 0.0);
  return node.grad;
}

void Tape::backward(Var loss) {
  if (replayed_) throw std::logic_error("tape already replayed; its buffers were released");
  if (loss.id >= nodes_.size()) throw std::out_of_range("loss node not on this tape");
  if (value(loss).size() != 1) throw ShapeError("backward needs a scalar loss");
  replayed_ = true;
  if (!nodes_[loss.id].needs_grad) return;
  grad(loss)[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.grad.empty()) continue;
    if (node.backward) node.backward(*this, Var{i});
    if (node.param != nullptr) {
      auto g = node.param->grad();
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += node.grad[k];
    }
  }
  for (auto& node : nodes_) {
    node.backward = nullptr;
    node.grad = {};
  }
}

}  // namespace uhf::nn
