#include "depthpl/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "depthpl/error.hpp"

namespace depthpl {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : Tensor(Shape{}, std::vector<Real>{Real(0)}) {}

Tensor::Tensor(Shape shape, std::vector<Real> values)
    : state_(std::make_shared<detail::TensorState>()) {
  if (shape_size(shape) != values.size()) {
    throw ShapeError("tensor: shape " + shape_string(shape) + " holds " +
                     std::to_string(shape_size(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  state_->shape = std::move(shape);
  state_->values = std::move(values);
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), Real(0)); }

Tensor Tensor::full(Shape shape, Real value) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<Real>(n, value));
}

Tensor Tensor::scalar(Real value) { return Tensor(Shape{}, {value}); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                     shape_string(shape()));
  }
  return state_->shape[axis];
}

std::span<Real> Tensor::mutable_values() {
  if (on_tape()) throw TapeError("tensor: cannot mutate a tensor recorded on a tape");
  return state_->values;
}

Real Tensor::item() const {
  if (size() != 1) throw ShapeError("tensor: item() on shape " + shape_string(shape()));
  return state_->values[0];
}

Tensor Tensor::detach() const { return Tensor(state_->shape, state_->values); }

Tape::~Tape() { detach_all(); }

Tensor Tape::watch(const Tensor& leaf) {
  auto& state = *leaf.state();
  if (state.tape != nullptr && state.tape != this) {
    throw TapeError("tape: tensor is already watched by another tape");
  }
  if (consumed_) throw TapeError("tape: cannot watch on a consumed tape; call reset()");
  if (state.tape == nullptr) {
    state.tape = this;
    leaves_.push_back(leaf.state());
  }
  state.grad.assign(state.values.size(), Real(0));
  return leaf;
}

void Tape::record(const std::shared_ptr<detail::TensorState>& output, BackwardFn fn) {
  if (consumed_) throw TapeError("tape: cannot record on a consumed tape; call reset()");
  output->tape = this;
  nodes_.push_back(Node{output, std::move(fn)});
}

void Tape::backward(const Tensor& root) {
  if (consumed_) throw TapeError("tape: backward already ran on this tape; re-record first");
  if (root.size() != 1) {
    throw TapeError("tape: backward root must be scalar, got shape " + shape_string(root.shape()));
  }
  if (root.tape() != this) throw TapeError("tape: backward root is not on this tape");
  consumed_ = true;
  backward_order_.clear();
  auto& root_state = *root.state();
  root_state.grad.assign(1, Real(1));
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& node = nodes_[i];
    if (node.output->grad.empty()) continue;
    backward_order_.push_back(i);
    node.fn();
  }
}

void Tape::reset() {
  detach_all();
  nodes_.clear();
  leaves_.clear();
  backward_order_.clear();
  consumed_ = false;
}

void Tape::detach_all() {
  for (auto& node : nodes_) {
    if (node.output->tape == this) node.output->tape = nullptr;
  }
  for (auto& leaf : leaves_) {
    if (leaf->tape == this) leaf->tape = nullptr;
  }
}

namespace detail {

std::vector<Real>* grad_buffer(TensorState& state) {
  if (state.tape == nullptr) return nullptr;
  if (state.grad.size() != state.values.size()) state.grad.assign(state.values.size(), Real(0));
  return &state.grad;
}

Tape* common_tape(std::initializer_list<const Tensor*> inputs, const char* kind) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (t->tape() == nullptr) continue;
    if (tape != nullptr && tape != t->tape()) {
      throw TapeError(std::string(kind) + ": inputs are recorded on different tapes");
    }
    tape = t->tape();
  }
  return tape;
}

Tape* common_tape(std::span<const Tensor> inputs, const char* kind) {
  Tape* tape = nullptr;
  for (const Tensor& t : inputs) {
    if (t.tape() == nullptr) continue;
    if (tape != nullptr && tape != t.tape()) {
      throw TapeError(std::string(kind) + ": inputs are recorded on different tapes");
    }
    tape = t.tape();
  }
  return tape;
}

}  // namespace detail

}  // namespace depthpl
