#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "depthpl/real.hpp"

namespace depthpl {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tape;

namespace detail {

struct TensorState {
  Shape shape;
  std::vector<Real> values;
  std::vector<Real> grad;  // empty until a gradient reaches this tensor
  Tape* tape = nullptr;
};

}  // namespace detail

/// Dense row-major array of Real with an optional link to a gradient tape.
///
/// Copies share storage. A tensor that is not on a tape is immutable once
/// built, except through mutable_values() which is how optimizers update
/// parameters between steps.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<Real> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, Real value);
  static Tensor scalar(Real value);

  const Shape& shape() const { return state_->shape; }
  std::size_t rank() const { return state_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return state_->values.size(); }

  std::span<const Real> values() const { return state_->values; }
  /// Throws TapeError if the tensor is currently recorded on a tape.
  std::span<Real> mutable_values();
  Real item() const;
  Real at(std::size_t flat_index) const { return state_->values.at(flat_index); }

  bool on_tape() const { return state_->tape != nullptr; }
  Tape* tape() const { return state_->tape; }
  /// Gradient of the last backward pass, empty if none reached this tensor.
  std::span<const Real> grad() const { return state_->grad; }

  /// Deep copy with no tape link.
  Tensor detach() const;

  const std::shared_ptr<detail::TensorState>& state() const { return state_; }

 private:
  std::shared_ptr<detail::TensorState> state_;
};

/// Append-only record of differentiable operations.
///
/// Nodes are replayed in strict reverse order by backward(). A tape may be
/// consumed once; reset() clears it for re-recording. Tensors created on the
/// tape, and leaves registered with watch(), are detached when the tape is
/// reset or destroyed.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  /// Registers a leaf so it receives gradients. Returns the same tensor.
  Tensor watch(const Tensor& leaf);

  /// Seeds d(root)/d(root) = 1 and propagates to every tensor on the tape.
  void backward(const Tensor& root);

  void reset();

  std::size_t node_count() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  /// Used by operation implementations: links `output` to this tape and
  /// stores the closure that propagates output->grad into the inputs.
  void record(const std::shared_ptr<detail::TensorState>& output, BackwardFn fn);

  /// Order in which node closures ran during the last backward pass,
  /// as indices into the record order. Exposed for tests.
  const std::vector<std::size_t>& last_backward_order() const { return backward_order_; }

 private:
  struct Node {
    std::shared_ptr<detail::TensorState> output;
    BackwardFn fn;
  };

  void detach_all();

  std::vector<Node> nodes_;
  std::vector<std::shared_ptr<detail::TensorState>> leaves_;
  std::vector<std::size_t> backward_order_;
  bool consumed_ = false;
};

namespace detail {

/// Returns the gradient buffer of `state` (allocated and zeroed on first use)
/// or nullptr when the state is not on a tape.
std::vector<Real>* grad_buffer(TensorState& state);

/// Finds the tape shared by all taped inputs; nullptr if none is taped.
/// Throws TapeError when inputs live on different tapes.
Tape* common_tape(std::initializer_list<const Tensor*> inputs, const char* kind);
Tape* common_tape(std::span<const Tensor> inputs, const char* kind);

}  // namespace detail

}  // namespace depthpl
