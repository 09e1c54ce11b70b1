#pragma once

#include <cstddef>
#include <vector>

#include "depthpl/networks.hpp"

namespace depthpl {

struct AdamOptions {
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real epsilon = Real(1e-8);
};

/// Adam over a ParameterSet. step() reads each parameter's gradient from the
/// last backward pass; the tape must be reset before stepping.
class Adam {
 public:
  explicit Adam(ParameterSet& params, AdamOptions options = {});

  void step(Real learning_rate);
  std::size_t steps() const { return steps_; }

 private:
  ParameterSet& params_;
  AdamOptions options_;
  std::vector<std::vector<Real>> m_, v_;
  std::size_t steps_ = 0;
};

/// Constant until decay_start, then linear towards zero at `total` epochs.
/// Epochs are counted from 0.
Real linear_decay_lr(Real base, std::size_t epoch, std::size_t decay_start, std::size_t total);

}  // namespace depthpl
