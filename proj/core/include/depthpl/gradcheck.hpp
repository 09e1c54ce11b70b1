#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "depthpl/tensor.hpp"

namespace depthpl {

struct GradCheckOptions {
  Real step = Real(1e-5);
  Real tolerance = Real(1e-3);
  /// Denominator floor for the relative error, so coordinates whose true
  /// gradient is zero are compared in absolute terms.
  Real floor = Real(1e-8);
  /// Flat coordinates to probe; empty means all of them.
  std::vector<std::size_t> coordinates;
};

struct GradCheckReport {
  Real max_rel_error = 0;
  std::size_t worst_coordinate = 0;
  std::size_t checked = 0;
  std::vector<std::size_t> flagged;  // coordinates with error above tolerance
  std::vector<Real> analytic;
  std::vector<Real> numeric;
  bool passed() const { return flagged.empty(); }
};

/// Scalar function of one tensor. Called once with a taped argument (for the
/// analytic gradient) and repeatedly with untaped arguments.
using ScalarFunction = std::function<Tensor(const Tensor&)>;

/// Compares the tape gradient of `f` at `point` with central differences.
/// Throws DataError if f is non-finite at the point or any probe.
GradCheckReport check_gradients(const ScalarFunction& f, const Tensor& point,
                                const GradCheckOptions& options = {});

}  // namespace depthpl
