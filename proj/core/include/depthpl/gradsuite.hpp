#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "depthpl/gradcheck.hpp"

namespace depthpl {

struct LossGradResult {
  std::string loss;
  std::size_t points = 0;
  Real max_rel_error = 0;
  bool passed = true;
};

/// Finite-difference checks of every training loss at `points` random
/// smooth points each (away from the kinks of |.| and the warp's integer
/// sample positions).
std::vector<LossGradResult> run_loss_gradchecks(std::uint64_t seed, std::size_t points,
                                                const GradCheckOptions& options = {});

}  // namespace depthpl
