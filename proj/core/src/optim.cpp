#include "depthpl/optim.hpp"

#include <algorithm>
#include <cmath>

#include "depthpl/error.hpp"

namespace depthpl {

Adam::Adam(ParameterSet& params, AdamOptions options) : params_(params), options_(options) {
  for (const auto& e : params_.entries()) {
    m_.emplace_back(e.value.size(), Real(0));
    v_.emplace_back(e.value.size(), Real(0));
  }
}

void Adam::step(Real learning_rate) {
  ++steps_;
  const Real t = static_cast<Real>(steps_);
  const Real c1 = 1 - std::pow(options_.beta1, t);
  const Real c2 = 1 - std::pow(options_.beta2, t);
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& param = params_[p];
    const auto grad = param.grad();
    if (grad.empty()) continue;
    auto values = param.mutable_values();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const Real g = grad[i];
      m[i] = options_.beta1 * m[i] + (1 - options_.beta1) * g;
      v[i] = options_.beta2 * v[i] + (1 - options_.beta2) * g * g;
      values[i] -= learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.epsilon);
    }
  }
}

Real linear_decay_lr(Real base, std::size_t epoch, std::size_t decay_start, std::size_t total) {
  if (epoch <= decay_start || total <= decay_start) return base;
  const Real frac = static_cast<Real>(epoch - decay_start) / static_cast<Real>(total - decay_start);
  return std::max(Real(0), base * (1 - frac));
}

}  // namespace depthpl
