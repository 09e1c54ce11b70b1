#include "depthpl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "depthpl/error.hpp"

namespace depthpl {

namespace {

Real evaluate(const ScalarFunction& f, const Tensor& x, const char* where) {
  const Tensor y = f(x);
  if (y.size() != 1) throw ShapeError("check_gradients: function is not scalar-valued");
  const Real v = y.item();
  if (!std::isfinite(v)) {
    throw DataError(std::string("check_gradients: non-finite function value at ") + where);
  }
  return v;
}

}  // namespace

GradCheckReport check_gradients(const ScalarFunction& f, const Tensor& point,
                                const GradCheckOptions& options) {
  GradCheckReport report;
  {
    Tape tape;
    const Tensor x = tape.watch(point.detach());
    const Tensor y = f(x);
    if (y.size() != 1) throw ShapeError("check_gradients: function is not scalar-valued");
    if (!std::isfinite(y.item())) {
      throw DataError("check_gradients: non-finite function value at the base point");
    }
    if (y.tape() == nullptr) {
      report.analytic.assign(point.size(), Real(0));
    } else {
      tape.backward(y);
      report.analytic.assign(x.grad().begin(), x.grad().end());
      if (report.analytic.empty()) report.analytic.assign(point.size(), Real(0));
    }
  }

  std::vector<std::size_t> coords = options.coordinates;
  if (coords.empty()) {
    coords.resize(point.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  }

  report.numeric.assign(point.size(), Real(0));
  const std::vector<Real> base(point.values().begin(), point.values().end());
  for (std::size_t c : coords) {
    if (c >= base.size()) throw ShapeError("check_gradients: coordinate out of range");
    std::vector<Real> plus = base, minus = base;
    plus[c] += options.step;
    minus[c] -= options.step;
    const Real fp = evaluate(f, Tensor(point.shape(), std::move(plus)), "a probe point");
    const Real fm = evaluate(f, Tensor(point.shape(), std::move(minus)), "a probe point");
    const Real numeric = (fp - fm) / (2 * options.step);
    report.numeric[c] = numeric;
    const Real analytic = report.analytic[c];
    const Real denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
    const Real rel = std::abs(analytic - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_coordinate = c;
    }
    if (rel > options.tolerance) report.flagged.push_back(c);
    ++report.checked;
  }
  return report;
}

}  // namespace depthpl
