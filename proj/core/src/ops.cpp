#include "depthpl/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "depthpl/error.hpp"

namespace depthpl::ops {

namespace {

using detail::TensorState;
using StatePtr = std::shared_ptr<TensorState>;
using MatRM = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

[[noreturn]] void mismatch(const char* kind, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(kind) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                   shape_string(b.shape()));
}

[[noreturn]] void bad_shape(const char* kind, const Tensor& x, const char* expected) {
  throw ShapeError(std::string(kind) + ": expected " + expected + ", got " +
                   shape_string(x.shape()));
}

void require_same(const char* kind, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch(kind, a, b);
}

// Records `make_fn(out_state)` on the common tape of `inputs`, if any.
template <class MakeFn>
Tensor finish(const char* kind, Tensor result, std::initializer_list<const Tensor*> inputs,
              MakeFn&& make_fn) {
  if (Tape* tape = detail::common_tape(inputs, kind)) {
    tape->record(result.state(), make_fn(result.state()));
  }
  return result;
}

template <class F, class D>
Tensor unary(const char* kind, const Tensor& x, F f, D dydx) {
  const auto xv = x.values();
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return finish(kind, Tensor(x.shape(), std::move(out)), {&x}, [&](const StatePtr& so) {
    return [sx = x.state(), so, dydx] {
      auto* gx = detail::grad_buffer(*sx);
      if (!gx) return;
      const auto& g = so->grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*gx)[i] += g[i] * dydx(sx->values[i], so->values[i]);
      }
    };
  });
}

struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void require_axis(const char* kind, const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError(std::string(kind) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_string(x.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  std::vector<Real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return finish("add", Tensor(a.shape(), std::move(out)), {&a, &b}, [&](const StatePtr& so) {
    return [sa = a.state(), sb = b.state(), so] {
      for (auto* s : {sa.get(), sb.get()}) {
        if (auto* g = detail::grad_buffer(*s)) {
          for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += so->grad[i];
        }
      }
    };
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<Real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return finish("sub", Tensor(a.shape(), std::move(out)), {&a, &b}, [&](const StatePtr& so) {
    return [sa = a.state(), sb = b.state(), so] {
      if (auto* g = detail::grad_buffer(*sa)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += so->grad[i];
      }
      if (auto* g = detail::grad_buffer(*sb)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= so->grad[i];
      }
    };
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<Real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return finish("mul", Tensor(a.shape(), std::move(out)), {&a, &b}, [&](const StatePtr& so) {
    return [sa = a.state(), sb = b.state(), so] {
      if (auto* g = detail::grad_buffer(*sa)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += so->grad[i] * sb->values[i];
      }
      if (auto* g = detail::grad_buffer(*sb)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += so->grad[i] * sa->values[i];
      }
    };
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same("div", a, b);
  std::vector<Real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] / b.values()[i];
  return finish("div", Tensor(a.shape(), std::move(out)), {&a, &b}, [&](const StatePtr& so) {
    return [sa = a.state(), sb = b.state(), so] {
      if (auto* g = detail::grad_buffer(*sa)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += so->grad[i] / sb->values[i];
      }
      if (auto* g = detail::grad_buffer(*sb)) {
        for (std::size_t i = 0; i < g->size(); ++i) {
          const Real bv = sb->values[i];
          (*g)[i] -= so->grad[i] * sa->values[i] / (bv * bv);
        }
      }
    };
  });
}

Tensor add_scalar(const Tensor& x, Real c) {
  return unary("add_scalar", x, [c](Real v) { return v + c; }, [](Real, Real) { return Real(1); });
}

Tensor mul_scalar(const Tensor& x, Real c) {
  return unary("mul_scalar", x, [c](Real v) { return v * c; }, [c](Real, Real) { return c; });
}

Tensor scalar_div(Real c, const Tensor& x) {
  return unary(
      "scalar_div", x, [c](Real v) { return c / v; }, [c](Real v, Real) { return -c / (v * v); });
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](Real v) { return std::abs(v); },
      [](Real v, Real) { return v > 0 ? Real(1) : (v < 0 ? Real(-1) : Real(0)); });
}

Tensor square(const Tensor& x) {
  return unary("square", x, [](Real v) { return v * v; }, [](Real v, Real) { return 2 * v; });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      "sqrt", x, [](Real v) { return std::sqrt(v); },
      [](Real, Real y) { return y > 0 ? Real(0.5) / y : Real(0); });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](Real v) { return std::exp(v); }, [](Real, Real y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary("log", x, [](Real v) { return std::log(v); }, [](Real v, Real) { return 1 / v; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](Real v) {
        if (v >= 0) return Real(1) / (Real(1) + std::exp(-v));
        const Real e = std::exp(v);
        return e / (Real(1) + e);
      },
      [](Real, Real y) { return y * (Real(1) - y); });
}

Tensor leaky_relu(const Tensor& x, Real slope) {
  return unary(
      "leaky_relu", x, [slope](Real v) { return v > 0 ? v : slope * v; },
      [slope](Real v, Real) { return v > 0 ? Real(1) : slope; });
}

Tensor clamp(const Tensor& x, Real lo, Real hi) {
  return unary(
      "clamp", x, [lo, hi](Real v) { return std::clamp(v, lo, hi); },
      [lo, hi](Real v, Real) { return (v >= lo && v <= hi) ? Real(1) : Real(0); });
}

Tensor sum(const Tensor& x) {
  Real total = 0;
  for (Real v : x.values()) total += v;
  return finish("sum", Tensor::scalar(total), {&x}, [&](const StatePtr& so) {
    return [sx = x.state(), so] {
      if (auto* g = detail::grad_buffer(*sx)) {
        for (auto& v : *g) v += so->grad[0];
      }
    };
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ShapeError("mean: empty tensor " + shape_string(x.shape()));
  return mul_scalar(sum(x), Real(1) / static_cast<Real>(x.size()));
}

Tensor sum_axis(const Tensor& x, std::size_t axis) {
  require_axis("sum_axis", x, axis);
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<Real> out(s.outer * s.inner, Real(0));
  const auto xv = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t k = 0; k < s.n; ++k) {
      const Real* row = xv.data() + (o * s.n + k) * s.inner;
      Real* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += row[i];
    }
  }
  return finish("sum_axis", Tensor(out_shape, std::move(out)), {&x}, [&](const StatePtr& so) {
    return [sx = x.state(), so, s] {
      auto* g = detail::grad_buffer(*sx);
      if (!g) return;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t k = 0; k < s.n; ++k) {
          Real* dst = g->data() + (o * s.n + k) * s.inner;
          const Real* src = so->grad.data() + o * s.inner;
          for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
        }
      }
    };
  });
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  require_axis("mean_axis", x, axis);
  if (x.dim(axis) == 0) throw ShapeError("mean_axis: empty axis in " + shape_string(x.shape()));
  return mul_scalar(sum_axis(x, axis), Real(1) / static_cast<Real>(x.dim(axis)));
}

MaxResult max_with_index(const Tensor& x, std::size_t axis) {
  require_axis("max_with_index", x, axis);
  const AxisSplit s = split_axis(x.shape(), axis);
  if (s.n == 0) throw ShapeError("max_with_index: empty axis in " + shape_string(x.shape()));
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<Real> out(s.outer * s.inner);
  std::vector<std::size_t> idx(s.outer * s.inner, 0);
  const auto xv = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      std::size_t best = 0;
      Real best_v = xv[o * s.n * s.inner + i];
      for (std::size_t k = 1; k < s.n; ++k) {
        const Real v = xv[(o * s.n + k) * s.inner + i];
        if (v > best_v) {
          best_v = v;
          best = k;
        }
      }
      out[o * s.inner + i] = best_v;
      idx[o * s.inner + i] = best;
    }
  }
  Tensor values = finish("max_with_index", Tensor(out_shape, std::move(out)), {&x},
                         [&](const StatePtr& so) {
                           return [sx = x.state(), so, s, idx] {
                             auto* g = detail::grad_buffer(*sx);
                             if (!g) return;
                             for (std::size_t o = 0; o < s.outer; ++o) {
                               for (std::size_t i = 0; i < s.inner; ++i) {
                                 const std::size_t k = idx[o * s.inner + i];
                                 (*g)[(o * s.n + k) * s.inner + i] += so->grad[o * s.inner + i];
                               }
                             }
                           };
                         });
  return MaxResult{std::move(values), std::move(idx)};
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_string(x.shape()) + " as " +
                     shape_string(shape));
  }
  std::vector<Real> out(x.values().begin(), x.values().end());
  return finish("reshape", Tensor(std::move(shape), std::move(out)), {&x},
                [&](const StatePtr& so) {
                  return [sx = x.state(), so] {
                    if (auto* g = detail::grad_buffer(*sx)) {
                      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += so->grad[i];
                    }
                  };
                });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  require_axis("concat", parts[0], axis);
  Shape out_shape = parts[0].shape();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != out_shape.size()) mismatch("concat", parts[0], p);
    for (std::size_t d = 0; d < out_shape.size(); ++d) {
      if (d != axis && p.shape()[d] != out_shape[d]) mismatch("concat", parts[0], p);
    }
    total += p.shape()[axis];
  }
  out_shape[axis] = total;
  const AxisSplit s = split_axis(out_shape, axis);
  std::vector<Real> out(shape_size(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    const std::size_t block = p.shape()[axis] * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(p.values().data() + o * block, block,
                  out.data() + o * total * s.inner + offset * s.inner);
    }
    offset += p.shape()[axis];
  }
  Tensor result(out_shape, std::move(out));
  if (Tape* tape = detail::common_tape(parts, "concat")) {
    std::vector<StatePtr> states;
    for (const Tensor& p : parts) states.push_back(p.state());
    tape->record(result.state(), [states, offsets, s, total, axis, so = result.state()] {
      for (std::size_t j = 0; j < states.size(); ++j) {
        auto* g = detail::grad_buffer(*states[j]);
        if (!g) continue;
        const std::size_t block = states[j]->shape[axis] * s.inner;
        for (std::size_t o = 0; o < s.outer; ++o) {
          const Real* src = so->grad.data() + o * total * s.inner + offsets[j] * s.inner;
          Real* dst = g->data() + o * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return result;
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  require_axis("slice", x, axis);
  if (begin > end || end > x.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for axis " + std::to_string(axis) + " of " +
                     shape_string(x.shape()));
  }
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t block = (end - begin) * s.inner;
  std::vector<Real> out(s.outer * block);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.values().data() + (o * s.n + begin) * s.inner, block, out.data() + o * block);
  }
  return finish("slice", Tensor(out_shape, std::move(out)), {&x}, [&](const StatePtr& so) {
    return [sx = x.state(), so, s, begin, block] {
      auto* g = detail::grad_buffer(*sx);
      if (!g) return;
      for (std::size_t o = 0; o < s.outer; ++o) {
        Real* dst = g->data() + (o * s.n + begin) * s.inner;
        const Real* src = so->grad.data() + o * block;
        for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
      }
    };
  });
}

Tensor repeat_rows(const Tensor& x, std::size_t k) {
  if (x.rank() != 2) bad_shape("repeat_rows", x, "rank-2 [N,F]");
  const std::size_t n = x.dim(0), f = x.dim(1);
  std::vector<Real> out(n * k * f);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      std::copy_n(x.values().data() + r * f, f, out.data() + (r * k + j) * f);
    }
  }
  return finish("repeat_rows", Tensor({n * k, f}, std::move(out)), {&x}, [&](const StatePtr& so) {
    return [sx = x.state(), so, n, k, f] {
      auto* g = detail::grad_buffer(*sx);
      if (!g) return;
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < k; ++j) {
          const Real* src = so->grad.data() + (r * k + j) * f;
          for (std::size_t c = 0; c < f; ++c) (*g)[r * f + c] += src[c];
        }
      }
    };
  });
}

Tensor tile_rows(const Tensor& x, std::size_t n) {
  if (x.rank() != 2) bad_shape("tile_rows", x, "rank-2 [N,F]");
  const std::size_t block = x.size();
  std::vector<Real> out(block * n);
  for (std::size_t t = 0; t < n; ++t) std::copy_n(x.values().data(), block, out.data() + t * block);
  return finish("tile_rows", Tensor({x.dim(0) * n, x.dim(1)}, std::move(out)), {&x},
                [&](const StatePtr& so) {
                  return [sx = x.state(), so, n, block] {
                    auto* g = detail::grad_buffer(*sx);
                    if (!g) return;
                    for (std::size_t t = 0; t < n; ++t) {
                      const Real* src = so->grad.data() + t * block;
                      for (std::size_t i = 0; i < block; ++i) (*g)[i] += src[i];
                    }
                  };
                });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  if (x.rank() != 2) bad_shape("gather_rows", x, "rank-2 [N,F]");
  const std::size_t f = x.dim(1);
  std::vector<Real> out(rows.size() * f);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= x.dim(0)) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[r]) + " out of range for " +
                       shape_string(x.shape()));
    }
    std::copy_n(x.values().data() + rows[r] * f, f, out.data() + r * f);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return finish("gather_rows", Tensor({rows.size(), f}, std::move(out)), {&x},
                [&](const StatePtr& so) {
                  return [sx = x.state(), so, idx = std::move(idx), f] {
                    auto* g = detail::grad_buffer(*sx);
                    if (!g) return;
                    for (std::size_t r = 0; r < idx.size(); ++r) {
                      for (std::size_t c = 0; c < f; ++c) (*g)[idx[r] * f + c] += so->grad[r * f + c];
                    }
                  };
                });
}

namespace {

// Channel layout for per-channel broadcast: returns {channels, per-channel
// stride pattern}. For rank-3 values are [C, plane]; for rank-2 [N, C].
struct ChannelLayout {
  bool channel_major = true;
  std::size_t channels = 0, plane = 0, rows = 0;
};

ChannelLayout channel_layout(const char* kind, const Tensor& x, const Tensor& b) {
  ChannelLayout l;
  if (x.rank() == 3) {
    l.channel_major = true;
    l.channels = x.dim(0);
    l.plane = x.dim(1) * x.dim(2);
  } else if (x.rank() == 2) {
    l.channel_major = false;
    l.rows = x.dim(0);
    l.channels = x.dim(1);
  } else {
    bad_shape(kind, x, "rank-3 [C,H,W] or rank-2 [N,C]");
  }
  if (b.rank() != 1 || b.dim(0) != l.channels) mismatch(kind, x, b);
  return l;
}

template <class Fn>
void for_each_channel_element(const ChannelLayout& l, Fn&& fn) {
  if (l.channel_major) {
    for (std::size_t c = 0; c < l.channels; ++c) {
      for (std::size_t i = 0; i < l.plane; ++i) fn(c * l.plane + i, c);
    }
  } else {
    for (std::size_t r = 0; r < l.rows; ++r) {
      for (std::size_t c = 0; c < l.channels; ++c) fn(r * l.channels + c, c);
    }
  }
}

}  // namespace

Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
  const ChannelLayout l = channel_layout("add_channel_bias", x, b);
  std::vector<Real> out(x.values().begin(), x.values().end());
  for_each_channel_element(l, [&](std::size_t i, std::size_t c) { out[i] += b.values()[c]; });
  return finish("add_channel_bias", Tensor(x.shape(), std::move(out)), {&x, &b},
                [&](const StatePtr& so) {
                  return [sx = x.state(), sb = b.state(), so, l] {
                    if (auto* g = detail::grad_buffer(*sx)) {
                      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += so->grad[i];
                    }
                    if (auto* g = detail::grad_buffer(*sb)) {
                      for_each_channel_element(
                          l, [&](std::size_t i, std::size_t c) { (*g)[c] += so->grad[i]; });
                    }
                  };
                });
}

Tensor mul_channel(const Tensor& x, const Tensor& s) {
  const ChannelLayout l = channel_layout("mul_channel", x, s);
  std::vector<Real> out(x.size());
  for_each_channel_element(
      l, [&](std::size_t i, std::size_t c) { out[i] = x.values()[i] * s.values()[c]; });
  return finish("mul_channel", Tensor(x.shape(), std::move(out)), {&x, &s},
                [&](const StatePtr& so) {
                  return [sx = x.state(), ss = s.state(), so, l] {
                    if (auto* g = detail::grad_buffer(*sx)) {
                      for_each_channel_element(l, [&](std::size_t i, std::size_t c) {
                        (*g)[i] += so->grad[i] * ss->values[c];
                      });
                    }
                    if (auto* g = detail::grad_buffer(*ss)) {
                      for_each_channel_element(l, [&](std::size_t i, std::size_t c) {
                        (*g)[c] += so->grad[i] * sx->values[i];
                      });
                    }
                  };
                });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) mismatch("matmul", a, b);
  const auto n = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto m = static_cast<Eigen::Index>(b.dim(1));
  std::vector<Real> out(static_cast<std::size_t>(n * m));
  MapRM(out.data(), n, m).noalias() = CMapRM(a.values().data(), n, k) * CMapRM(b.values().data(), k, m);
  return finish("matmul", Tensor({a.dim(0), b.dim(1)}, std::move(out)), {&a, &b},
                [&](const StatePtr& so) {
                  return [sa = a.state(), sb = b.state(), so, n, k, m] {
                    const CMapRM g(so->grad.data(), n, m);
                    if (auto* ga = detail::grad_buffer(*sa)) {
                      MapRM(ga->data(), n, k).noalias() +=
                          g * CMapRM(sb->values.data(), k, m).transpose();
                    }
                    if (auto* gb = detail::grad_buffer(*sb)) {
                      MapRM(gb->data(), k, m).noalias() +=
                          CMapRM(sa->values.data(), n, k).transpose() * g;
                    }
                  };
                });
}

namespace {

struct ConvGeometry {
  std::size_t cin, h, w, cout, k, stride, pad, hout, wout;
};

void im2col(const Real* x, const ConvGeometry& c, Real* cols) {
  const std::size_t p = c.hout * c.wout;
  for (std::size_t ci = 0; ci < c.cin; ++ci) {
    for (std::size_t ky = 0; ky < c.k; ++ky) {
      for (std::size_t kx = 0; kx < c.k; ++kx) {
        Real* row = cols + ((ci * c.k + ky) * c.k + kx) * p;
        for (std::size_t oy = 0; oy < c.hout; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * c.stride + ky) -
                          static_cast<std::ptrdiff_t>(c.pad);
          Real* dst = row + oy * c.wout;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(c.h)) {
            std::fill_n(dst, c.wout, Real(0));
            continue;
          }
          const Real* src = x + (ci * c.h + static_cast<std::size_t>(iy)) * c.w;
          for (std::size_t ox = 0; ox < c.wout; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * c.stride + kx) -
                            static_cast<std::ptrdiff_t>(c.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(c.w))
                          ? Real(0)
                          : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

void col2im(const Real* cols, const ConvGeometry& c, Real* gx) {
  const std::size_t p = c.hout * c.wout;
  for (std::size_t ci = 0; ci < c.cin; ++ci) {
    for (std::size_t ky = 0; ky < c.k; ++ky) {
      for (std::size_t kx = 0; kx < c.k; ++kx) {
        const Real* row = cols + ((ci * c.k + ky) * c.k + kx) * p;
        for (std::size_t oy = 0; oy < c.hout; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * c.stride + ky) -
                          static_cast<std::ptrdiff_t>(c.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(c.h)) continue;
          Real* dst = gx + (ci * c.h + static_cast<std::size_t>(iy)) * c.w;
          const Real* src = row + oy * c.wout;
          for (std::size_t ox = 0; ox < c.wout; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * c.stride + kx) -
                            static_cast<std::ptrdiff_t>(c.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(c.w)) continue;
            dst[static_cast<std::size_t>(ix)] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, std::size_t stride,
              std::size_t padding) {
  if (x.rank() != 3) bad_shape("conv2d", x, "input [Cin,H,W]");
  if (weight.rank() != 4 || weight.dim(1) != x.dim(0) || weight.dim(2) != weight.dim(3)) {
    mismatch("conv2d", x, weight);
  }
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  ConvGeometry c{x.dim(0), x.dim(1), x.dim(2), weight.dim(0), weight.dim(2), stride, padding, 0, 0};
  if (c.h + 2 * c.pad < c.k || c.w + 2 * c.pad < c.k) mismatch("conv2d", x, weight);
  c.hout = (c.h + 2 * c.pad - c.k) / c.stride + 1;
  c.wout = (c.w + 2 * c.pad - c.k) / c.stride + 1;
  const bool has_bias = bias != nullptr && bias->size() > 0;
  if (has_bias && (bias->rank() != 1 || bias->dim(0) != c.cout)) mismatch("conv2d", weight, *bias);

  const auto kdim = static_cast<Eigen::Index>(c.cin * c.k * c.k);
  const auto p = static_cast<Eigen::Index>(c.hout * c.wout);
  const auto cout = static_cast<Eigen::Index>(c.cout);
  auto cols = std::make_shared<std::vector<Real>>(static_cast<std::size_t>(kdim * p));
  im2col(x.values().data(), c, cols->data());

  std::vector<Real> out(static_cast<std::size_t>(cout * p));
  MapRM om(out.data(), cout, p);
  om.noalias() = CMapRM(weight.values().data(), cout, kdim) * CMapRM(cols->data(), kdim, p);
  if (has_bias) {
    for (Eigen::Index r = 0; r < cout; ++r) om.row(r).array() += bias->values()[static_cast<std::size_t>(r)];
  }
  Tensor result({c.cout, c.hout, c.wout}, std::move(out));

  Tape* tape = has_bias ? detail::common_tape({&x, &weight, bias}, "conv2d")
                        : detail::common_tape({&x, &weight}, "conv2d");
  if (tape) {
    StatePtr sb = has_bias ? bias->state() : nullptr;
    tape->record(result.state(), [sx = x.state(), sw = weight.state(), sb, so = result.state(), cols,
                                  c, kdim, p, cout] {
      const CMapRM g(so->grad.data(), cout, p);
      if (auto* gw = detail::grad_buffer(*sw)) {
        MapRM(gw->data(), cout, kdim).noalias() += g * CMapRM(cols->data(), kdim, p).transpose();
      }
      if (sb) {
        if (auto* gb = detail::grad_buffer(*sb)) {
          for (Eigen::Index r = 0; r < cout; ++r) (*gb)[static_cast<std::size_t>(r)] += g.row(r).sum();
        }
      }
      if (auto* gx = detail::grad_buffer(*sx)) {
        MatRM dcols = CMapRM(sw->values.data(), cout, kdim).transpose() * g;
        col2im(dcols.data(), c, gx->data());
      }
    });
  }
  return result;
}

Tensor upsample_nearest2x(const Tensor& x) {
  if (x.rank() != 3) bad_shape("upsample_nearest2x", x, "[C,H,W]");
  const std::size_t ch = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<Real> out(ch * 4 * h * w);
  const auto xv = x.values();
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      const Real* src = xv.data() + (c * h + y / 2) * w;
      Real* dst = out.data() + (c * 2 * h + y) * 2 * w;
      for (std::size_t u = 0; u < 2 * w; ++u) dst[u] = src[u / 2];
    }
  }
  return finish("upsample_nearest2x", Tensor({ch, 2 * h, 2 * w}, std::move(out)), {&x},
                [&](const StatePtr& so) {
                  return [sx = x.state(), so, ch, h, w] {
                    auto* g = detail::grad_buffer(*sx);
                    if (!g) return;
                    for (std::size_t c = 0; c < ch; ++c) {
                      for (std::size_t y = 0; y < 2 * h; ++y) {
                        const Real* src = so->grad.data() + (c * 2 * h + y) * 2 * w;
                        Real* dst = g->data() + (c * h + y / 2) * w;
                        for (std::size_t u = 0; u < 2 * w; ++u) dst[u / 2] += src[u];
                      }
                    }
                  };
                });
}

Tensor box_filter3x3(const Tensor& x) {
  if (x.rank() != 2 && x.rank() != 3) bad_shape("box_filter3x3", x, "[H,W] or [C,H,W]");
  const std::size_t ch = x.rank() == 3 ? x.dim(0) : 1;
  const std::size_t h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1);
  if (h == 0 || w == 0) bad_shape("box_filter3x3", x, "non-empty image");
  std::vector<Real> out(x.size());
  const auto xv = x.values();
  const Real ninth = Real(1) / Real(9);
  auto clampi = [](std::ptrdiff_t v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  for (std::size_t c = 0; c < ch; ++c) {
    const Real* plane = xv.data() + c * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t u = 0; u < w; ++u) {
        Real acc = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          const std::size_t yy = clampi(static_cast<std::ptrdiff_t>(y) + dy, h);
          for (int dx = -1; dx <= 1; ++dx) {
            acc += plane[yy * w + clampi(static_cast<std::ptrdiff_t>(u) + dx, w)];
          }
        }
        out[(c * h + y) * w + u] = acc * ninth;
      }
    }
  }
  return finish("box_filter3x3", Tensor(x.shape(), std::move(out)), {&x}, [&](const StatePtr& so) {
    return [sx = x.state(), so, ch, h, w, ninth, clampi] {
      auto* g = detail::grad_buffer(*sx);
      if (!g) return;
      for (std::size_t c = 0; c < ch; ++c) {
        Real* plane = g->data() + c * h * w;
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t u = 0; u < w; ++u) {
            const Real gv = so->grad[(c * h + y) * w + u] * ninth;
            for (int dy = -1; dy <= 1; ++dy) {
              const std::size_t yy = clampi(static_cast<std::ptrdiff_t>(y) + dy, h);
              for (int dx = -1; dx <= 1; ++dx) {
                plane[yy * w + clampi(static_cast<std::ptrdiff_t>(u) + dx, w)] += gv;
              }
            }
          }
        }
      }
    };
  });
}

}  // namespace depthpl::ops
