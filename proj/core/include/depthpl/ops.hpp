#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "depthpl/tensor.hpp"

// Differentiable tensor operations. Every op records itself on the tape of
// its taped inputs (all taped inputs must share one tape) and throws
// ShapeError naming the op and the offending shapes on mismatch.
//
// Broadcasting is limited to per-channel scalars (add_channel_bias,
// mul_channel); every other op expects explicitly aligned shapes.
namespace depthpl::ops {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, Real c);
Tensor mul_scalar(const Tensor& x, Real c);
/// c / x elementwise.
Tensor scalar_div(Real c, const Tensor& x);

// Elementwise unary.
Tensor abs(const Tensor& x);  // subgradient 0 at x == 0
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor leaky_relu(const Tensor& x, Real slope);
/// Gradient passes where lo <= x <= hi, zero outside.
Tensor clamp(const Tensor& x, Real lo, Real hi);

// Reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum_axis(const Tensor& x, std::size_t axis);
Tensor mean_axis(const Tensor& x, std::size_t axis);

struct MaxResult {
  Tensor values;
  std::vector<std::size_t> indices;  // argmax along the reduced axis
};
/// Maximum along `axis`; ties go to the lowest index.
MaxResult max_with_index(const Tensor& x, std::size_t axis);

// Shape manipulation.
Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
/// [N, F] -> [N*k, F], each row repeated k times consecutively.
Tensor repeat_rows(const Tensor& x, std::size_t k);
/// [N, F] -> [N*n, F], the whole block stacked n times.
Tensor tile_rows(const Tensor& x, std::size_t n);
/// Rows of a rank-2 tensor picked by index (with repetition).
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

// Per-channel broadcast. For rank-3 [C,H,W] the channel axis is 0; for
// rank-2 [N,F] it is the column axis. `b` has one entry per channel.
Tensor add_channel_bias(const Tensor& x, const Tensor& b);
Tensor mul_channel(const Tensor& x, const Tensor& s);

// Linear algebra and image ops.
Tensor matmul(const Tensor& a, const Tensor& b);

/// x [Cin,H,W], weight [Cout,Cin,k,k], bias [Cout] or empty-shaped
/// (size 0) for no bias. Zero padding.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, std::size_t stride,
              std::size_t padding);
/// [C,H,W] -> [C,2H,2W] nearest neighbour.
Tensor upsample_nearest2x(const Tensor& x);
/// 3x3 mean filter with replicated borders; rank-2 [H,W] or rank-3 [C,H,W].
Tensor box_filter3x3(const Tensor& x);

}  // namespace depthpl::ops
