#pragma once

#include <cstddef>
#include <cstdint>

#include "depthpl/tensor.hpp"
#include "depthpl/types.hpp"

namespace depthpl {

/// Pinhole intrinsics plus the depth shift used when lifting depth maps to
/// camera space: a stored depth d becomes z = depth_scale * d + epsilon.
struct CameraModel {
  Real focal = 725;
  Real principal_x = 96;
  Real principal_y = 32;
  Real epsilon = 40;
  Real depth_scale = Real(1) / Real(80);
  std::size_t width = 192;
  std::size_t height = 64;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
  Real shifted_depth(Real d) const { return depth_scale * d + epsilon; }
};

/// One point per set mask pixel, in row-major pixel order, with provenance.
PointCloud project_2d_to_3d(const DepthMap& depth, const PixelMask& mask, const CameraModel& cam);

struct Projection {
  DepthMap depth;  // 0 where nothing landed
  PixelMask mask;
  std::size_t dropped_out_of_plane = 0;  // outside the image or non-finite
  std::size_t dropped_behind = 0;        // z - epsilon <= 0
};

/// Rounds projected coordinates half away from zero and keeps the minimum
/// depth when several points land on one pixel.
Projection project_3d_to_2d(const PointCloud& cloud, const CameraModel& cam);

/// ceil(ratio * |cloud|) points drawn without replacement, kept in their
/// original relative order.
PointCloud uniform_subsample(const PointCloud& cloud, Real ratio, std::uint64_t seed);
std::size_t subsample_count(std::size_t n, Real ratio);

/// a = baseline * focal / depth, differentiable in depth.
Tensor disparity_from_depth(const Tensor& depth, Real baseline, Real focal);

/// Samples image [C,H,W] (or [H,W]) at (u - disparity(u,v), v) with linear
/// interpolation along rows, clamping to the border columns. Differentiable
/// in both arguments.
Tensor warp_horizontal(const Tensor& image, const Tensor& disparity);

inline constexpr Real kSsimC1 = Real(0.01 * 0.01);
inline constexpr Real kSsimC2 = Real(0.03 * 0.03);

/// Per-pixel SSIM over 3x3 replicate-padded windows, averaged over channels.
/// Inputs [C,H,W] or [H,W]; result [H,W].
Tensor ssim(const Tensor& a, const Tensor& b);

}  // namespace depthpl
