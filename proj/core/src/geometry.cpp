#include "depthpl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "depthpl/error.hpp"
#include "depthpl/ops.hpp"
#include "depthpl/rng.hpp"

namespace depthpl {

void CameraModel::validate() const {
  if (!(focal > 0)) throw ConfigError("camera: focal must be positive");
  if (width == 0 || height == 0) throw ConfigError("camera: image extents must be positive");
  if (!(principal_x >= 0 && principal_x < static_cast<Real>(width))) {
    throw ConfigError("camera: principal_x must lie in [0, width)");
  }
  if (!(principal_y >= 0 && principal_y < static_cast<Real>(height))) {
    throw ConfigError("camera: principal_y must lie in [0, height)");
  }
  if (!(depth_scale > 0)) throw ConfigError("camera: depth_scale must be positive");
  if (!(epsilon >= 0)) throw ConfigError("camera: epsilon must be non-negative");
}

PointCloud project_2d_to_3d(const DepthMap& depth, const PixelMask& mask, const CameraModel& cam) {
  if (mask.width != depth.width || mask.height != depth.height) {
    throw ShapeError("project_2d_to_3d: mask " + std::to_string(mask.width) + "x" +
                     std::to_string(mask.height) + " does not match depth " +
                     std::to_string(depth.width) + "x" + std::to_string(depth.height));
  }
  PointCloud cloud;
  cloud.points.reserve(mask.popcount());
  cloud.provenance.reserve(mask.popcount());
  for (std::size_t v = 0; v < depth.height; ++v) {
    for (std::size_t u = 0; u < depth.width; ++u) {
      if (!mask.at(u, v)) continue;
      const Real d = depth.at(u, v);
      if (!std::isfinite(d) || d <= 0) {
        throw DataError("project_2d_to_3d: masked pixel (" + std::to_string(u) + "," +
                        std::to_string(v) + ") has invalid depth " + std::to_string(d));
      }
      const Real z = cam.shifted_depth(d);
      const Real x = z * (static_cast<Real>(u) - cam.principal_x) / cam.focal;
      const Real y = z * (static_cast<Real>(v) - cam.principal_y) / cam.focal;
      cloud.points.push_back({x, y, z});
      cloud.provenance.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v)});
    }
  }
  return cloud;
}

Projection project_3d_to_2d(const PointCloud& cloud, const CameraModel& cam) {
  Projection out;
  out.depth = DepthMap(cam.width, cam.height, 0);
  out.mask = PixelMask(cam.width, cam.height);
  const Real wmax = static_cast<Real>(cam.width);
  const Real hmax = static_cast<Real>(cam.height);
  for (const Point3& p : cloud.points) {
    const Real z = p[2];
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(z)) {
      ++out.dropped_out_of_plane;
      continue;
    }
    if (!(z - cam.epsilon > 0)) {
      ++out.dropped_behind;
      continue;
    }
    const Real u = std::round(p[0] * cam.focal / z + cam.principal_x);
    const Real v = std::round(p[1] * cam.focal / z + cam.principal_y);
    if (!(u >= 0 && u < wmax && v >= 0 && v < hmax)) {
      ++out.dropped_out_of_plane;
      continue;
    }
    const auto ui = static_cast<std::size_t>(u);
    const auto vi = static_cast<std::size_t>(v);
    const Real d = (z - cam.epsilon) / cam.depth_scale;
    if (!out.mask.at(ui, vi) || d < out.depth.at(ui, vi)) {
      out.depth.at(ui, vi) = d;
      out.mask.set(ui, vi, true);
    }
  }
  return out;
}

std::size_t subsample_count(std::size_t n, Real ratio) {
  const double exact = static_cast<double>(ratio) * static_cast<double>(n);
  const double nearest = std::round(exact);
  // Treat products within rounding noise of an integer as that integer.
  if (std::abs(exact - nearest) <= 1e-9 * std::max(1.0, exact)) {
    return static_cast<std::size_t>(nearest);
  }
  return static_cast<std::size_t>(std::ceil(exact));
}

PointCloud uniform_subsample(const PointCloud& cloud, Real ratio, std::uint64_t seed) {
  if (cloud.empty()) throw DataError("uniform_subsample: empty input cloud");
  if (!(ratio > 0 && ratio <= 1)) {
    throw DataError("uniform_subsample: ratio must lie in (0, 1], got " + std::to_string(ratio));
  }
  const std::size_t count = std::min(cloud.size(), subsample_count(cloud.size(), ratio));
  PointCloud out;
  if (count == cloud.size()) return cloud;
  Rng rng(seed);
  std::vector<std::size_t> picked = sample_without_replacement(cloud.size(), count, rng);
  std::sort(picked.begin(), picked.end());
  out.points.reserve(count);
  for (std::size_t i : picked) out.points.push_back(cloud.points[i]);
  if (!cloud.provenance.empty()) {
    out.provenance.reserve(count);
    for (std::size_t i : picked) out.provenance.push_back(cloud.provenance[i]);
  }
  return out;
}

Tensor disparity_from_depth(const Tensor& depth, Real baseline, Real focal) {
  for (Real d : depth.values()) {
    if (!(d > 0)) {
      throw DataError("disparity_from_depth: depth must be positive, got " + std::to_string(d));
    }
  }
  return ops::scalar_div(baseline * focal, depth);
}

Tensor warp_horizontal(const Tensor& image, const Tensor& disparity) {
  if (image.rank() != 2 && image.rank() != 3) {
    throw ShapeError("warp_horizontal: image must be [C,H,W] or [H,W], got " +
                     shape_string(image.shape()));
  }
  const std::size_t ch = image.rank() == 3 ? image.dim(0) : 1;
  const std::size_t h = image.dim(image.rank() - 2);
  const std::size_t w = image.dim(image.rank() - 1);
  if (disparity.rank() != 2 || disparity.dim(0) != h || disparity.dim(1) != w) {
    throw ShapeError("warp_horizontal: shape mismatch " + shape_string(image.shape()) + " vs " +
                     shape_string(disparity.shape()));
  }
  for (Real a : disparity.values()) {
    if (!std::isfinite(a)) throw DataError("warp_horizontal: non-finite disparity");
  }

  // Per-pixel sampling position, shared by all channels.
  const std::size_t n = h * w;
  std::vector<std::size_t> i0(n), i1(n);
  std::vector<Real> frac(n);
  std::vector<std::uint8_t> inside(n);
  const Real last = static_cast<Real>(w - 1);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      const Real s_raw = static_cast<Real>(x) - disparity.values()[p];
      const Real s = std::clamp(s_raw, Real(0), last);
      inside[p] = (s_raw > 0 && s_raw < last) ? 1 : 0;
      const auto lo = static_cast<std::size_t>(std::floor(s));
      i0[p] = lo;
      i1[p] = std::min(lo + 1, w - 1);
      frac[p] = s - static_cast<Real>(lo);
    }
  }

  std::vector<Real> out(image.size());
  const auto iv = image.values();
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      const Real* row = iv.data() + (c * h + y) * w;
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t p = y * w + x;
        out[(c * h + y) * w + x] = (1 - frac[p]) * row[i0[p]] + frac[p] * row[i1[p]];
      }
    }
  }

  Tensor result(image.shape(), std::move(out));
  if (Tape* tape = detail::common_tape({&image, &disparity}, "warp_horizontal")) {
    tape->record(result.state(), [si = image.state(), sd = disparity.state(), so = result.state(),
                                  i0 = std::move(i0), i1 = std::move(i1), frac = std::move(frac),
                                  inside = std::move(inside), ch, h, w] {
      auto* gi = detail::grad_buffer(*si);
      auto* gd = detail::grad_buffer(*sd);
      for (std::size_t c = 0; c < ch; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
          const std::size_t base = (c * h + y) * w;
          for (std::size_t x = 0; x < w; ++x) {
            const std::size_t p = y * w + x;
            const Real g = so->grad[base + x];
            if (gi) {
              (*gi)[base + i0[p]] += g * (1 - frac[p]);
              (*gi)[base + i1[p]] += g * frac[p];
            }
            if (gd && inside[p]) {
              // d out / d s = I[i1] - I[i0]; d s / d a = -1.
              (*gd)[p] -= g * (si->values[base + i1[p]] - si->values[base + i0[p]]);
            }
          }
        }
      }
    });
  }
  return result;
}

Tensor ssim(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("ssim: shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  using namespace ops;
  const Tensor mu_a = box_filter3x3(a);
  const Tensor mu_b = box_filter3x3(b);
  const Tensor mu_a2 = square(mu_a);
  const Tensor mu_b2 = square(mu_b);
  const Tensor mu_ab = mul(mu_a, mu_b);
  const Tensor var_a = sub(box_filter3x3(square(a)), mu_a2);
  const Tensor var_b = sub(box_filter3x3(square(b)), mu_b2);
  const Tensor cov = sub(box_filter3x3(mul(a, b)), mu_ab);
  const Tensor num = mul(add_scalar(mul_scalar(mu_ab, 2), kSsimC1), add_scalar(mul_scalar(cov, 2), kSsimC2));
  const Tensor den = mul(add_scalar(add(mu_a2, mu_b2), kSsimC1), add_scalar(add(var_a, var_b), kSsimC2));
  const Tensor map = div(num, den);
  return map.rank() == 3 ? mean_axis(map, 0) : map;
}

}  // namespace depthpl
