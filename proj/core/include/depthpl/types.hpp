#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "depthpl/real.hpp"
#include "depthpl/tensor.hpp"

namespace depthpl {

/// Binary H×W grid, row-major, one byte per pixel holding 0 or 1.
struct PixelMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;

  PixelMask() = default;
  PixelMask(std::size_t w, std::size_t h, bool value = false)
      : width(w), height(h), bits(w * h, value ? 1 : 0) {}

  std::size_t size() const { return bits.size(); }
  bool at(std::size_t x, std::size_t y) const { return bits[y * width + x] != 0; }
  void set(std::size_t x, std::size_t y, bool v) { bits[y * width + x] = v ? 1 : 0; }
  std::size_t popcount() const;

  PixelMask complement() const;
  bool operator==(const PixelMask&) const = default;
};

PixelMask operator&(const PixelMask& a, const PixelMask& b);
PixelMask operator|(const PixelMask& a, const PixelMask& b);
/// True if no pixel is set in both.
bool disjoint(const PixelMask& a, const PixelMask& b);
/// True if every bit of `a` is also set in `b`.
bool subset_of(const PixelMask& a, const PixelMask& b);

/// Depth in meters, row-major H×W, with an optional validity mask.
struct DepthMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Real> depth;
  std::optional<PixelMask> valid;

  DepthMap() = default;
  DepthMap(std::size_t w, std::size_t h, Real value = 0) : width(w), height(h), depth(w * h, value) {}

  Real at(std::size_t x, std::size_t y) const { return depth[y * width + x]; }
  Real& at(std::size_t x, std::size_t y) { return depth[y * width + x]; }

  /// [H, W] tensor, not on any tape.
  Tensor to_tensor() const;
  static DepthMap from_tensor(const Tensor& t);
};

/// Planar (channel-major) image with intensities nominally in [0, 1].
struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Real> data;

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w, Real value = 0)
      : channels(c), height(h), width(w), data(c * h * w, value) {}

  Real at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }
  Real& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }

  /// [C, H, W] tensor, not on any tape.
  Tensor to_tensor() const;
  static Image from_tensor(const Tensor& t);
};

using Point3 = std::array<Real, 3>;

struct PixelCoord {
  std::uint32_t u = 0;
  std::uint32_t v = 0;
  bool operator==(const PixelCoord&) const = default;
};

/// Camera-space points; provenance, when non-empty, is parallel to points.
struct PointCloud {
  std::vector<Point3> points;
  std::vector<PixelCoord> provenance;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  /// [N, 3] tensor, not on any tape.
  Tensor to_tensor() const;
  static PointCloud from_tensor(const Tensor& t);
};

}  // namespace depthpl
