#include "depthpl/types.hpp"

#include <algorithm>
#include <string>

#include "depthpl/error.hpp"

namespace depthpl {

namespace {

void require_same_size(const PixelMask& a, const PixelMask& b, const char* op) {
  if (a.width != b.width || a.height != b.height) {
    throw ShapeError(std::string(op) + ": mask sizes differ (" + std::to_string(a.width) + "x" +
                     std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                     std::to_string(b.height) + ")");
  }
}

}  // namespace

std::size_t PixelMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

PixelMask PixelMask::complement() const {
  PixelMask out = *this;
  for (auto& b : out.bits) b = b ? 0 : 1;
  return out;
}

PixelMask operator&(const PixelMask& a, const PixelMask& b) {
  require_same_size(a, b, "mask and");
  PixelMask out(a.width, a.height);
  for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = a.bits[i] & b.bits[i];
  return out;
}

PixelMask operator|(const PixelMask& a, const PixelMask& b) {
  require_same_size(a, b, "mask or");
  PixelMask out(a.width, a.height);
  for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = a.bits[i] | b.bits[i];
  return out;
}

bool disjoint(const PixelMask& a, const PixelMask& b) {
  require_same_size(a, b, "disjoint");
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    if (a.bits[i] && b.bits[i]) return false;
  }
  return true;
}

bool subset_of(const PixelMask& a, const PixelMask& b) {
  require_same_size(a, b, "subset_of");
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    if (a.bits[i] && !b.bits[i]) return false;
  }
  return true;
}

Tensor DepthMap::to_tensor() const { return Tensor({height, width}, depth); }

DepthMap DepthMap::from_tensor(const Tensor& t) {
  if (t.rank() != 2) throw ShapeError("depth map: expected [H,W], got " + shape_string(t.shape()));
  DepthMap d;
  d.height = t.dim(0);
  d.width = t.dim(1);
  d.depth.assign(t.values().begin(), t.values().end());
  return d;
}

Tensor Image::to_tensor() const { return Tensor({channels, height, width}, data); }

Image Image::from_tensor(const Tensor& t) {
  if (t.rank() != 3) throw ShapeError("image: expected [C,H,W], got " + shape_string(t.shape()));
  Image im;
  im.channels = t.dim(0);
  im.height = t.dim(1);
  im.width = t.dim(2);
  im.data.assign(t.values().begin(), t.values().end());
  return im;
}

Tensor PointCloud::to_tensor() const {
  std::vector<Real> v;
  v.reserve(points.size() * 3);
  for (const auto& p : points) v.insert(v.end(), p.begin(), p.end());
  return Tensor({points.size(), 3}, std::move(v));
}

PointCloud PointCloud::from_tensor(const Tensor& t) {
  if (t.rank() != 2 || t.dim(1) != 3) {
    throw ShapeError("point cloud: expected [N,3], got " + shape_string(t.shape()));
  }
  PointCloud c;
  c.points.resize(t.dim(0));
  const auto v = t.values();
  for (std::size_t i = 0; i < c.points.size(); ++i) c.points[i] = {v[3 * i], v[3 * i + 1], v[3 * i + 2]};
  return c;
}

}  // namespace depthpl
