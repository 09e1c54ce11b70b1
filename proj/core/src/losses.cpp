#include "depthpl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>

#include "depthpl/error.hpp"
#include "depthpl/geometry.hpp"
#include "depthpl/ops.hpp"

namespace depthpl {

void LossWeights::validate() const {
  const Real weights[] = {lambda_task, lambda_sm, lambda_cons, lambda_comp, lambda_tgc, eta, mu};
  for (Real v : weights) {
    if (!(v >= 0)) throw ConfigError("loss weights must be non-negative");
  }
  if (!(alpha >= 0 && alpha <= 1)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(tau > 0)) throw ConfigError("tau must be positive");
}

Tensor task_loss(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape()) {
    throw ShapeError("task_loss: shape mismatch " + shape_string(pred.shape()) + " vs " +
                     shape_string(gt.shape()));
  }
  const Tensor target = gt.on_tape() ? gt.detach() : gt;
  return ops::mean(ops::abs(ops::sub(pred, target)));
}

namespace {

// Edge weight exp(-|dI|) along `axis` of the spatial grid, averaged over
// channels first.
Tensor edge_weight(const Tensor& image, std::size_t spatial_axis) {
  const std::size_t axis = image.rank() - 2 + spatial_axis;
  const std::size_t n = image.dim(axis);
  Tensor grad = ops::abs(ops::sub(ops::slice(image, axis, 1, n), ops::slice(image, axis, 0, n - 1)));
  if (image.rank() == 3) grad = ops::mean_axis(grad, 0);
  return ops::exp(ops::mul_scalar(grad, -1));
}

}  // namespace

Tensor smoothness_loss(const Tensor& pred, const Tensor& image) {
  if (pred.rank() != 2 || (image.rank() != 2 && image.rank() != 3) ||
      image.dim(image.rank() - 2) != pred.dim(0) || image.dim(image.rank() - 1) != pred.dim(1)) {
    throw ShapeError("smoothness_loss: shape mismatch " + shape_string(pred.shape()) + " vs " +
                     shape_string(image.shape()));
  }
  const std::size_t h = pred.dim(0), w = pred.dim(1);
  if (h < 2 && w < 2) {
    throw ShapeError("smoothness_loss: needs at least two pixels along one axis, got " +
                     shape_string(pred.shape()));
  }
  Tensor total = Tensor::scalar(0);
  if (w >= 2) {
    const Tensor dx = ops::abs(ops::sub(ops::slice(pred, 1, 1, w), ops::slice(pred, 1, 0, w - 1)));
    total = ops::add(total, ops::mean(ops::mul(edge_weight(image, 1), dx)));
  }
  if (h >= 2) {
    const Tensor dy = ops::abs(ops::sub(ops::slice(pred, 0, 1, h), ops::slice(pred, 0, 0, h - 1)));
    total = ops::add(total, ops::mean(ops::mul(edge_weight(image, 0), dy)));
  }
  return total;
}

namespace {

inline Real sq_dist(const Point3& a, const Point3& b) {
  const Real dx = a[0] - b[0];
  const Real dy = a[1] - b[1];
  const Real dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

NeighborResult brute_force(std::span<const Point3> queries, std::span<const Point3> refs) {
  NeighborResult r;
  r.index.resize(queries.size());
  r.sq_distance.resize(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    Real best = std::numeric_limits<Real>::infinity();
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < refs.size(); ++j) {
      const Real d = sq_dist(queries[i], refs[j]);
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    r.index[i] = best_j;
    r.sq_distance[i] = best;
  }
  return r;
}

// Uniform hash grid over the reference points; queries scan cubic shells of
// cells outwards until no unvisited cell can hold a closer point.
class CellGrid {
 public:
  explicit CellGrid(std::span<const Point3> refs) : refs_(refs) {
    Point3 lo = refs[0], hi = refs[0];
    for (const Point3& p : refs) {
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], p[a]);
        hi[a] = std::max(hi[a], p[a]);
      }
    }
    origin_ = lo;
    Real extent[3];
    Real max_extent = 0;
    for (int a = 0; a < 3; ++a) {
      extent[a] = hi[a] - lo[a];
      max_extent = std::max(max_extent, extent[a]);
    }
    if (!(max_extent > 0)) max_extent = 1;
    // Pick the cell size so that about two points share a cell.
    const double target = std::max(1.0, static_cast<double>(refs.size()) / 2.0);
    double a_lo = static_cast<double>(max_extent) / (2.0 * target), a_hi = max_extent;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (a_lo + a_hi);
      double cells = 1;
      for (int a = 0; a < 3; ++a) cells *= std::max(1.0, static_cast<double>(extent[a]) / mid);
      (cells > target ? a_lo : a_hi) = mid;
    }
    cell_ = static_cast<Real>(a_hi);

    for (int a = 0; a < 3; ++a) {
      box_lo_[a] = 0;
      box_hi_[a] = coord(hi[a], a);
    }
    std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
      keyed[i] = {key(coord(refs[i][0], 0), coord(refs[i][1], 1), coord(refs[i][2], 2)),
                  static_cast<std::uint32_t>(i)};
    }
    std::sort(keyed.begin(), keyed.end());
    order_.resize(keyed.size());
    for (std::size_t i = 0; i < keyed.size(); ++i) {
      order_[i] = keyed[i].second;
      auto& slot = cells_[keyed[i].first];
      if (slot.second == 0) slot.first = static_cast<std::uint32_t>(i);
      ++slot.second;
    }
  }

  void query(const Point3& q, std::size_t& best_j, Real& best) const {
    best = std::numeric_limits<Real>::infinity();
    best_j = std::numeric_limits<std::size_t>::max();
    std::int64_t c[3];
    std::int64_t reach = 0;  // shell radius that covers the whole grid box
    std::int64_t start = 0;  // first shell that touches the grid box
    for (int a = 0; a < 3; ++a) {
      c[a] = coord_unclamped(q[a], a);
      reach = std::max({reach, std::abs(c[a] - box_lo_[a]), std::abs(c[a] - box_hi_[a])});
      if (c[a] < box_lo_[a]) start = std::max(start, box_lo_[a] - c[a]);
      if (c[a] > box_hi_[a]) start = std::max(start, c[a] - box_hi_[a]);
    }
    for (std::int64_t r = start; r <= reach; ++r) {
      visit_shell(c, r, q, best_j, best);
      const Real bound = static_cast<Real>(r - 1) * cell_;
      if (best_j != std::numeric_limits<std::size_t>::max() && bound > 0 && bound * bound > best) {
        break;
      }
    }
  }

 private:
  std::int64_t coord_unclamped(Real v, int a) const {
    const Real t = std::floor((v - origin_[a]) / cell_);
    return static_cast<std::int64_t>(std::clamp<Real>(t, -(1 << 20), 1 << 20));
  }
  std::int64_t coord(Real v, int a) const { return std::max<std::int64_t>(0, coord_unclamped(v, a)); }

  static std::uint64_t key(std::int64_t x, std::int64_t y, std::int64_t z) {
    constexpr std::int64_t off = 1 << 20;
    return (static_cast<std::uint64_t>(x + off) << 42) | (static_cast<std::uint64_t>(y + off) << 21) |
           static_cast<std::uint64_t>(z + off);
  }

  void visit_cell(std::int64_t x, std::int64_t y, std::int64_t z, const Point3& q, std::size_t& best_j,
                  Real& best) const {
    const auto it = cells_.find(key(x, y, z));
    if (it == cells_.end()) return;
    for (std::uint32_t k = 0; k < it->second.second; ++k) {
      const std::size_t j = order_[it->second.first + k];
      const Real d = sq_dist(q, refs_[j]);
      if (d < best || (d == best && j < best_j)) {
        best = d;
        best_j = j;
      }
    }
  }

  void visit_shell(const std::int64_t c[3], std::int64_t r, const Point3& q, std::size_t& best_j,
                   Real& best) const {
    const std::int64_t x0 = std::max(box_lo_[0], c[0] - r), x1 = std::min(box_hi_[0], c[0] + r);
    const std::int64_t y0 = std::max(box_lo_[1], c[1] - r), y1 = std::min(box_hi_[1], c[1] + r);
    const std::int64_t z0 = std::max(box_lo_[2], c[2] - r), z1 = std::min(box_hi_[2], c[2] + r);
    for (std::int64_t x = x0; x <= x1; ++x) {
      for (std::int64_t y = y0; y <= y1; ++y) {
        if (std::abs(x - c[0]) == r || std::abs(y - c[1]) == r) {
          for (std::int64_t z = z0; z <= z1; ++z) visit_cell(x, y, z, q, best_j, best);
        } else {
          if (c[2] - r >= z0 && c[2] - r <= z1) visit_cell(x, y, c[2] - r, q, best_j, best);
          if (r > 0 && c[2] + r >= z0 && c[2] + r <= z1) visit_cell(x, y, c[2] + r, q, best_j, best);
        }
      }
    }
  }

  std::span<const Point3> refs_;
  Point3 origin_{};
  Real cell_ = 1;
  std::int64_t box_lo_[3]{}, box_hi_[3]{};
  std::vector<std::uint32_t> order_;
  std::unordered_map<std::uint64_t, std::pair<std::uint32_t, std::uint32_t>> cells_;
};

std::vector<Point3> to_points(const Tensor& t, const char* kind) {
  if (t.rank() != 2 || t.dim(1) != 3) {
    throw ShapeError(std::string(kind) + ": expected [N,3] cloud, got " + shape_string(t.shape()));
  }
  std::vector<Point3> pts(t.dim(0));
  const auto v = t.values();
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {v[3 * i], v[3 * i + 1], v[3 * i + 2]};
  return pts;
}

}  // namespace

NeighborResult nearest_neighbors(std::span<const Point3> queries, std::span<const Point3> refs,
                                 NeighborSearch method) {
  if (refs.empty()) throw DataError("nearest_neighbors: empty reference cloud");
  if (method == NeighborSearch::automatic) {
    method = refs.size() <= kBruteForceLimit ? NeighborSearch::brute_force : NeighborSearch::grid;
  }
  if (method == NeighborSearch::brute_force) return brute_force(queries, refs);
  const CellGrid grid(refs);
  NeighborResult r;
  r.index.resize(queries.size());
  r.sq_distance.resize(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) grid.query(queries[i], r.index[i], r.sq_distance[i]);
  return r;
}

Tensor chamfer_distance(const Tensor& a, const Tensor& b, NeighborSearch method) {
  const std::vector<Point3> pa = to_points(a, "chamfer_distance");
  const std::vector<Point3> pb = to_points(b, "chamfer_distance");
  if (pa.empty() || pb.empty()) throw DataError("chamfer_distance: empty cloud");
  NeighborResult ab = nearest_neighbors(pa, pb, method);
  NeighborResult ba = nearest_neighbors(pb, pa, method);
  Real sum_ab = 0, sum_ba = 0;
  for (Real d : ab.sq_distance) sum_ab += d;
  for (Real d : ba.sq_distance) sum_ba += d;
  const Real n = static_cast<Real>(pa.size()), m = static_cast<Real>(pb.size());
  Tensor result = Tensor::scalar(sum_ab / n + sum_ba / m);
  if (Tape* tape = detail::common_tape({&a, &b}, "chamfer_distance")) {
    tape->record(result.state(), [sa = a.state(), sb = b.state(), so = result.state(),
                                  nn_ab = std::move(ab.index), nn_ba = std::move(ba.index), n, m] {
      auto* ga = detail::grad_buffer(*sa);
      auto* gb = detail::grad_buffer(*sb);
      const Real g = so->grad[0];
      auto pair_grad = [&](std::vector<Real>* gq, const std::vector<Real>& q, std::vector<Real>* gr,
                           const std::vector<Real>& r, std::size_t i, std::size_t j, Real scale) {
        for (int k = 0; k < 3; ++k) {
          const Real d = 2 * scale * (q[3 * i + k] - r[3 * j + k]);
          if (gq) (*gq)[3 * i + k] += d;
          if (gr) (*gr)[3 * j + k] -= d;
        }
      };
      for (std::size_t i = 0; i < nn_ab.size(); ++i) {
        pair_grad(ga, sa->values, gb, sb->values, i, nn_ab[i], g / n);
      }
      for (std::size_t j = 0; j < nn_ba.size(); ++j) {
        pair_grad(gb, sb->values, ga, sa->values, j, nn_ba[j], g / m);
      }
    });
  }
  return result;
}

Real chamfer_distance(const PointCloud& a, const PointCloud& b, NeighborSearch method) {
  return chamfer_distance(a.to_tensor(), b.to_tensor(), method).item();
}

namespace {

void require_label_shape(const char* kind, const Tensor& pred, std::size_t w, std::size_t h) {
  if (pred.rank() != 2 || pred.dim(0) != h || pred.dim(1) != w) {
    throw ShapeError(std::string(kind) + ": shape mismatch " + shape_string(pred.shape()) +
                     " vs [" + std::to_string(h) + "," + std::to_string(w) + "]");
  }
}

Tensor mask_tensor(const PixelMask& m) {
  std::vector<Real> v(m.bits.begin(), m.bits.end());
  return Tensor({m.height, m.width}, std::move(v));
}

}  // namespace

Tensor pseudo_cons_loss(const Tensor& pred, const DepthMap& y_cons, const PixelMask& m_consist,
                        const PixelMask& m_valid) {
  require_label_shape("pseudo_cons_loss", pred, y_cons.width, y_cons.height);
  require_label_shape("pseudo_cons_loss", pred, m_consist.width, m_consist.height);
  require_label_shape("pseudo_cons_loss", pred, m_valid.width, m_valid.height);
  const PixelMask eligible = m_consist & m_valid.complement();
  const std::size_t count = eligible.popcount();
  if (count == 0) return Tensor::scalar(0);
  // M'_valid * (M_consist * pred - y_cons); the label is masked too so values
  // stored outside m_consist cannot leak in.
  const Tensor consist = mask_tensor(m_consist);
  const Tensor inner = ops::mul(consist, ops::sub(pred, y_cons.to_tensor()));
  const Tensor masked = ops::mul(mask_tensor(m_valid.complement()), inner);
  return ops::mul_scalar(ops::sum(ops::abs(masked)), Real(1) / static_cast<Real>(count));
}

Tensor pseudo_comp_loss(const Tensor& pred, const DepthMap& y_comp, const PixelMask& m_valid) {
  require_label_shape("pseudo_comp_loss", pred, y_comp.width, y_comp.height);
  require_label_shape("pseudo_comp_loss", pred, m_valid.width, m_valid.height);
  const std::size_t count = m_valid.popcount();
  if (count == 0) return Tensor::scalar(0);
  const Tensor masked = ops::mul(mask_tensor(m_valid), ops::sub(pred, y_comp.to_tensor()));
  return ops::mul_scalar(ops::sum(ops::abs(masked)), Real(1) / static_cast<Real>(count));
}

Tensor tgc_error_map(const Tensor& image, const Tensor& reconstructed, const LossWeights& w) {
  const Tensor s = ssim(image, reconstructed);
  Tensor l1 = ops::abs(ops::sub(image, reconstructed));
  if (l1.rank() == 3) l1 = ops::mean_axis(l1, 0);
  const Tensor dissim = ops::mul_scalar(ops::add_scalar(ops::mul_scalar(s, -1), 1), w.eta / 2);
  return ops::add(dissim, ops::mul_scalar(l1, w.mu));
}

Tensor geometric_consistency_loss(const Tensor& left, const Tensor& right, const Tensor& pred_left,
                                  const Tensor& pred_right, const StereoRig& rig,
                                  const LossWeights& w) {
  if (left.shape() != right.shape() || pred_left.shape() != pred_right.shape()) {
    throw ShapeError("geometric_consistency_loss: shape mismatch " + shape_string(left.shape()) +
                     " vs " + shape_string(right.shape()));
  }
  const Tensor disp_left = disparity_from_depth(pred_left, rig.baseline, rig.focal);
  const Tensor disp_right = disparity_from_depth(pred_right, rig.baseline, rig.focal);
  const Tensor left_rebuilt = warp_horizontal(right, disp_left);
  const Tensor right_rebuilt = warp_horizontal(left, ops::mul_scalar(disp_right, -1));
  return ops::add(ops::mean(tgc_error_map(left, left_rebuilt, w)),
                  ops::mean(tgc_error_map(right, right_rebuilt, w)));
}

Tensor stage1_total(const Tensor& task_s, const Tensor& task_sr, const Tensor& sm,
                    const LossWeights& w) {
  return ops::add(ops::mul_scalar(ops::add(task_s, task_sr), w.lambda_task),
                  ops::mul_scalar(sm, w.lambda_sm));
}

Tensor stage1_stereo_total(const Tensor& task_s, const Tensor& sm, const Tensor& tgc,
                           const LossWeights& w) {
  return ops::add(ops::add(ops::mul_scalar(task_s, w.lambda_task), ops::mul_scalar(sm, w.lambda_sm)),
                  ops::mul_scalar(tgc, w.lambda_tgc));
}

Tensor stage2_total(const Tensor& cons, const Tensor& comp, const Tensor& task_s, const Tensor& sm,
                    const LossWeights& w) {
  const Tensor pseudo =
      ops::add(ops::mul_scalar(cons, w.lambda_cons), ops::mul_scalar(comp, w.lambda_comp));
  const Tensor supervised = ops::mul_scalar(task_s, (1 - w.alpha) * w.lambda_task);
  return ops::add(ops::add(ops::mul_scalar(pseudo, w.alpha), supervised),
                  ops::mul_scalar(sm, w.lambda_sm));
}

Tensor stage2_stereo_total(const Tensor& cons, const Tensor& comp, const Tensor& task_s,
                           const Tensor& sm, const Tensor& tgc, const LossWeights& w) {
  return ops::add(stage2_total(cons, comp, task_s, sm, w), ops::mul_scalar(tgc, w.lambda_tgc));
}

}  // namespace depthpl
