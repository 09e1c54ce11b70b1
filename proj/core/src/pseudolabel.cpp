#include "depthpl/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "depthpl/error.hpp"

namespace depthpl {

ConsistencyLabel consistency_label(const DepthMap& pred_r, const DepthMap& pred_rs, Real tau) {
  if (pred_r.width != pred_rs.width || pred_r.height != pred_rs.height) {
    throw ShapeError("consistency_label: prediction sizes differ (" + std::to_string(pred_r.width) +
                     "x" + std::to_string(pred_r.height) + " vs " + std::to_string(pred_rs.width) +
                     "x" + std::to_string(pred_rs.height) + ")");
  }
  if (!(tau > 0)) throw DataError("consistency_label: tau must be positive");
  ConsistencyLabel out{PixelMask(pred_r.width, pred_r.height), DepthMap(pred_r.width, pred_r.height, 0)};
  for (std::size_t i = 0; i < pred_r.depth.size(); ++i) {
    if (std::abs(pred_r.depth[i] - pred_rs.depth[i]) < tau) {
      out.mask.bits[i] = 1;
      out.label.depth[i] = pred_r.depth[i];
    }
  }
  return out;
}

CompletionLabel completion_label(const DepthMap& y_cons, const PixelMask& m_consist,
                                 const PointCompleter& completer, const CameraModel& cam,
                                 const CompletionOptions& options) {
  if (m_consist.popcount() == 0) throw DataError("completion_label: empty consistency mask");
  if (y_cons.width != cam.width || y_cons.height != cam.height) {
    throw ShapeError("completion_label: label size " + std::to_string(y_cons.width) + "x" +
                     std::to_string(y_cons.height) + " does not match camera " +
                     std::to_string(cam.width) + "x" + std::to_string(cam.height));
  }
  CompletionLabel out;
  const PointCloud cloud = project_2d_to_3d(y_cons, m_consist, cam);
  out.sparse = uniform_subsample(cloud, options.ratio, options.seed);
  out.dense = completer.complete(out.sparse);
  for (const Point3& p : out.dense.points) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
      throw DataError("completion_label: completer produced a non-finite point");
    }
  }
  Projection proj = project_3d_to_2d(out.dense, cam);
  for (auto& d : proj.depth.depth) d = std::min(d, options.d_max);
  out.label = std::move(proj.depth);
  out.valid = std::move(proj.mask);
  out.dropped = proj.dropped_out_of_plane + proj.dropped_behind;
  return out;
}

TrainingMasks fuse_for_training(const PseudoLabelSet& set) {
  return TrainingMasks{set.m_consist & set.m_valid.complement(), set.m_valid};
}

PseudoLabelStats label_statistics(const PseudoLabelSet& set) {
  if (set.m_consist.width != set.m_valid.width || set.m_consist.height != set.m_valid.height) {
    throw ShapeError("label_statistics: mask sizes differ");
  }
  PseudoLabelStats s;
  s.pixels = set.m_consist.size();
  for (std::size_t i = 0; i < s.pixels; ++i) {
    const bool c = set.m_consist.bits[i] != 0;
    const bool v = set.m_valid.bits[i] != 0;
    if (c && v) ++s.count_refined;
    else if (c) ++s.count_2d_only;
    else if (v) ++s.count_extended;
  }
  if (s.pixels > 0) {
    const Real n = static_cast<Real>(s.pixels);
    s.frac_2d_only = static_cast<Real>(s.count_2d_only) / n;
    s.frac_refined = static_cast<Real>(s.count_refined) / n;
    s.frac_extended = static_cast<Real>(s.count_extended) / n;
  }
  return s;
}

PseudoLabelSet make_label_set(ConsistencyLabel cons, DepthMap y_comp, PixelMask m_valid) {
  PseudoLabelSet set;
  set.y_cons = std::move(cons.label);
  set.m_consist = std::move(cons.mask);
  set.y_comp = std::move(y_comp);
  set.m_valid = std::move(m_valid);
  set.stats = label_statistics(set);
  return set;
}

PseudoLabelSet empty_label_set(std::size_t width, std::size_t height) {
  return make_label_set(ConsistencyLabel{PixelMask(width, height), DepthMap(width, height, 0)},
                        DepthMap(width, height, 0), PixelMask(width, height));
}

}  // namespace depthpl
