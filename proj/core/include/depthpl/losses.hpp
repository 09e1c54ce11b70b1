#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "depthpl/tensor.hpp"
#include "depthpl/types.hpp"

namespace depthpl {

struct LossWeights {
  Real lambda_task = 100;
  Real lambda_sm = Real(0.1);
  Real lambda_cons = 1;
  Real lambda_comp = Real(0.1);
  Real lambda_tgc = 50;
  Real alpha = Real(0.7);
  Real eta = Real(0.85);
  Real mu = Real(0.15);
  Real tau = Real(0.5);  // meters

  /// Throws ConfigError when a weight is out of range.
  void validate() const;
};

/// Mean absolute difference. `gt` is treated as a constant.
Tensor task_loss(const Tensor& pred, const Tensor& gt);

/// Edge-aware first-order smoothness. pred is [H,W]; image is [C,H,W] or
/// [H,W]. Each direction is averaged over its own difference grid, and a
/// direction with no differences (extent 1) contributes 0.
Tensor smoothness_loss(const Tensor& pred, const Tensor& image);

enum class NeighborSearch { automatic, brute_force, grid };

/// Points above which `automatic` switches from brute force to the grid.
inline constexpr std::size_t kBruteForceLimit = 4096;

struct NeighborResult {
  std::vector<std::size_t> index;  // nearest reference per query
  std::vector<Real> sq_distance;
};

/// Exact nearest neighbour (squared Euclidean) of every query among refs.
/// Ties resolve to the lowest reference index for every method.
NeighborResult nearest_neighbors(std::span<const Point3> queries, std::span<const Point3> refs,
                                 NeighborSearch method = NeighborSearch::automatic);

/// Symmetric Chamfer distance between [N,3] and [M,3] clouds: mean squared
/// nearest-neighbour distance from a to b plus from b to a. Nearest pairs are
/// fixed during backward.
Tensor chamfer_distance(const Tensor& a, const Tensor& b,
                        NeighborSearch method = NeighborSearch::automatic);
Real chamfer_distance(const PointCloud& a, const PointCloud& b,
                      NeighborSearch method = NeighborSearch::automatic);

/// Masked L1 against the consistency label on pixels with m_consist set and
/// m_valid clear; 0 when no pixel qualifies.
Tensor pseudo_cons_loss(const Tensor& pred, const DepthMap& y_cons, const PixelMask& m_consist,
                        const PixelMask& m_valid);

/// Masked L1 against the completion label on m_valid pixels; 0 when empty.
Tensor pseudo_comp_loss(const Tensor& pred, const DepthMap& y_comp, const PixelMask& m_valid);

struct StereoRig {
  Real baseline = Real(0.54);  // meters
  Real focal = 0;              // pixels
};

/// Per-pixel eta*(1-SSIM)/2 + mu*|x - x~| (L1 averaged over channels), [H,W].
Tensor tgc_error_map(const Tensor& image, const Tensor& reconstructed, const LossWeights& w);

/// Left view rebuilt from the right with disparity from pred_left, and the
/// right view rebuilt from the left with disparity from pred_right; the two
/// mean error maps are summed.
Tensor geometric_consistency_loss(const Tensor& left, const Tensor& right, const Tensor& pred_left,
                                  const Tensor& pred_right, const StereoRig& rig,
                                  const LossWeights& w);

Tensor stage1_total(const Tensor& task_s, const Tensor& task_sr, const Tensor& sm,
                    const LossWeights& w);
Tensor stage1_stereo_total(const Tensor& task_s, const Tensor& sm, const Tensor& tgc,
                           const LossWeights& w);
Tensor stage2_total(const Tensor& cons, const Tensor& comp, const Tensor& task_s, const Tensor& sm,
                    const LossWeights& w);
Tensor stage2_stereo_total(const Tensor& cons, const Tensor& comp, const Tensor& task_s,
                           const Tensor& sm, const Tensor& tgc, const LossWeights& w);

}  // namespace depthpl
