#pragma once

#include <cstddef>
#include <cstdint>

#include "depthpl/geometry.hpp"
#include "depthpl/types.hpp"

namespace depthpl {

struct PseudoLabelStats {
  std::size_t pixels = 0;
  std::size_t count_2d_only = 0;   // m_consist and not m_valid
  std::size_t count_refined = 0;   // m_consist and m_valid
  std::size_t count_extended = 0;  // m_valid and not m_consist
  Real frac_2d_only = 0;
  Real frac_refined = 0;
  Real frac_extended = 0;
};

struct PseudoLabelSet {
  DepthMap y_cons;
  PixelMask m_consist;
  DepthMap y_comp;
  PixelMask m_valid;
  PseudoLabelStats stats;
};

struct ConsistencyLabel {
  PixelMask mask;
  DepthMap label;
};

/// Keeps pixels where the two predictions differ by strictly less than tau.
ConsistencyLabel consistency_label(const DepthMap& pred_r, const DepthMap& pred_rs, Real tau);

/// Densifies a sparse camera-space cloud.
class PointCompleter {
 public:
  virtual ~PointCompleter() = default;
  virtual PointCloud complete(const PointCloud& sparse) const = 0;
};

/// Returns its input unchanged.
class IdentityCompleter final : public PointCompleter {
 public:
  PointCloud complete(const PointCloud& sparse) const override { return sparse; }
};

struct CompletionOptions {
  Real ratio = Real(0.25);
  std::uint64_t seed = 0;
  Real d_max = 80;  // re-projected depths above this are clipped to it
};

struct CompletionLabel {
  DepthMap label;
  PixelMask valid;
  PointCloud sparse;
  PointCloud dense;
  std::size_t dropped = 0;
};

/// Lift the consistency label to 3D, subsample, complete, and project back.
CompletionLabel completion_label(const DepthMap& y_cons, const PixelMask& m_consist,
                                 const PointCompleter& completer, const CameraModel& cam,
                                 const CompletionOptions& options);

struct TrainingMasks {
  PixelMask cons;  // m_consist and not m_valid
  PixelMask comp;  // m_valid
};

/// The completion label takes precedence where both labels exist.
TrainingMasks fuse_for_training(const PseudoLabelSet& set);

PseudoLabelStats label_statistics(const PseudoLabelSet& set);

/// Assembles a set from its parts and fills in the statistics.
PseudoLabelSet make_label_set(ConsistencyLabel cons, DepthMap y_comp, PixelMask m_valid);

/// A set with no labels at all, used when an image cannot be labelled.
PseudoLabelSet empty_label_set(std::size_t width, std::size_t height);

}  // namespace depthpl
