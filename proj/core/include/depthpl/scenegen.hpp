#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "depthpl/types.hpp"

namespace depthpl {

/// Axis-aligned box in world coordinates (x right, y down, z forward; the
/// ground is the plane y = camera_height).
struct Box {
  Real x0 = 0, x1 = 0;
  Real y0 = 0, y1 = 0;
  Real z0 = 0, z1 = 0;
  std::array<Real, 3> albedo{0.5, 0.5, 0.5};
};

struct Scene {
  std::uint64_t seed = 0;
  Real camera_height = Real(1.65);
  Real pitch = 0;  // radians, positive tilts the camera down
  Real baseline = Real(0.54);
  Real d_max = 80;
  std::array<Real, 3> ground_albedo{0.35, 0.35, 0.35};
  std::array<Real, 3> sky_color{0.6, 0.75, 0.95};
  std::vector<Box> boxes;
};

struct SceneParams {
  std::size_t min_objects = 3;
  std::size_t max_objects = 7;
  Real camera_height = Real(1.65);
  Real max_pitch = Real(0.02);
  Real baseline = Real(0.54);
  Real d_max = 80;
};

/// Random street-like layout: building walls along both sides, a few
/// car-sized boxes on the ground, sometimes a far wall closing the view.
Scene random_scene(std::uint64_t seed, const SceneParams& params);

/// Pinhole used for rendering. Pixel (u, v) looks along
/// ((u - principal_x) / focal, (v - principal_y) / focal, 1).
struct RenderCamera {
  Real focal = 112;
  Real principal_x = 96;
  Real principal_y = 32;
  std::size_t width = 192;
  std::size_t height = 64;
};

enum class RigSide { left, right };

/// Depth along the optical axis of the first hit, clipped to d_max (no hit
/// gives d_max). Evaluates the analytic ray intersection exactly.
Real ray_depth(const Scene& scene, const RenderCamera& cam, Real u, Real v, RigSide side);

struct DomainStyle {
  std::array<Real, 3> gain{1, 1, 1};
  std::array<Real, 3> bias{0, 0, 0};
  Real gamma = 1;
  Real texture_amplitude = 0;   // world-anchored value noise
  Real texture_frequency = 1;   // cycles per meter
  Real noise_sigma = 0;         // per-pixel Gaussian noise
  Real shading = Real(0.6);     // weight of the Lambert term

  static DomainStyle synthetic();
  static DomainStyle real();
};

struct RenderResult {
  Image image;
  DepthMap depth;
};

/// Ray-casts one view. noise_seed drives the per-pixel noise only.
RenderResult render(const Scene& scene, const DomainStyle& style, const RenderCamera& cam,
                    RigSide side, std::uint64_t noise_seed);

/// Per-channel mean/std transfer from style_ref to content, clamped to
/// [0, 1]. A flat content channel is only shifted to the reference mean.
Image stylize(const Image& content, const Image& style_ref);

struct DatasetConfig {
  std::size_t source_count = 50;
  std::size_t target_count = 50;
  std::size_t eval_count = 10;
  bool stereo = false;
  RenderCamera camera;
  SceneParams scene;
};

struct Sample {
  std::uint64_t scene_seed = 0;
  Image image;                      // left view for stereo targets
  std::optional<DepthMap> depth;    // source and eval only
  std::optional<Image> right;       // stereo targets only
};

struct Dataset {
  std::vector<Sample> source;        // synthetic style with depth
  std::vector<Sample> target;        // real style, no depth
  std::vector<Sample> eval;          // real style, held-out depth
};

/// Scene seeds for each role; throws DataError if any two coincide.
struct SceneSeeds {
  std::vector<std::uint64_t> source, target, eval;
};
SceneSeeds scene_seeds(const DatasetConfig& config, std::uint64_t seed);

Dataset make_dataset(const DatasetConfig& config, std::uint64_t seed);

}  // namespace depthpl
