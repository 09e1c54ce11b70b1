#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "depthpl/geometry.hpp"
#include "depthpl/losses.hpp"
#include "depthpl/networks.hpp"
#include "depthpl/scenegen.hpp"

namespace depthpl {

enum class TrainMode { single, stereo };
enum class LabelVariant { full, cons_only };

/// Every tunable of a run. Defaults follow the published training recipe;
/// `std::nullopt` fields are derived ("auto") from other fields.
struct RunConfig {
  std::uint64_t seed = 0;

  // Data and rendering.
  std::size_t width = 192;
  std::size_t height = 64;
  std::size_t source_count = 50;
  std::size_t target_count = 50;
  std::size_t eval_count = 10;
  std::optional<Real> scene_focal;  // auto: focal * width / 1242
  Real baseline = Real(0.54);
  Real camera_height = Real(1.65);
  std::size_t min_objects = 3;
  std::size_t max_objects = 7;
  Real d_min = 1;
  Real d_max = 80;

  // Projection camera.
  Real focal = 725;
  std::optional<Real> principal_x;  // auto: width / 2
  std::optional<Real> principal_y;  // auto: height / 2
  Real epsilon = 40;
  std::optional<Real> depth_scale;  // auto: 1 / d_max

  LossWeights weights;

  // Optimisation.
  TrainMode mode = TrainMode::single;
  Real learning_rate = Real(1e-4);
  std::size_t decay_start = 10;
  std::size_t epochs_stage1 = 20;
  std::size_t epochs_stage2 = 10;
  std::size_t epochs_completion = 20;
  std::size_t epochs_stereo_extra = 10;
  std::size_t batch_size = 4;
  std::size_t stylized_copies = 3;

  // Networks.
  std::vector<std::size_t> depth_channels{16, 32, 64, 128};
  std::size_t completion_feature_dim = 256;
  std::size_t completion_hidden_dim = 128;
  std::optional<std::size_t> completion_k;  // auto: round(1 / sampling_ratio)
  bool completion_center = true;
  Real completion_learning_rate = Real(1e-4);
  Real sampling_ratio = Real(0.25);

  // Pseudo-labels and evaluation.
  LabelVariant label_variant = LabelVariant::full;
  Real eval_cap = 80;

  /// Cross-field checks; throws ConfigError.
  void validate() const;

  Real resolved_scene_focal() const;
  std::size_t resolved_completion_k() const;
  CameraModel camera() const;
  RenderCamera render_camera() const;
  StereoRig stereo_rig() const;
  DepthNetConfig depth_net() const;
  CompletionNetConfig completion_net() const;
  DatasetConfig dataset() const;

  /// Canonical key=value text; parsing it yields an equal config.
  std::string to_text() const;
};

/// Parses key=value text; `origin` names the source in error messages.
/// Unknown keys, duplicates and invalid values raise ConfigError with the
/// line number.
RunConfig parse_config(std::string_view text, const std::string& origin = "config");
RunConfig load_config(const std::string& path);

/// Applies one "key=value" override on top of a parsed config.
void apply_override(RunConfig& config, std::string_view assignment);

/// Sorted list of accepted keys.
std::vector<std::string> config_keys();

}  // namespace depthpl
