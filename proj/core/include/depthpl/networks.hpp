#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "depthpl/pseudolabel.hpp"
#include "depthpl/tensor.hpp"
#include "depthpl/types.hpp"

namespace depthpl {

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Ordered, named collection of parameter tensors.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value);
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  const Tensor& operator[](std::size_t i) const { return entries_[i].value; }
  Tensor& operator[](std::size_t i) { return entries_[i].value; }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  std::vector<NamedTensor>& entries() { return entries_; }
  const std::vector<NamedTensor>& entries() const { return entries_; }

  /// Registers every parameter as a leaf on `tape`.
  void watch(Tape& tape) const;

 private:
  std::vector<NamedTensor> entries_;
};

/// Checkpoint layout: "DPLCKPT\n", u32 version, u32 tensor count, then per
/// tensor u32 name length, name bytes, u32 rank, u64 extents, f64 values;
/// all integers and floats little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::string encode_checkpoint(const ParameterSet& params);
ParameterSet decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::string& path, const ParameterSet& params);
ParameterSet load_checkpoint(const std::string& path);
/// Copies values from `loaded` into `target`, requiring identical names and
/// shapes in the same order.
void assign_parameters(ParameterSet& target, const ParameterSet& loaded);

struct DepthNetConfig {
  std::size_t in_channels = 3;
  std::vector<std::size_t> channels{16, 32, 64, 128};  // one per stride-2 level
  Real d_min = 1;
  Real d_max = 80;
  Real slope = Real(0.2);
  bool zero_init_output = false;

  void validate() const;
};

/// Encoder-decoder with skip connections; output depth is
/// d_min + (d_max - d_min) * sigmoid(logits).
class DepthNet {
 public:
  DepthNet(const DepthNetConfig& config, std::uint64_t seed);

  /// image [C,H,W] -> depth [H,W]. H and W must be divisible by 2^levels.
  Tensor forward(const Tensor& image) const;
  DepthMap predict(const Image& image) const;

  const DepthNetConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

 private:
  DepthNetConfig config_;
  ParameterSet params_;
};

struct CompletionNetConfig {
  std::size_t feature_dim = 256;  // global feature width
  std::size_t hidden_dim = 128;   // decoder width
  std::size_t k = 4;              // offspring per input point
  bool center = true;             // feed centroid-relative coordinates
  bool zero_init_output = false;
  Real slope = Real(0.2);

  void validate() const;
};

/// One point-wise MLP with global max pooling as encoder; a folding decoder
/// emits k points per input point as the input point plus a predicted
/// offset conditioned on (global feature, point, 2D grid code).
class CompletionNet final : public PointCompleter {
 public:
  CompletionNet(const CompletionNetConfig& config, std::uint64_t seed);

  /// sparse [N,3] -> dense [N*k,3]; rows i*k .. i*k+k-1 descend from point i.
  Tensor forward(const Tensor& sparse) const;
  PointCloud complete(const PointCloud& sparse) const override;

  const CompletionNetConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  /// The k grid codes, [k,2].
  Tensor grid_codes() const;

 private:
  CompletionNetConfig config_;
  ParameterSet params_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) tensor drawn from a seed derived
/// from (seed, name).
Tensor init_uniform(const Shape& shape, std::size_t fan_in, std::uint64_t seed,
                    const std::string& name);

}  // namespace depthpl
