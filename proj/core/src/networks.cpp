#include "depthpl/networks.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "depthpl/error.hpp"
#include "depthpl/ops.hpp"
#include "depthpl/rng.hpp"

namespace depthpl {

std::size_t ParameterSet::add(std::string name, Tensor value) {
  for (const auto& e : entries_) {
    if (e.name == name) throw Error("parameter set: duplicate name " + name);
  }
  entries_.push_back({std::move(name), std::move(value)});
  return entries_.size() - 1;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw Error("parameter set: no parameter named " + name);
}

Tensor& ParameterSet::get(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

void ParameterSet::watch(Tape& tape) const {
  for (const auto& e : entries_) tape.watch(e.value);
}

namespace {

constexpr char kMagic[8] = {'D', 'P', 'L', 'C', 'K', 'P', 'T', '\n'};

template <class T>
void put_le(std::string& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  double get_f64(const char* what) { return std::bit_cast<double>(get<std::uint64_t>(what)); }
  std::string get_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint: truncated while reading ") + what);
    }
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ParameterSet& params) {
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params.entries()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t d : e.value.shape()) put_le<std::uint64_t>(out, d);
    for (Real v : e.value.values()) put_f64(out, static_cast<double>(v));
  }
  return out;
}

ParameterSet decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.get_bytes(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic))) {
    throw FormatError("checkpoint: bad magic");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  ParameterSet params;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = r.get<std::uint32_t>("name length");
    if (name_len > r.remaining()) throw FormatError("checkpoint: truncated while reading name");
    std::string name = r.get_bytes(name_len, "name");
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank > 8) throw FormatError("checkpoint: implausible rank for " + name);
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(r.get<std::uint64_t>("extent"));
      if (d != 0 && n > r.remaining() / d) {
        throw FormatError("checkpoint: truncated values for " + name);
      }
      n *= d;
    }
    if (n > r.remaining() / 8) throw FormatError("checkpoint: truncated values for " + name);
    std::vector<Real> values(n);
    for (auto& v : values) v = static_cast<Real>(r.get_f64("values"));
    try {
      params.add(std::move(name), Tensor(std::move(shape), std::move(values)));
    } catch (const Error& e) {
      throw FormatError(std::string("checkpoint: ") + e.what());
    }
  }
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes after last tensor");
  return params;
}

void save_checkpoint(const std::string& path, const ParameterSet& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("checkpoint: cannot open " + path + " for writing");
  const std::string bytes = encode_checkpoint(params);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("checkpoint: write failed for " + path);
}

ParameterSet load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("checkpoint: cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(std::string(e.what()) + " (" + path + ")");
  }
}

void assign_parameters(ParameterSet& target, const ParameterSet& loaded) {
  if (target.size() != loaded.size()) {
    throw FormatError("checkpoint: expected " + std::to_string(target.size()) + " tensors, found " +
                      std::to_string(loaded.size()));
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto& want = target.entries()[i];
    const auto& got = loaded.entries()[i];
    if (want.name != got.name || want.value.shape() != got.value.shape()) {
      throw FormatError("checkpoint: tensor " + std::to_string(i) + " is " + got.name + " " +
                        shape_string(got.value.shape()) + ", expected " + want.name + " " +
                        shape_string(want.value.shape()));
    }
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    target.entries()[i].value = loaded.entries()[i].value.detach();
  }
}

Tensor init_uniform(const Shape& shape, std::size_t fan_in, std::uint64_t seed,
                    const std::string& name) {
  Rng rng(derive_seed(seed, name));
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::vector<Real> v(shape_size(shape));
  for (auto& x : v) x = static_cast<Real>(rng.uniform(-bound, bound));
  return Tensor(shape, std::move(v));
}

void DepthNetConfig::validate() const {
  if (in_channels == 0) throw ConfigError("depth net: in_channels must be positive");
  if (channels.empty()) throw ConfigError("depth net: needs at least one level");
  for (std::size_t c : channels) {
    if (c == 0) throw ConfigError("depth net: channel widths must be positive");
  }
  if (!(d_min > 0 && d_max > d_min)) throw ConfigError("depth net: need 0 < d_min < d_max");
  if (!(slope >= 0)) throw ConfigError("depth net: slope must be non-negative");
}

DepthNet::DepthNet(const DepthNetConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const auto& ch = config_.channels;
  auto conv = [&](const std::string& name, std::size_t cin, std::size_t cout, bool zero) {
    const std::size_t fan_in = cin * 9;
    params_.add(name + ".w", zero ? Tensor::zeros({cout, cin, 3, 3})
                                  : init_uniform({cout, cin, 3, 3}, fan_in, seed, name + ".w"));
    params_.add(name + ".b", zero ? Tensor::zeros({cout}) : init_uniform({cout}, fan_in, seed, name + ".b"));
  };
  for (std::size_t i = 0; i < ch.size(); ++i) {
    conv("enc" + std::to_string(i), i == 0 ? config_.in_channels : ch[i - 1], ch[i], false);
  }
  for (std::size_t i = ch.size(); i-- > 0;) {
    const std::size_t skip = i == 0 ? config_.in_channels : ch[i - 1];
    const std::size_t out = i == 0 ? ch[0] : ch[i - 1];
    conv("dec" + std::to_string(i), ch[i] + skip, out, false);
  }
  conv("out", ch[0], 1, config_.zero_init_output);
}

Tensor DepthNet::forward(const Tensor& image) const {
  const std::size_t levels = config_.channels.size();
  if (image.rank() != 3 || image.dim(0) != config_.in_channels) {
    throw ShapeError("depth net: expected [" + std::to_string(config_.in_channels) + ",H,W], got " +
                     shape_string(image.shape()));
  }
  const std::size_t div = std::size_t{1} << levels;
  if (image.dim(1) % div != 0 || image.dim(2) % div != 0) {
    throw ShapeError("depth net: spatial dims " + shape_string(image.shape()) +
                     " not divisible by " + std::to_string(div));
  }
  std::size_t p = 0;
  auto conv = [&](const Tensor& x, std::size_t stride) {
    const Tensor& w = params_[p++];
    const Tensor& b = params_[p++];
    return ops::conv2d(x, w, &b, stride, 1);
  };
  std::vector<Tensor> skips{image};
  Tensor x = image;
  for (std::size_t i = 0; i < levels; ++i) {
    x = ops::leaky_relu(conv(x, 2), config_.slope);
    if (i + 1 < levels) skips.push_back(x);
  }
  for (std::size_t i = levels; i-- > 0;) {
    const Tensor parts[] = {ops::upsample_nearest2x(x), skips[i]};
    x = ops::leaky_relu(conv(ops::concat(parts, 0), 1), config_.slope);
  }
  const Tensor logits = conv(x, 1);
  const Tensor depth = ops::add_scalar(
      ops::mul_scalar(ops::sigmoid(logits), config_.d_max - config_.d_min), config_.d_min);
  return ops::reshape(depth, {image.dim(1), image.dim(2)});
}

DepthMap DepthNet::predict(const Image& image) const {
  return DepthMap::from_tensor(forward(image.to_tensor()));
}

void CompletionNetConfig::validate() const {
  if (feature_dim == 0 || hidden_dim == 0) throw ConfigError("completion net: widths must be positive");
  if (k == 0) throw ConfigError("completion net: k must be positive");
  if (!(slope >= 0)) throw ConfigError("completion net: slope must be non-negative");
}

CompletionNet::CompletionNet(const CompletionNetConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  const std::size_t f = config_.feature_dim, h = config_.hidden_dim;
  auto linear = [&](const std::string& name, std::size_t in, std::size_t out, std::size_t fan_in,
                    bool zero) {
    params_.add(name, zero ? Tensor::zeros({in, out}) : init_uniform({in, out}, fan_in, seed, name));
  };
  auto bias = [&](const std::string& name, std::size_t out, std::size_t fan_in, bool zero) {
    params_.add(name, zero ? Tensor::zeros({out}) : init_uniform({out}, fan_in, seed, name));
  };
  linear("enc.w", 3, f, 3, false);
  bias("enc.b", f, 3, false);
  const std::size_t fan1 = f + 3 + 2;
  linear("dec1.wg", f, h, fan1, false);
  linear("dec1.wp", 3, h, fan1, false);
  linear("dec1.wc", 2, h, fan1, false);
  bias("dec1.b", h, fan1, false);
  linear("dec2.w", h, h, h, false);
  bias("dec2.b", h, h, false);
  linear("dec3.w", h, 3, h, config_.zero_init_output);
  bias("dec3.b", 3, h, config_.zero_init_output);
}

Tensor CompletionNet::grid_codes() const {
  const std::size_t k = config_.k;
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k)) - 1e-9));
  std::vector<Real> v;
  v.reserve(2 * k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t r = i / side, c = i % side;
    const Real step = side > 1 ? Real(1) / static_cast<Real>(side - 1) : Real(0);
    v.push_back(static_cast<Real>(r) * step - Real(0.5) * (side > 1));
    v.push_back(static_cast<Real>(c) * step - Real(0.5) * (side > 1));
  }
  return Tensor({k, 2}, std::move(v));
}

Tensor CompletionNet::forward(const Tensor& sparse) const {
  if (sparse.rank() != 2 || sparse.dim(1) != 3) {
    throw ShapeError("completion net: expected [N,3] cloud, got " + shape_string(sparse.shape()));
  }
  const std::size_t n = sparse.dim(0), k = config_.k;
  if (n == 0) throw DataError("completion net: empty input cloud");
  const Real slope = config_.slope;
  const auto& P = params_;

  Tensor pts = sparse;
  if (config_.center) {
    const Tensor centroid = ops::reshape(ops::mean_axis(sparse, 0), {1, 3});
    pts = ops::sub(sparse, ops::tile_rows(centroid, n));
  }
  const Tensor feat = ops::leaky_relu(ops::add_channel_bias(ops::matmul(pts, P[0]), P[1]), slope);
  const Tensor global = ops::reshape(ops::max_with_index(feat, 0).values, {1, config_.feature_dim});

  const Tensor from_global = ops::tile_rows(ops::matmul(global, P[2]), n * k);
  const Tensor from_point = ops::repeat_rows(ops::matmul(pts, P[3]), k);
  const Tensor from_grid = ops::tile_rows(ops::matmul(grid_codes(), P[4]), n);
  Tensor z = ops::add(ops::add(from_global, from_point), from_grid);
  z = ops::leaky_relu(ops::add_channel_bias(z, P[5]), slope);
  z = ops::leaky_relu(ops::add_channel_bias(ops::matmul(z, P[6]), P[7]), slope);
  const Tensor offsets = ops::add_channel_bias(ops::matmul(z, P[8]), P[9]);
  return ops::add(ops::repeat_rows(sparse, k), offsets);
}

PointCloud CompletionNet::complete(const PointCloud& sparse) const {
  return PointCloud::from_tensor(forward(sparse.to_tensor()));
}

}  // namespace depthpl
