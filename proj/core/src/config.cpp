#include "depthpl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "depthpl/error.hpp"
#include "depthpl/formats.hpp"

namespace depthpl {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::uint64_t to_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

std::size_t to_size(std::string_view s, std::size_t lo, std::size_t hi = SIZE_MAX) {
  const std::uint64_t v = to_u64(s);
  if (v < lo || v > hi) {
    throw ConfigError("value " + std::string(s) + " outside [" + std::to_string(lo) + ", " +
                      (hi == SIZE_MAX ? std::string("inf") : std::to_string(hi)) + "]");
  }
  return static_cast<std::size_t>(v);
}

struct Range {
  double lo = -HUGE_VAL;
  double hi = HUGE_VAL;
  bool lo_open = false;
};

Real to_real(std::string_view s, Range r) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError("expected a finite number, got '" + std::string(s) + "'");
  }
  if ((r.lo_open ? !(v > r.lo) : !(v >= r.lo)) || !(v <= r.hi)) {
    std::ostringstream os;
    os << "value " << s << " outside " << (r.lo_open ? "(" : "[") << r.lo << ", " << r.hi << "]";
    throw ConfigError(os.str());
  }
  return static_cast<Real>(v);
}

bool to_bool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("expected true or false, got '" + std::string(s) + "'");
}

std::string fmt_real(Real v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), static_cast<double>(v));
  return std::string(buf, res.ptr);
}

template <class T>
std::string fmt_opt(const std::optional<T>& v) {
  if (!v) return "auto";
  if constexpr (std::is_floating_point_v<T>) return fmt_real(*v);
  else return std::to_string(*v);
}

constexpr Range kPositive{0, HUGE_VAL, true};
constexpr Range kNonNegative{0, HUGE_VAL, false};

struct Field {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    auto size_field = [&](const char* key, std::size_t RunConfig::*m, std::size_t lo,
                          std::size_t hi = SIZE_MAX) {
      t[key] = {[=](RunConfig& c, std::string_view v) { c.*m = to_size(v, lo, hi); },
                [=](const RunConfig& c) { return std::to_string(c.*m); }};
    };
    auto real_field = [&](const char* key, Real RunConfig::*m, Range r) {
      t[key] = {[=](RunConfig& c, std::string_view v) { c.*m = to_real(v, r); },
                [=](const RunConfig& c) { return fmt_real(c.*m); }};
    };
    auto weight_field = [&](const char* key, Real LossWeights::*m, Range r) {
      t[key] = {[=](RunConfig& c, std::string_view v) { c.weights.*m = to_real(v, r); },
                [=](const RunConfig& c) { return fmt_real(c.weights.*m); }};
    };
    auto auto_real = [&](const char* key, std::optional<Real> RunConfig::*m, Range r) {
      t[key] = {[=](RunConfig& c, std::string_view v) {
                  c.*m = v == "auto" ? std::nullopt : std::optional<Real>(to_real(v, r));
                },
                [=](const RunConfig& c) { return fmt_opt(c.*m); }};
    };

    t["seed"] = {[](RunConfig& c, std::string_view v) { c.seed = to_u64(v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }};
    size_field("width", &RunConfig::width, 1, 4096);
    size_field("height", &RunConfig::height, 1, 4096);
    size_field("source_count", &RunConfig::source_count, 1);
    size_field("target_count", &RunConfig::target_count, 1);
    size_field("eval_count", &RunConfig::eval_count, 1);
    auto_real("scene_focal", &RunConfig::scene_focal, kPositive);
    real_field("baseline", &RunConfig::baseline, kPositive);
    real_field("camera_height", &RunConfig::camera_height, kPositive);
    size_field("min_objects", &RunConfig::min_objects, 0, 64);
    size_field("max_objects", &RunConfig::max_objects, 0, 64);
    real_field("d_min", &RunConfig::d_min, kPositive);
    real_field("d_max", &RunConfig::d_max, kPositive);

    real_field("focal", &RunConfig::focal, kPositive);
    auto_real("principal_x", &RunConfig::principal_x, kNonNegative);
    auto_real("principal_y", &RunConfig::principal_y, kNonNegative);
    real_field("epsilon", &RunConfig::epsilon, kNonNegative);
    auto_real("depth_scale", &RunConfig::depth_scale, kPositive);

    weight_field("lambda_task", &LossWeights::lambda_task, kNonNegative);
    weight_field("lambda_sm", &LossWeights::lambda_sm, kNonNegative);
    weight_field("lambda_cons", &LossWeights::lambda_cons, kNonNegative);
    weight_field("lambda_comp", &LossWeights::lambda_comp, kNonNegative);
    weight_field("lambda_tgc", &LossWeights::lambda_tgc, kNonNegative);
    weight_field("alpha", &LossWeights::alpha, Range{0, 1, false});
    weight_field("eta", &LossWeights::eta, kNonNegative);
    weight_field("mu", &LossWeights::mu, kNonNegative);
    weight_field("tau", &LossWeights::tau, kPositive);

    t["mode"] = {[](RunConfig& c, std::string_view v) {
                   if (v == "single") c.mode = TrainMode::single;
                   else if (v == "stereo") c.mode = TrainMode::stereo;
                   else throw ConfigError("expected single or stereo, got '" + std::string(v) + "'");
                 },
                 [](const RunConfig& c) { return std::string(c.mode == TrainMode::single ? "single" : "stereo"); }};
    real_field("learning_rate", &RunConfig::learning_rate, kPositive);
    size_field("decay_start", &RunConfig::decay_start, 0);
    size_field("epochs_stage1", &RunConfig::epochs_stage1, 1);
    size_field("epochs_stage2", &RunConfig::epochs_stage2, 1);
    size_field("epochs_completion", &RunConfig::epochs_completion, 1);
    size_field("epochs_stereo_extra", &RunConfig::epochs_stereo_extra, 1);
    size_field("batch_size", &RunConfig::batch_size, 1, 1024);
    size_field("stylized_copies", &RunConfig::stylized_copies, 1, 64);

    t["depth_channels"] = {
        [](RunConfig& c, std::string_view v) {
          std::vector<std::size_t> out;
          while (true) {
            const auto comma = v.find(',');
            out.push_back(to_size(trim(v.substr(0, comma)), 1, 4096));
            if (comma == std::string_view::npos) break;
            v.remove_prefix(comma + 1);
          }
          if (out.size() > 8) throw ConfigError("at most 8 levels are supported");
          c.depth_channels = std::move(out);
        },
        [](const RunConfig& c) {
          std::string s;
          for (std::size_t i = 0; i < c.depth_channels.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(c.depth_channels[i]);
          }
          return s;
        }};
    size_field("completion_feature_dim", &RunConfig::completion_feature_dim, 1, 4096);
    size_field("completion_hidden_dim", &RunConfig::completion_hidden_dim, 1, 4096);
    t["completion_k"] = {[](RunConfig& c, std::string_view v) {
                           c.completion_k = v == "auto" ? std::nullopt
                                                        : std::optional<std::size_t>(to_size(v, 1, 64));
                         },
                         [](const RunConfig& c) { return fmt_opt(c.completion_k); }};
    t["completion_center"] = {[](RunConfig& c, std::string_view v) { c.completion_center = to_bool(v); },
                              [](const RunConfig& c) { return std::string(c.completion_center ? "true" : "false"); }};
    real_field("completion_learning_rate", &RunConfig::completion_learning_rate, kPositive);
    real_field("sampling_ratio", &RunConfig::sampling_ratio, Range{0, 1, true});

    t["label_variant"] = {[](RunConfig& c, std::string_view v) {
                            if (v == "full") c.label_variant = LabelVariant::full;
                            else if (v == "cons_only") c.label_variant = LabelVariant::cons_only;
                            else throw ConfigError("expected full or cons_only, got '" + std::string(v) + "'");
                          },
                          [](const RunConfig& c) {
                            return std::string(c.label_variant == LabelVariant::full ? "full" : "cons_only");
                          }};
    real_field("eval_cap", &RunConfig::eval_cap, kPositive);
    return t;
  }();
  return table;
}

void set_field(RunConfig& c, std::string_view key, std::string_view value) {
  const auto it = fields().find(std::string(key));
  if (it == fields().end()) throw ConfigError("unknown key '" + std::string(key) + "'");
  try {
    it->second.set(c, value);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

std::pair<std::string_view, std::string_view> split_assignment(std::string_view line) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected key = value");
  const auto key = trim(line.substr(0, eq));
  const auto value = trim(line.substr(eq + 1));
  if (key.empty()) throw ConfigError("missing key before '='");
  if (value.empty()) throw ConfigError("missing value for '" + std::string(key) + "'");
  return {key, value};
}

}  // namespace

void RunConfig::validate() const {
  camera().validate();
  weights.validate();
  depth_net().validate();
  completion_net().validate();
  if (!(d_max > d_min)) throw ConfigError("d_max must exceed d_min");
  const std::size_t div = std::size_t{1} << depth_channels.size();
  if (width % div != 0 || height % div != 0) {
    throw ConfigError("width and height must be divisible by " + std::to_string(div) +
                      " for " + std::to_string(depth_channels.size()) + " depth levels");
  }
  if (min_objects > max_objects) throw ConfigError("min_objects exceeds max_objects");
  if (!(eval_cap <= d_max)) throw ConfigError("eval_cap must not exceed d_max");
  if (!(epsilon + (depth_scale ? *depth_scale : 1 / d_max) * d_min > 0)) {
    throw ConfigError("shifted depth must stay positive");
  }
}

Real RunConfig::resolved_scene_focal() const {
  return scene_focal ? *scene_focal : focal * static_cast<Real>(width) / Real(1242);
}

std::size_t RunConfig::resolved_completion_k() const {
  if (completion_k) return *completion_k;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(1.0 / static_cast<double>(sampling_ratio))));
}

CameraModel RunConfig::camera() const {
  CameraModel cam;
  cam.focal = focal;
  cam.principal_x = principal_x ? *principal_x : static_cast<Real>(width) / 2;
  cam.principal_y = principal_y ? *principal_y : static_cast<Real>(height) / 2;
  cam.epsilon = epsilon;
  cam.depth_scale = depth_scale ? *depth_scale : 1 / d_max;
  cam.width = width;
  cam.height = height;
  return cam;
}

RenderCamera RunConfig::render_camera() const {
  RenderCamera cam;
  cam.focal = resolved_scene_focal();
  cam.principal_x = static_cast<Real>(width) / 2;
  cam.principal_y = static_cast<Real>(height) / 2;
  cam.width = width;
  cam.height = height;
  return cam;
}

StereoRig RunConfig::stereo_rig() const { return StereoRig{baseline, resolved_scene_focal()}; }

DepthNetConfig RunConfig::depth_net() const {
  DepthNetConfig c;
  c.channels = depth_channels;
  c.d_min = d_min;
  c.d_max = d_max;
  return c;
}

CompletionNetConfig RunConfig::completion_net() const {
  CompletionNetConfig c;
  c.feature_dim = completion_feature_dim;
  c.hidden_dim = completion_hidden_dim;
  c.k = resolved_completion_k();
  c.center = completion_center;
  return c;
}

DatasetConfig RunConfig::dataset() const {
  DatasetConfig d;
  d.source_count = source_count;
  d.target_count = target_count;
  d.eval_count = eval_count;
  d.stereo = mode == TrainMode::stereo;
  d.camera = render_camera();
  d.scene.min_objects = min_objects;
  d.scene.max_objects = max_objects;
  d.scene.camera_height = camera_height;
  d.scene.baseline = baseline;
  d.scene.d_max = d_max;
  return d;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
  return out;
}

RunConfig parse_config(std::string_view text, const std::string& origin) {
  RunConfig c;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      const auto [key, value] = split_assignment(line);
      if (!seen.insert(std::string(key)).second) {
        throw ConfigError("duplicate key '" + std::string(key) + "'");
      }
      set_field(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError&) {
    throw ConfigError("cannot read config file " + path);
  }
  return parse_config(text, path);
}

void apply_override(RunConfig& config, std::string_view assignment) {
  try {
    const auto [key, value] = split_assignment(assignment);
    set_field(config, key, value);
    config.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("override '" + std::string(assignment) + "': " + e.what());
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : fields()) keys.push_back(key);
  return keys;
}

}  // namespace depthpl
