#include <gtest/gtest.h>

#include <algorithm>
#include <string>

#include "depthpl/config.hpp"
#include "depthpl/error.hpp"

using namespace depthpl;

namespace {

std::string error_of(std::string_view text) {
  try {
    parse_config(text, "t.cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, DefaultsAndDerivedValues) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c.width, 192u);
  EXPECT_DOUBLE_EQ(c.resolved_scene_focal(), 725.0 * 192 / 1242);
  EXPECT_EQ(c.resolved_completion_k(), 4u);
  const CameraModel cam = c.camera();
  EXPECT_EQ(cam.focal, 725);
  EXPECT_EQ(cam.principal_x, 96);
  EXPECT_EQ(cam.principal_y, 32);
  EXPECT_DOUBLE_EQ(cam.depth_scale, 1.0 / 80);
  EXPECT_EQ(c.weights.lambda_task, 100);
  EXPECT_EQ(c.weights.lambda_tgc, 50);
  EXPECT_EQ(c.weights.alpha, Real(0.7));
  EXPECT_EQ(c.render_camera().focal, c.resolved_scene_focal());
  EXPECT_EQ(c.stereo_rig().focal, c.resolved_scene_focal());
}

TEST(Config, ToyFileParses) {
  const RunConfig c = load_config(std::string(DEPTHPL_SOURCE_DIR) + "/configs/toy.cfg");
  EXPECT_EQ(c.width, 96u);
  EXPECT_EQ(c.height, 32u);
  EXPECT_EQ(c.depth_channels, (std::vector<std::size_t>{8, 16, 32, 64}));
  EXPECT_EQ(c.camera().principal_x, 48);
  EXPECT_EQ(c.dataset().source_count, 40u);
}

TEST(Config, TextRoundTrip) {
  RunConfig c = parse_config("seed = 99\nmode = stereo\ntau = 0.3\ndepth_channels = 4,8\nprincipal_x = 50\n");
  const std::string text = c.to_text();
  EXPECT_EQ(parse_config(text).to_text(), text);
  EXPECT_NE(text.find("tau = 0.3"), std::string::npos) << text;
  EXPECT_NE(text.find("depth_scale = auto"), std::string::npos) << text;
  EXPECT_EQ(parse_config(text).seed, 99u);
}

TEST(Config, CommentsAndWhitespace) {
  const RunConfig c = parse_config("  # header\n\nseed=5   # trailing\n\tlambda_sm = 0.2\n");
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.weights.lambda_sm, Real(0.2));
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_NE(error_of("seed = 1\nbogus = 2\n").find("t.cfg:2"), std::string::npos);
  EXPECT_NE(error_of("seed = 1\nseed = 2\n").find("duplicate"), std::string::npos);
  EXPECT_NE(error_of("alpha = 2\n").find("t.cfg"), std::string::npos);
  EXPECT_NE(error_of("width = abc\n").find("t.cfg:1"), std::string::npos);
  EXPECT_NE(error_of("no equals sign\n").find("t.cfg:1"), std::string::npos);
  EXPECT_NE(error_of("mode = triple\n").find("single or stereo"), std::string::npos);
}

TEST(Config, CrossFieldValidation) {
  EXPECT_FALSE(error_of("width = 100\n").empty());  // not divisible by 16
  EXPECT_FALSE(error_of("d_min = 90\n").empty());
  EXPECT_FALSE(error_of("min_objects = 9\n").empty());
  EXPECT_FALSE(error_of("eval_cap = 100\n").empty());
  EXPECT_FALSE(error_of("sampling_ratio = 0\n").empty());
  EXPECT_FALSE(error_of("depth_channels = 1,2,3,4,5,6,7,8,9\n").empty());
  EXPECT_TRUE(error_of("eval_cap = 50\n").empty());
}

TEST(Config, Overrides) {
  RunConfig c = parse_config("");
  apply_override(c, "tau=0.3");
  EXPECT_EQ(c.weights.tau, Real(0.3));
  apply_override(c, "sampling_ratio = 0.5");
  EXPECT_EQ(c.resolved_completion_k(), 2u);
  EXPECT_THROW(apply_override(c, "nope=1"), ConfigError);
  EXPECT_THROW(apply_override(c, "tau"), ConfigError);
  EXPECT_THROW(apply_override(c, "alpha=-1"), ConfigError);
}

TEST(Config, MissingFile) {
  EXPECT_THROW(load_config("/nonexistent/depthpl.cfg"), ConfigError);
}

TEST(Config, KeysAreSorted) {
  const auto keys = config_keys();
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
  EXPECT_NE(std::find(keys.begin(), keys.end(), "lambda_comp"), keys.end());
}
