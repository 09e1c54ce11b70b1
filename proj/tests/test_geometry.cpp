#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "depthpl/error.hpp"
#include "depthpl/geometry.hpp"
#include "depthpl/gradcheck.hpp"
#include "depthpl/ops.hpp"
#include "test_util.hpp"

using namespace depthpl;
using depthpl::testing::random_tensor;
using depthpl::testing::weighted_sum;

namespace {

CameraModel example_camera() {
  CameraModel cam;
  cam.focal = 100;
  cam.principal_x = 96;
  cam.principal_y = 32;
  cam.epsilon = 40;
  cam.depth_scale = 1;
  return cam;
}

Tensor ramp(std::size_t h, std::size_t w) {
  std::vector<Real> v(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) v[y * w + x] = static_cast<Real>(x);
  return Tensor({h, w}, std::move(v));
}

}  // namespace

TEST(Camera, Validation) {
  CameraModel cam;
  EXPECT_NO_THROW(cam.validate());
  cam.principal_x = 192;
  EXPECT_THROW(cam.validate(), ConfigError);
  cam = CameraModel{};
  cam.depth_scale = 0;
  EXPECT_THROW(cam.validate(), ConfigError);
  cam = CameraModel{};
  cam.focal = -1;
  EXPECT_THROW(cam.validate(), ConfigError);
}

TEST(Projection, LiftExample) {
  DepthMap d(192, 64, 0);
  PixelMask m(192, 64);
  d.at(120, 40) = 10;
  m.set(120, 40, true);
  const PointCloud c = project_2d_to_3d(d, m, example_camera());
  ASSERT_EQ(c.size(), 1u);
  EXPECT_DOUBLE_EQ(c.points[0][0], 12);
  EXPECT_DOUBLE_EQ(c.points[0][1], 4);
  EXPECT_DOUBLE_EQ(c.points[0][2], 50);
  EXPECT_EQ(c.provenance[0], (PixelCoord{120, 40}));

  const Projection p = project_3d_to_2d(c, example_camera());
  EXPECT_EQ(p.mask.popcount(), 1u);
  EXPECT_TRUE(p.mask.at(120, 40));
  EXPECT_NEAR(p.depth.at(120, 40), 10, 1e-12);
}

TEST(Projection, PrincipalPointLiesOnAxis) {
  const CameraModel cam;
  DepthMap d(192, 64, 0);
  PixelMask m(192, 64);
  d.at(96, 32) = 17;
  m.set(96, 32, true);
  const PointCloud c = project_2d_to_3d(d, m, cam);
  EXPECT_EQ(c.points[0][0], 0);
  EXPECT_EQ(c.points[0][1], 0);
  EXPECT_DOUBLE_EQ(c.points[0][2], cam.depth_scale * 17 + cam.epsilon);
}

TEST(Projection, EmptyMaskEmptyCloud) {
  EXPECT_TRUE(project_2d_to_3d(DepthMap(192, 64, 5), PixelMask(192, 64), CameraModel{}).empty());
}

TEST(Projection, InvalidMaskedDepthIsAnError) {
  DepthMap d(192, 64, 5);
  d.at(3, 3) = 0;
  EXPECT_THROW(project_2d_to_3d(d, PixelMask(192, 64, true), CameraModel{}), DataError);
  EXPECT_THROW(project_2d_to_3d(d, PixelMask(10, 10, true), CameraModel{}), ShapeError);
}

TEST(Projection, MinimumDepthWinsOnDuplicates) {
  const CameraModel cam = example_camera();
  // two points on the ray through (120, 40) at depths 7 and 5
  PointCloud c;
  for (Real d : {Real(7), Real(5)}) {
    const Real z = d + cam.epsilon;
    c.points.push_back({z * 24 / 100, z * 8 / 100, z});
  }
  const Projection p = project_3d_to_2d(c, cam);
  EXPECT_EQ(p.mask.popcount(), 1u);
  EXPECT_NEAR(p.depth.at(120, 40), 5, 1e-12);
  // adding a farther point never changes the emitted depth
  c.points.push_back({Real(60) * 24 / 100, Real(60) * 8 / 100, 60});
  EXPECT_NEAR(project_3d_to_2d(c, cam).depth.at(120, 40), 5, 1e-12);
}

TEST(Projection, OutOfPlaneAndBehindAreDropped) {
  const CameraModel cam = example_camera();
  PointCloud c;
  const Real z = 50;
  c.points.push_back({z * (-3 - 96) / 100, 0, z});  // u = -3
  c.points.push_back({0, 0, Real(39)});              // z - epsilon < 0
  c.points.push_back({0, 0, Real(40)});              // z - epsilon == 0
  const Projection p = project_3d_to_2d(c, cam);
  EXPECT_EQ(p.mask.popcount(), 0u);
  EXPECT_EQ(p.dropped_out_of_plane, 1u);
  EXPECT_EQ(p.dropped_behind, 2u);
}

TEST(Projection, RoundsHalfAwayFromZero) {
  CameraModel cam = example_camera();
  cam.principal_x = 10.5;  // x = 0 lands on u = 10.5
  const PointCloud c{{{0, 0, 50}}, {}};
  const Projection p = project_3d_to_2d(c, cam);
  EXPECT_TRUE(p.mask.at(11, 32));
}

TEST(Projection, RoundTripRandomMaps) {
  Rng rng(5);
  const CameraModel cam;
  for (int trial = 0; trial < 20; ++trial) {
    DepthMap d(192, 64);
    PixelMask m(192, 64);
    for (std::size_t i = 0; i < d.depth.size(); ++i) {
      d.depth[i] = static_cast<Real>(rng.uniform(1, 80));
      m.bits[i] = rng.uniform01() < 0.5;
    }
    const Projection p = project_3d_to_2d(project_2d_to_3d(d, m, cam), cam);
    ASSERT_EQ(p.mask, m);
    for (std::size_t i = 0; i < d.depth.size(); ++i) {
      if (m.bits[i]) EXPECT_NEAR(p.depth.depth[i], d.depth[i], 1e-6);
    }
  }
}

TEST(Projection, ValidMaskCountsDistinctHits) {
  Rng rng(6);
  const CameraModel cam;
  PointCloud c;
  for (int i = 0; i < 500; ++i) {
    const Real z = static_cast<Real>(rng.uniform(40.1, 41));
    c.points.push_back({static_cast<Real>(rng.uniform(-8, 8)), static_cast<Real>(rng.uniform(-3, 3)), z});
  }
  std::set<std::pair<long, long>> hits;
  for (const auto& p : c.points) {
    const long u = std::lround(p[0] * cam.focal / p[2] + cam.principal_x);
    const long v = std::lround(p[1] * cam.focal / p[2] + cam.principal_y);
    if (u >= 0 && v >= 0 && u < 192 && v < 64) hits.insert({u, v});
  }
  EXPECT_EQ(project_3d_to_2d(c, cam).mask.popcount(), hits.size());
}

TEST(Subsample, CountsAndDeterminism) {
  EXPECT_EQ(subsample_count(122880, 0.25), 30720u);
  EXPECT_EQ(subsample_count(10, 0.25), 3u);
  EXPECT_EQ(subsample_count(7, 1), 7u);

  PointCloud c;
  for (int i = 0; i < 100; ++i) c.points.push_back({Real(i), 0, 41});
  EXPECT_EQ(uniform_subsample(c, 1, 3).points, c.points);
  const PointCloud a = uniform_subsample(c, 0.25, 9);
  const PointCloud b = uniform_subsample(c, 0.25, 9);
  EXPECT_EQ(a.size(), 25u);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, uniform_subsample(c, 0.25, 10).points);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LT(a.points[i - 1][0], a.points[i][0]);
}

TEST(Subsample, Errors) {
  EXPECT_THROW(uniform_subsample(PointCloud{}, 0.5, 1), DataError);
  PointCloud c{{{0, 0, 41}}, {}};
  EXPECT_THROW(uniform_subsample(c, 0, 1), DataError);
  EXPECT_THROW(uniform_subsample(c, 1.5, 1), DataError);
}

TEST(Subsample, LargeCloudExactCount) {
  PointCloud c;
  c.points.assign(122880, Point3{0, 0, 41});
  EXPECT_EQ(uniform_subsample(c, 0.25, 1).size(), 30720u);
}

TEST(Disparity, Examples) {
  EXPECT_DOUBLE_EQ(disparity_from_depth(Tensor({1}, {25}), 0.5, 100).item(), 2.0);
  const Tensor a = disparity_from_depth(Tensor({2}, {10, 20}), 0.54, 725);
  EXPECT_DOUBLE_EQ(a.at(0), 2 * a.at(1));
  EXPECT_NEAR(disparity_from_depth(Tensor({1}, {80}), 0.01, 1).item(), 0.01 / 80, 1e-15);
  EXPECT_THROW(disparity_from_depth(Tensor({1}, {0}), 0.5, 100), DataError);
  EXPECT_THROW(disparity_from_depth(Tensor({1}, {-2}), 0.5, 100), DataError);
}

TEST(Warp, ZeroDisparityIsIdentity) {
  Rng rng(7);
  const Tensor img = random_tensor({3, 4, 6}, rng, 0, 1);
  const Tensor out = warp_horizontal(img, Tensor::zeros({4, 6}));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(out.at(i), img.at(i));
}

TEST(Warp, RampShifts) {
  const Tensor img = ramp(3, 8);
  const Tensor one = warp_horizontal(img, Tensor::full({3, 8}, 1));
  const Tensor half = warp_horizontal(img, Tensor::full({3, 8}, 0.5));
  for (std::size_t y = 0; y < 3; ++y) {
    for (std::size_t x = 1; x < 8; ++x) {
      EXPECT_NEAR(one.at(y * 8 + x), static_cast<Real>(x) - 1, 1e-12);
      EXPECT_NEAR(half.at(y * 8 + x), static_cast<Real>(x) - 0.5, 1e-12);
    }
    EXPECT_EQ(one.at(y * 8), 0);  // clamped to the border column
  }
}

TEST(Warp, ShapeMismatch) {
  EXPECT_THROW(warp_horizontal(Tensor::zeros({3, 4, 6}), Tensor::zeros({4, 5})), ShapeError);
}

TEST(Warp, GradientsInBothArguments) {
  Rng rng(8);
  const Tensor img = random_tensor({2, 3, 7}, rng, 0, 1);
  const Tensor disp = random_tensor({3, 7}, rng, 1.2, 1.8);
  const auto g_img = check_gradients([&](const Tensor& x) { return weighted_sum(warp_horizontal(x, disp), 1); }, img);
  EXPECT_LT(g_img.max_rel_error, 1e-3);
  // interior columns only; the first samples clamp to the border
  const auto g_disp = check_gradients([&](const Tensor& a) { return weighted_sum(warp_horizontal(img, a), 2); }, disp);
  EXPECT_LT(g_disp.max_rel_error, 1e-3);
}

TEST(Ssim, Examples) {
  Rng rng(9);
  const Tensor a = random_tensor({3, 5, 6}, rng, 0, 1);
  const Tensor b = random_tensor({3, 5, 6}, rng, 0, 1);
  const Tensor self = ssim(a, a);
  for (std::size_t i = 0; i < self.size(); ++i) EXPECT_NEAR(self.at(i), 1, 1e-12);
  const Tensor ab = ssim(a, b), ba = ssim(b, a);
  for (std::size_t i = 0; i < ab.size(); ++i) EXPECT_EQ(ab.at(i), ba.at(i));
  const Tensor zo = ssim(Tensor::zeros({3, 4, 4}), Tensor::full({3, 4, 4}, 1));
  // zero variances: C1 / (1 + C1)
  for (std::size_t i = 0; i < zo.size(); ++i) {
    EXPECT_LT(zo.at(i), 0.01);
    EXPECT_NEAR(zo.at(i), kSsimC1 / (1 + kSsimC1), 1e-15);
  }
  EXPECT_THROW(ssim(a, Tensor::zeros({3, 5, 5})), ShapeError);
}

TEST(Ssim, Gradient) {
  Rng rng(10);
  const Tensor a = random_tensor({2, 4, 5}, rng, 0, 1);
  const Tensor b = random_tensor({2, 4, 5}, rng, 0, 1);
  const auto rep = check_gradients([&](const Tensor& x) { return weighted_sum(ssim(x, b), 3); }, a);
  EXPECT_LT(rep.max_rel_error, 1e-3);
}

TEST(Disparity, Gradient) {
  Rng rng(11);
  const Tensor d = random_tensor({3, 4}, rng, 2, 30);
  const auto rep = check_gradients([](const Tensor& x) { return weighted_sum(disparity_from_depth(x, 0.54, 56), 4); }, d);
  EXPECT_LT(rep.max_rel_error, 1e-3);
}
