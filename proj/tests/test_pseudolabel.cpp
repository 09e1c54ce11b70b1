#include <gtest/gtest.h>

#include <cmath>

#include "depthpl/error.hpp"
#include "depthpl/pseudolabel.hpp"
#include "depthpl/rng.hpp"

using namespace depthpl;

namespace {

DepthMap map2x2(Real a, Real b, Real c, Real d) {
  DepthMap m(2, 2);
  m.depth = {a, b, c, d};
  return m;
}

// moves every point one pixel to the right at its own depth
class OffsetCompleter final : public PointCompleter {
 public:
  explicit OffsetCompleter(Real focal) : focal_(focal) {}
  PointCloud complete(const PointCloud& sparse) const override {
    PointCloud out = sparse;
    for (auto& p : out.points) p[0] += p[2] / focal_;
    return out;
  }

 private:
  Real focal_;
};

CameraModel small_camera() {
  CameraModel cam;
  cam.width = 24;
  cam.height = 8;
  cam.principal_x = 12;
  cam.principal_y = 4;
  cam.focal = 30;
  return cam;
}

void random_label(Rng& rng, DepthMap& d, PixelMask& m, double p) {
  for (std::size_t i = 0; i < d.depth.size(); ++i) {
    d.depth[i] = static_cast<Real>(rng.uniform(2, 70));
    m.bits[i] = rng.uniform01() < p;
  }
}

PixelMask random_mask(Rng& rng, std::size_t w, std::size_t h, double p) {
  PixelMask m(w, h);
  for (auto& b : m.bits) b = rng.uniform01() < p;
  return m;
}

}  // namespace

TEST(Consistency, Example) {
  const auto out = consistency_label(map2x2(10, 20, 30, 40), map2x2(10.2, 21, 30.4, 38), 0.5);
  EXPECT_EQ(out.mask.bits, (std::vector<std::uint8_t>{1, 0, 1, 0}));
  EXPECT_EQ(out.label.depth, (std::vector<Real>{10, 0, 30, 0}));
}

TEST(Consistency, IdenticalAndStrict) {
  const DepthMap a = map2x2(1, 2, 3, 4);
  const auto same = consistency_label(a, a, 0.1);
  EXPECT_EQ(same.mask.popcount(), 4u);
  EXPECT_EQ(same.label.depth, a.depth);
  // 0.5 and 0.25 are exact in binary, so the difference equals tau exactly
  const auto edge = consistency_label(map2x2(10, 10, 10, 10), map2x2(10.5, 9.5, 10.25, 10), 0.5);
  EXPECT_EQ(edge.mask.bits, (std::vector<std::uint8_t>{0, 0, 1, 1}));
  EXPECT_THROW(consistency_label(a, DepthMap(3, 2), 0.5), ShapeError);
}

TEST(Consistency, RaisingTauNeverShrinks) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    DepthMap a(6, 4), b(6, 4);
    for (std::size_t i = 0; i < a.depth.size(); ++i) {
      a.depth[i] = static_cast<Real>(rng.uniform(1, 50));
      b.depth[i] = a.depth[i] + static_cast<Real>(rng.uniform(-2, 2));
    }
    const Real lo = static_cast<Real>(rng.uniform(0.01, 1));
    const Real hi = lo + static_cast<Real>(rng.uniform(0, 1));
    EXPECT_TRUE(subset_of(consistency_label(a, b, lo).mask, consistency_label(a, b, hi).mask));
  }
}

TEST(Completion, IdentityCompleterRatioOne) {
  Rng rng(2);
  const CameraModel cam = small_camera();
  const IdentityCompleter id;
  for (int t = 0; t < 10; ++t) {
    DepthMap y(24, 8);
    PixelMask m(24, 8);
    random_label(rng, y, m, 0.6);
    for (std::size_t i = 0; i < y.depth.size(); ++i)
      if (!m.bits[i]) y.depth[i] = 0;
    const auto out = completion_label(y, m, id, cam, CompletionOptions{1, 5, 80});
    ASSERT_EQ(out.valid, m);
    for (std::size_t i = 0; i < y.depth.size(); ++i) EXPECT_NEAR(out.label.depth[i], y.depth[i], 1e-6);
    EXPECT_EQ(out.dropped, 0u);
  }
}

TEST(Completion, IdentityCompleterSubsample) {
  Rng rng(3);
  const CameraModel cam = small_camera();
  DepthMap y(24, 8);
  PixelMask m(24, 8);
  random_label(rng, y, m, 0.7);
  const auto out = completion_label(y, m, IdentityCompleter{}, cam, CompletionOptions{0.25, 9, 80});
  EXPECT_TRUE(subset_of(out.valid, m));
  EXPECT_EQ(out.valid.popcount(), subsample_count(m.popcount(), 0.25));
  EXPECT_EQ(out.sparse.size(), out.valid.popcount());
}

TEST(Completion, OffsetCompleterShiftsOneColumn) {
  Rng rng(4);
  const CameraModel cam = small_camera();
  DepthMap y(24, 8);
  PixelMask m(24, 8);
  random_label(rng, y, m, 0.5);
  const auto out = completion_label(y, m, OffsetCompleter(cam.focal), cam, CompletionOptions{1, 0, 80});
  std::size_t edge = 0;
  for (std::size_t v = 0; v < 8; ++v) {
    for (std::size_t u = 0; u < 24; ++u) {
      const bool expect = u > 0 && m.at(u - 1, v);
      EXPECT_EQ(out.valid.at(u, v), expect) << u << "," << v;
      if (expect) EXPECT_NEAR(out.label.at(u, v), y.at(u - 1, v), 1e-6);
    }
    if (m.at(23, v)) ++edge;
  }
  EXPECT_EQ(out.dropped, edge);
}

TEST(Completion, ClipsToDmax) {
  const CameraModel cam = small_camera();
  DepthMap y(24, 8, 60);
  const PixelMask m(24, 8, true);
  const auto out = completion_label(y, m, IdentityCompleter{}, cam, CompletionOptions{1, 0, 50});
  for (Real d : out.label.depth) EXPECT_EQ(d, 50);
}

TEST(Completion, Errors) {
  const CameraModel cam = small_camera();
  EXPECT_THROW(completion_label(DepthMap(24, 8), PixelMask(24, 8), IdentityCompleter{}, cam, {}),
               DataError);
  EXPECT_THROW(completion_label(DepthMap(12, 8, 5), PixelMask(12, 8, true), IdentityCompleter{}, cam, {}),
               ShapeError);
}

TEST(Fuse, Precedence) {
  PseudoLabelSet set;
  set.m_consist = PixelMask(3, 1);
  set.m_valid = PixelMask(3, 1);
  set.m_consist.bits = {1, 1, 0};
  set.m_valid.bits = {1, 0, 0};
  const auto f = fuse_for_training(set);
  EXPECT_EQ(f.comp.bits, (std::vector<std::uint8_t>{1, 0, 0}));  // both: completion only
  EXPECT_EQ(f.cons.bits, (std::vector<std::uint8_t>{0, 1, 0}));  // consist only
}

TEST(Stats, Examples) {
  PseudoLabelSet set;
  set.m_consist = PixelMask(10, 10);
  set.m_valid = PixelMask(10, 10);
  for (std::size_t i = 0; i < 10; ++i) set.m_consist.bits[i] = 1;
  for (std::size_t i = 50; i < 70; ++i) set.m_valid.bits[i] = 1;
  auto s = label_statistics(set);
  EXPECT_DOUBLE_EQ(s.frac_2d_only, 0.10);
  EXPECT_DOUBLE_EQ(s.frac_refined, 0.0);
  EXPECT_DOUBLE_EQ(s.frac_extended, 0.20);

  set.m_valid = set.m_consist;
  s = label_statistics(set);
  EXPECT_DOUBLE_EQ(s.frac_refined, 0.10);
  EXPECT_EQ(s.frac_2d_only, 0);
  EXPECT_EQ(s.frac_extended, 0);
}

TEST(Stats, PartitionIdentityAndDisjointFuse) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t w = 1 + rng.index(12), h = 1 + rng.index(6);
    PseudoLabelSet set;
    set.m_consist = random_mask(rng, w, h, rng.uniform01());
    set.m_valid = random_mask(rng, w, h, rng.uniform01());
    const auto s = label_statistics(set);
    EXPECT_EQ(s.count_2d_only + s.count_refined, set.m_consist.popcount());
    EXPECT_EQ(s.count_refined + s.count_extended, set.m_valid.popcount());
    EXPECT_EQ(s.count_2d_only + s.count_refined + s.count_extended, (set.m_consist | set.m_valid).popcount());
    const auto f = fuse_for_training(set);
    EXPECT_TRUE(disjoint(f.cons, f.comp));
    EXPECT_EQ(f.cons | f.comp, set.m_consist | set.m_valid);
  }
}

TEST(LabelSet, EmptySet) {
  const auto set = empty_label_set(5, 4);
  EXPECT_EQ(set.stats.pixels, 20u);
  EXPECT_EQ(set.m_consist.popcount() + set.m_valid.popcount(), 0u);
}
