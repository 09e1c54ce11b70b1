#include "depthpl/gradsuite.hpp"

#include <algorithm>
#include <functional>

#include "depthpl/geometry.hpp"
#include "depthpl/losses.hpp"
#include "depthpl/ops.hpp"
#include "depthpl/rng.hpp"

namespace depthpl {

namespace {

constexpr std::size_t kH = 4, kW = 6;

Tensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  std::vector<Real> v(shape_size(shape));
  for (auto& x : v) x = static_cast<Real>(rng.uniform(lo, hi));
  return Tensor(shape, std::move(v));
}

PixelMask random_mask(Rng& rng, double p) {
  PixelMask m(kW, kH);
  for (auto& b : m.bits) b = rng.uniform01() < p;
  return m;
}

// Label that stays at least 0.5 away from pred so |pred - label| is smooth.
DepthMap label_away_from(const Tensor& pred, Rng& rng) {
  DepthMap d(kW, kH);
  for (std::size_t i = 0; i < d.depth.size(); ++i) {
    const Real off = static_cast<Real>(rng.uniform(0.5, 2.0));
    d.depth[i] = pred.at(i) + (rng.uniform01() < 0.5 ? off : -off);
  }
  return d;
}

using Case = std::function<std::pair<ScalarFunction, Tensor>(Rng&)>;

}  // namespace

std::vector<LossGradResult> run_loss_gradchecks(std::uint64_t seed, std::size_t points,
                                                const GradCheckOptions& options) {
  const LossWeights w;
  std::vector<std::pair<std::string, Case>> cases;

  cases.push_back({"task", [](Rng& rng) {
    const Tensor pred = random_tensor({kH, kW}, rng, 5, 20);
    const Tensor gt = label_away_from(pred, rng).to_tensor();
    return std::pair{ScalarFunction([gt](const Tensor& p) { return task_loss(p, gt); }), pred};
  }});
  cases.push_back({"stage1_total", [w](Rng& rng) {
    const Tensor pred = random_tensor({2, kH, kW}, rng, 5, 20);
    const Tensor gt = label_away_from(ops::slice(pred, 0, 0, 1).detach(), rng).to_tensor();
    const Tensor gt2 = label_away_from(ops::reshape(ops::slice(pred, 0, 1, 2), {kH, kW}).detach(), rng).to_tensor();
    const Tensor image = random_tensor({3, kH, kW}, rng, 0, 1);
    return std::pair{ScalarFunction([=](const Tensor& p) {
                       const Tensor a = ops::reshape(ops::slice(p, 0, 0, 1), {kH, kW});
                       const Tensor b = ops::reshape(ops::slice(p, 0, 1, 2), {kH, kW});
                       return stage1_total(task_loss(a, ops::reshape(gt, {kH, kW})), task_loss(b, gt2),
                                           smoothness_loss(a, image), w);
                     }),
                     pred};
  }});
  cases.push_back({"smoothness", [](Rng& rng) {
    const Tensor pred = random_tensor({kH, kW}, rng, 5, 20);
    const Tensor image = random_tensor({3, kH, kW}, rng, 0, 1);
    return std::pair{ScalarFunction([image](const Tensor& p) { return smoothness_loss(p, image); }), pred};
  }});
  cases.push_back({"pseudo_cons", [](Rng& rng) {
    const Tensor pred = random_tensor({kH, kW}, rng, 5, 20);
    DepthMap y = label_away_from(pred, rng);
    const PixelMask consist = random_mask(rng, 0.6), valid = random_mask(rng, 0.4);
    for (std::size_t i = 0; i < y.depth.size(); ++i) if (!consist.bits[i]) y.depth[i] = 0;
    return std::pair{ScalarFunction([=](const Tensor& p) { return pseudo_cons_loss(p, y, consist, valid); }), pred};
  }});
  cases.push_back({"pseudo_comp", [](Rng& rng) {
    const Tensor pred = random_tensor({kH, kW}, rng, 5, 20);
    DepthMap y = label_away_from(pred, rng);
    const PixelMask valid = random_mask(rng, 0.5);
    for (std::size_t i = 0; i < y.depth.size(); ++i) if (!valid.bits[i]) y.depth[i] = 0;
    return std::pair{ScalarFunction([=](const Tensor& p) { return pseudo_comp_loss(p, y, valid); }), pred};
  }});
  cases.push_back({"geometric_consistency", [w](Rng& rng) {
    // disparities of 1.2..1.8 px keep samples between integer columns
    const StereoRig rig{0.5, 10};
    std::vector<Real> depth(2 * kH * kW);
    for (auto& d : depth) d = rig.baseline * rig.focal / static_cast<Real>(rng.uniform(1.2, 1.8));
    const Tensor pred({2, kH, kW}, std::move(depth));
    const Tensor left = random_tensor({3, kH, kW}, rng, 0, 1);
    const Tensor right = random_tensor({3, kH, kW}, rng, 0, 1);
    return std::pair{ScalarFunction([=](const Tensor& p) {
                       return geometric_consistency_loss(left, right, ops::reshape(ops::slice(p, 0, 0, 1), {kH, kW}),
                                                         ops::reshape(ops::slice(p, 0, 1, 2), {kH, kW}), rig, w);
                     }),
                     pred};
  }});
  cases.push_back({"chamfer", [](Rng& rng) {
    const Tensor a = random_tensor({12, 3}, rng, -1, 1);
    const Tensor b = random_tensor({9, 3}, rng, -1, 1);
    return std::pair{ScalarFunction([b](const Tensor& p) { return chamfer_distance(p, b); }), a};
  }});

  std::vector<LossGradResult> out;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    LossGradResult r{cases[c].first, points, 0, true};
    for (std::size_t i = 0; i < points; ++i) {
      Rng rng(derive_seed(seed, cases[c].first, i));
      const auto [f, point] = cases[c].second(rng);
      const GradCheckReport rep = check_gradients(f, point, options);
      r.max_rel_error = std::max(r.max_rel_error, rep.max_rel_error);
      r.passed = r.passed && rep.passed();
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace depthpl
