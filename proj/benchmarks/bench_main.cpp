#include <benchmark/benchmark.h>

#include "depthpl/geometry.hpp"
#include "depthpl/losses.hpp"
#include "depthpl/networks.hpp"
#include "depthpl/ops.hpp"
#include "depthpl/rng.hpp"

using namespace depthpl;

namespace {

Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Real> v(shape_size(shape));
  for (auto& x : v) x = static_cast<Real>(rng.uniform(-1, 1));
  return Tensor(shape, std::move(v));
}

PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud c;
  c.points.resize(n);
  for (auto& p : c.points) p = {static_cast<Real>(rng.uniform(-20, 20)), static_cast<Real>(rng.uniform(-2, 2)),
                                static_cast<Real>(rng.uniform(40, 41))};
  return c;
}

void BM_Conv2d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({c, 32, 96}, 1);
  const Tensor w = random_tensor({c, c, 3, 3}, 2);
  const Tensor b = random_tensor({c}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, &b, 1, 1));
}
BENCHMARK(BM_Conv2d)->Arg(8)->Arg(32);

void BM_ConvBackward(benchmark::State& state) {
  const Tensor x = random_tensor({16, 32, 96}, 1);
  const Tensor w = random_tensor({16, 16, 3, 3}, 2);
  for (auto _ : state) {
    Tape tape;
    tape.watch(w);
    tape.backward(ops::sum(ops::conv2d(x, w, nullptr, 1, 1)));
  }
}
BENCHMARK(BM_ConvBackward);

void BM_NearestNeighbors(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto method = state.range(1) ? NeighborSearch::grid : NeighborSearch::brute_force;
  const PointCloud a = random_cloud(n, 4), b = random_cloud(n, 5);
  for (auto _ : state) benchmark::DoNotOptimize(nearest_neighbors(a.points, b.points, method));
}
BENCHMARK(BM_NearestNeighbors)->Args({1024, 0})->Args({1024, 1})->Args({8192, 0})->Args({8192, 1});

void BM_ProjectRoundTrip(benchmark::State& state) {
  const CameraModel cam;
  DepthMap d(cam.width, cam.height, 20);
  const PixelMask m(cam.width, cam.height, true);
  for (auto _ : state) benchmark::DoNotOptimize(project_3d_to_2d(project_2d_to_3d(d, m, cam), cam));
}
BENCHMARK(BM_ProjectRoundTrip);

void BM_DepthNetForward(benchmark::State& state) {
  DepthNetConfig cfg;
  cfg.channels = {8, 16, 32, 64};
  const DepthNet net(cfg, 1);
  const Tensor img = random_tensor({3, 32, 96}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(img));
}
BENCHMARK(BM_DepthNetForward);

}  // namespace

BENCHMARK_MAIN();
