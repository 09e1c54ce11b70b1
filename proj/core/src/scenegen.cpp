#include "depthpl/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "depthpl/error.hpp"
#include "depthpl/parallel.hpp"
#include "depthpl/rng.hpp"

namespace depthpl {

namespace {

Box make_box(Real x0, Real x1, Real height_above_ground, Real ground_y, Real z0, Real z1, Rng& rng) {
  Box b;
  b.x0 = x0;
  b.x1 = x1;
  b.y0 = ground_y - height_above_ground;
  b.y1 = ground_y;
  b.z0 = z0;
  b.z1 = z1;
  for (auto& c : b.albedo) c = static_cast<Real>(rng.uniform(0.15, 0.85));
  return b;
}

void add_wall_row(Scene& s, Real x_inner, Real side, Rng& rng) {
  Real z = static_cast<Real>(rng.uniform(2.0, 6.0));
  while (z < s.d_max) {
    const Real len = static_cast<Real>(rng.uniform(8.0, 25.0));
    const Real height = static_cast<Real>(rng.uniform(4.0, 12.0));
    const Real depth = static_cast<Real>(rng.uniform(2.0, 6.0));
    const Real setback = static_cast<Real>(rng.uniform(0.0, 1.5));
    const Real xa = x_inner + side * setback;
    const Real xb = xa + side * depth;
    s.boxes.push_back(make_box(std::min(xa, xb), std::max(xa, xb), height, s.camera_height, z,
                               z + len, rng));
    z += len + static_cast<Real>(rng.uniform(1.0, 6.0));
  }
}

}  // namespace

Scene random_scene(std::uint64_t seed, const SceneParams& params) {
  Rng rng(derive_seed(seed, "scene"));
  Scene s;
  s.seed = seed;
  s.camera_height = params.camera_height;
  s.pitch = static_cast<Real>(rng.uniform(-params.max_pitch, params.max_pitch));
  s.baseline = params.baseline;
  s.d_max = params.d_max;
  for (auto& c : s.ground_albedo) c = static_cast<Real>(rng.uniform(0.25, 0.45));
  for (auto& c : s.sky_color) c = static_cast<Real>(rng.uniform(0.6, 0.95));

  const Real left = -static_cast<Real>(rng.uniform(3.5, 9.0));
  const Real right = static_cast<Real>(rng.uniform(3.5, 9.0));
  add_wall_row(s, left, -1, rng);
  add_wall_row(s, right, +1, rng);

  const std::size_t span = params.max_objects - params.min_objects + 1;
  const std::size_t objects = params.min_objects + rng.index(span);
  for (std::size_t i = 0; i < objects; ++i) {
    const Real width = static_cast<Real>(rng.uniform(1.5, 2.1));
    const Real height = static_cast<Real>(rng.uniform(1.2, 2.0));
    const Real length = static_cast<Real>(rng.uniform(3.0, 5.0));
    const Real x0 = static_cast<Real>(rng.uniform(left + 0.3, right - 0.3 - width));
    const Real z0 = static_cast<Real>(rng.uniform(5.0, 45.0));
    s.boxes.push_back(make_box(x0, x0 + width, height, s.camera_height, z0, z0 + length, rng));
  }
  if (rng.uniform01() < 0.5) {
    const Real z0 = static_cast<Real>(rng.uniform(35.0, 75.0));
    const Real height = static_cast<Real>(rng.uniform(6.0, 16.0));
    s.boxes.push_back(make_box(left - 10, right + 10, height, s.camera_height, z0, z0 + 2, rng));
  }
  return s;
}

namespace {

struct Hit {
  Real t = std::numeric_limits<Real>::infinity();
  int surface = -2;  // -2 sky, -1 ground, otherwise box index
  std::array<Real, 3> normal{0, 0, 0};
};

struct Ray {
  std::array<Real, 3> origin;
  std::array<Real, 3> dir;
};

Ray make_ray(const Scene& scene, const RenderCamera& cam, Real u, Real v, RigSide side) {
  const Real dx = (u - cam.principal_x) / cam.focal;
  const Real dy = (v - cam.principal_y) / cam.focal;
  const Real c = std::cos(scene.pitch), s = std::sin(scene.pitch);
  Ray r;
  r.origin = {side == RigSide::right ? scene.baseline : Real(0), 0, 0};
  r.dir = {dx, dy * c + s, -dy * s + c};
  return r;
}

bool intersect_box(const Ray& r, const Box& b, Real& t_hit, std::array<Real, 3>& normal) {
  const Real lo[3] = {b.x0, b.y0, b.z0};
  const Real hi[3] = {b.x1, b.y1, b.z1};
  Real t_near = -std::numeric_limits<Real>::infinity();
  Real t_far = std::numeric_limits<Real>::infinity();
  int axis = -1;
  Real sign = 0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(r.dir[a]) < Real(1e-15)) {
      if (r.origin[a] < lo[a] || r.origin[a] > hi[a]) return false;
      continue;
    }
    Real t1 = (lo[a] - r.origin[a]) / r.dir[a];
    Real t2 = (hi[a] - r.origin[a]) / r.dir[a];
    Real s = -1;  // entering through the low face
    if (t1 > t2) {
      std::swap(t1, t2);
      s = 1;
    }
    if (t1 > t_near) {
      t_near = t1;
      axis = a;
      sign = s;
    }
    t_far = std::min(t_far, t2);
  }
  if (axis < 0 || t_near > t_far || t_near <= 0) return false;
  t_hit = t_near;
  normal = {0, 0, 0};
  normal[static_cast<std::size_t>(axis)] = sign;
  return true;
}

Hit cast(const Scene& scene, const Ray& r) {
  Hit hit;
  if (r.dir[1] > 0) {
    const Real t = (scene.camera_height - r.origin[1]) / r.dir[1];
    if (t > 0) {
      hit.t = t;
      hit.surface = -1;
      hit.normal = {0, -1, 0};
    }
  }
  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    Real t;
    std::array<Real, 3> n;
    if (intersect_box(r, scene.boxes[i], t, n) && t < hit.t) {
      hit.t = t;
      hit.surface = static_cast<int>(i);
      hit.normal = n;
    }
  }
  return hit;
}

// Optical-axis depth of a hit at ray parameter t: the camera-space ray has
// unit z component, so the depth is t itself.
Real hit_depth(const Scene& scene, const Hit& hit) {
  if (hit.surface == -2 || !(hit.t < scene.d_max)) return scene.d_max;
  return hit.t;
}

Real lattice(std::int64_t x, std::int64_t y, std::int64_t z, std::uint64_t seed) {
  std::uint64_t h = seed;
  h ^= static_cast<std::uint64_t>(x) * 0x9e3779b97f4a7c15ULL;
  h ^= static_cast<std::uint64_t>(y) * 0xc2b2ae3d27d4eb4fULL;
  h ^= static_cast<std::uint64_t>(z) * 0x165667b19e3779f9ULL;
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 33;
  return static_cast<Real>(static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0);
}

Real smooth(Real t) { return t * t * (3 - 2 * t); }

// Trilinearly interpolated lattice noise in [-1, 1].
Real value_noise(Real x, Real y, Real z, std::uint64_t seed) {
  const Real fx = std::floor(x), fy = std::floor(y), fz = std::floor(z);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const auto iz = static_cast<std::int64_t>(fz);
  const Real tx = smooth(x - fx), ty = smooth(y - fy), tz = smooth(z - fz);
  Real acc = 0;
  for (int c = 0; c < 8; ++c) {
    const int ox = c & 1, oy = (c >> 1) & 1, oz = (c >> 2) & 1;
    const Real w = (ox ? tx : 1 - tx) * (oy ? ty : 1 - ty) * (oz ? tz : 1 - tz);
    acc += w * lattice(ix + ox, iy + oy, iz + oz, seed);
  }
  return acc;
}

}  // namespace

Real ray_depth(const Scene& scene, const RenderCamera& cam, Real u, Real v, RigSide side) {
  return hit_depth(scene, cast(scene, make_ray(scene, cam, u, v, side)));
}

DomainStyle DomainStyle::synthetic() { return DomainStyle{}; }

DomainStyle DomainStyle::real() {
  DomainStyle s;
  s.gain = {Real(0.85), Real(0.95), Real(1.15)};
  s.bias = {Real(0.06), Real(0.02), Real(-0.03)};
  s.gamma = Real(1.5);
  s.texture_amplitude = Real(0.35);
  s.texture_frequency = Real(1.2);
  s.noise_sigma = Real(0.02);
  return s;
}

RenderResult render(const Scene& scene, const DomainStyle& style, const RenderCamera& cam,
                    RigSide side, std::uint64_t noise_seed) {
  RenderResult out{Image(3, cam.height, cam.width), DepthMap(cam.width, cam.height)};
  const std::array<Real, 3> light = [] {
    const Real l[3] = {-0.35, -0.8, -0.45};
    const Real n = std::sqrt(l[0] * l[0] + l[1] * l[1] + l[2] * l[2]);
    return std::array<Real, 3>{l[0] / n, l[1] / n, l[2] / n};
  }();
  const std::uint64_t texture_seed = derive_seed(scene.seed, "texture");
  Rng noise(noise_seed);
  for (std::size_t v = 0; v < cam.height; ++v) {
    for (std::size_t u = 0; u < cam.width; ++u) {
      const Ray ray = make_ray(scene, cam, static_cast<Real>(u), static_cast<Real>(v), side);
      const Hit hit = cast(scene, ray);
      out.depth.at(u, v) = hit_depth(scene, hit);
      std::array<Real, 3> color;
      if (hit.surface == -2) {
        color = scene.sky_color;
      } else {
        const auto& albedo = hit.surface == -1 ? scene.ground_albedo
                                               : scene.boxes[static_cast<std::size_t>(hit.surface)].albedo;
        const Real lambert = std::max(Real(0), hit.normal[0] * light[0] + hit.normal[1] * light[1] +
                                                   hit.normal[2] * light[2]);
        Real shade = (1 - style.shading) + style.shading * lambert;
        if (style.texture_amplitude > 0) {
          const Real f = style.texture_frequency;
          const Real px = ray.origin[0] + hit.t * ray.dir[0];
          const Real py = ray.origin[1] + hit.t * ray.dir[1];
          const Real pz = ray.origin[2] + hit.t * ray.dir[2];
          const Real n = Real(0.65) * value_noise(px * f, py * f, pz * f, texture_seed) +
                         Real(0.35) * value_noise(px * 2 * f, py * 2 * f, pz * 2 * f, texture_seed + 1);
          shade *= 1 + style.texture_amplitude * n;
        }
        for (int c = 0; c < 3; ++c) color[c] = albedo[c] * shade;
      }
      for (std::size_t c = 0; c < 3; ++c) {
        Real x = std::clamp(style.gain[c] * color[c] + style.bias[c], Real(0), Real(1));
        if (style.gamma != 1) x = std::pow(x, style.gamma);
        if (style.noise_sigma > 0) x += style.noise_sigma * static_cast<Real>(noise.normal());
        out.image.at(c, v, u) = std::clamp(x, Real(0), Real(1));
      }
    }
  }
  return out;
}

Image stylize(const Image& content, const Image& style_ref) {
  if (content.channels != style_ref.channels) {
    throw ShapeError("stylize: channel counts differ (" + std::to_string(content.channels) + " vs " +
                     std::to_string(style_ref.channels) + ")");
  }
  auto moments = [](const Image& im, std::size_t c) {
    const std::size_t n = im.height * im.width;
    const Real* p = im.data.data() + c * n;
    Real mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += p[i];
    mean /= static_cast<Real>(n);
    Real var = 0;
    for (std::size_t i = 0; i < n; ++i) var += (p[i] - mean) * (p[i] - mean);
    return std::pair<Real, Real>{mean, std::sqrt(var / static_cast<Real>(n))};
  };
  Image out = content;
  const std::size_t n = content.height * content.width;
  for (std::size_t c = 0; c < content.channels; ++c) {
    const auto [mc, sc] = moments(content, c);
    const auto [ms, ss] = moments(style_ref, c);
    Real* p = out.data.data() + c * n;
    for (std::size_t i = 0; i < n; ++i) {
      const Real x = sc > 0 ? ss * (p[i] - mc) / sc + ms : p[i] - mc + ms;
      p[i] = std::clamp(x, Real(0), Real(1));
    }
  }
  return out;
}

SceneSeeds scene_seeds(const DatasetConfig& config, std::uint64_t seed) {
  SceneSeeds s;
  for (std::size_t i = 0; i < config.source_count; ++i) s.source.push_back(derive_seed(seed, "source", i));
  for (std::size_t i = 0; i < config.target_count; ++i) s.target.push_back(derive_seed(seed, "target", i));
  for (std::size_t i = 0; i < config.eval_count; ++i) s.eval.push_back(derive_seed(seed, "eval", i));
  std::set<std::uint64_t> seen;
  for (const auto* list : {&s.source, &s.target, &s.eval}) {
    for (std::uint64_t v : *list) {
      if (!seen.insert(v).second) throw DataError("make_dataset: overlapping scene seeds");
    }
  }
  return s;
}

Dataset make_dataset(const DatasetConfig& config, std::uint64_t seed) {
  if (config.source_count == 0 || config.target_count == 0 || config.eval_count == 0) {
    throw DataError("make_dataset: source, target and eval counts must be positive");
  }
  const SceneSeeds seeds = scene_seeds(config, seed);
  const DomainStyle synthetic = DomainStyle::synthetic();
  const DomainStyle real = DomainStyle::real();
  Dataset data;
  data.source.resize(seeds.source.size());
  data.target.resize(seeds.target.size());
  data.eval.resize(seeds.eval.size());

  // one flat job list so every frame renders independently
  const std::size_t ns = seeds.source.size(), nt = seeds.target.size();
  parallel_for(ns + nt + seeds.eval.size(), [&](std::size_t job) {
    if (job < ns) {
      const std::uint64_t s = seeds.source[job];
      RenderResult r = render(random_scene(s, config.scene), synthetic, config.camera, RigSide::left,
                              derive_seed(s, "noise", 0));
      data.source[job] = {s, std::move(r.image), std::move(r.depth), std::nullopt};
    } else if (job < ns + nt) {
      const std::uint64_t s = seeds.target[job - ns];
      const Scene scene = random_scene(s, config.scene);
      RenderResult r = render(scene, real, config.camera, RigSide::left, derive_seed(s, "noise", 0));
      Sample sample{s, std::move(r.image), std::nullopt, std::nullopt};
      if (config.stereo) {
        sample.right = render(scene, real, config.camera, RigSide::right, derive_seed(s, "noise", 1)).image;
      }
      data.target[job - ns] = std::move(sample);
    } else {
      const std::uint64_t s = seeds.eval[job - ns - nt];
      RenderResult r = render(random_scene(s, config.scene), real, config.camera, RigSide::left,
                              derive_seed(s, "noise", 0));
      data.eval[job - ns - nt] = {s, std::move(r.image), std::move(r.depth), std::nullopt};
    }
  });
  return data;
}

}  // namespace depthpl
