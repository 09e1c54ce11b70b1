// Acceptance run: one PASS/FAIL line per criterion. `--only 3,7` restricts
// the run; exit status is 0 only if every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "depthpl/config.hpp"
#include "depthpl/error.hpp"
#include "depthpl/formats.hpp"
#include "depthpl/geometry.hpp"
#include "depthpl/gradsuite.hpp"
#include "depthpl/losses.hpp"
#include "depthpl/pipeline.hpp"
#include "depthpl/pseudolabel.hpp"
#include "depthpl/rng.hpp"

using namespace depthpl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

RunConfig toy_config() { return load_config(std::string(DEPTHPL_SOURCE_DIR) + "/configs/toy.cfg"); }

DepthMap random_depth(Rng& rng, std::size_t w, std::size_t h, double lo, double hi) {
  DepthMap d(w, h);
  for (auto& v : d.depth) v = static_cast<Real>(rng.uniform(lo, hi));
  return d;
}

PixelMask random_mask(Rng& rng, std::size_t w, std::size_t h, double p) {
  PixelMask m(w, h);
  for (auto& b : m.bits) b = rng.uniform01() < p;
  return m;
}

// 1 ------------------------------------------------------------------------
Outcome projection_round_trip() {
  const CameraModel cam = toy_config().camera();
  Rng rng(101);
  Real worst = 0;
  std::size_t mask_mismatch = 0;
  for (int t = 0; t < 100; ++t) {
    const DepthMap d = random_depth(rng, cam.width, cam.height, 1, 80);
    const PixelMask m = random_mask(rng, cam.width, cam.height, rng.uniform01());
    const Projection p = project_3d_to_2d(project_2d_to_3d(d, m, cam), cam);
    if (!(p.mask == m)) ++mask_mismatch;
    for (std::size_t i = 0; i < d.depth.size(); ++i)
      if (m.bits[i]) worst = std::max(worst, std::abs(p.depth.depth[i] - d.depth[i]));
  }
  return {worst <= 1e-6 && mask_mismatch == 0,
          "max|dd|=" + fmt("%.3g", worst) + " mask mismatches=" + std::to_string(mask_mismatch)};
}

// 2 ------------------------------------------------------------------------
// Per-pixel brute force: scan every point for every pixel.
Projection oracle_projection(const PointCloud& c, const CameraModel& cam) {
  Projection out;
  out.depth = DepthMap(cam.width, cam.height, 0);
  out.mask = PixelMask(cam.width, cam.height);
  for (std::size_t v = 0; v < cam.height; ++v) {
    for (std::size_t u = 0; u < cam.width; ++u) {
      Real best = std::numeric_limits<Real>::infinity();
      for (const auto& p : c.points) {
        if (!(p[2] - cam.epsilon > 0)) continue;
        const Real pu = std::round(p[0] * cam.focal / p[2] + cam.principal_x);
        const Real pv = std::round(p[1] * cam.focal / p[2] + cam.principal_y);
        if (pu != static_cast<Real>(u) || pv != static_cast<Real>(v)) continue;
        best = std::min(best, (p[2] - cam.epsilon) / cam.depth_scale);
      }
      if (best < std::numeric_limits<Real>::infinity()) {
        out.depth.at(u, v) = best;
        out.mask.set(u, v, true);
      }
    }
  }
  return out;
}

Outcome duplicate_rules() {
  CameraModel cam = toy_config().camera();
  Rng rng(202);
  std::size_t bad = 0, dup_cases = 0;
  for (int t = 0; t < 60; ++t) {
    PointCloud c;
    const std::size_t n = 1 + rng.index(1000);
    // a few shared rays so many points land on one pixel
    std::vector<std::pair<Real, Real>> rays;
    for (int r = 0; r < 8; ++r)
      rays.push_back({static_cast<Real>(rng.uniform(-60, 160)), static_cast<Real>(rng.uniform(-20, 50))});
    for (std::size_t i = 0; i < n; ++i) {
      const Real z = static_cast<Real>(rng.uniform(39, 41.2));  // some behind the shift plane
      Real u, v;
      if (rng.uniform01() < 0.5) {
        const auto& ray = rays[rng.index(rays.size())];
        u = ray.first;
        v = ray.second;
      } else {
        u = static_cast<Real>(rng.uniform(-20, cam.width + 20));
        v = static_cast<Real>(rng.uniform(-10, cam.height + 10));
      }
      c.points.push_back({z * (u - cam.principal_x) / cam.focal, z * (v - cam.principal_y) / cam.focal, z});
    }
    const Projection got = project_3d_to_2d(c, cam);
    const Projection want = oracle_projection(c, cam);
    if (!(got.mask == want.mask) || got.depth.depth != want.depth.depth) ++bad;
    std::size_t behind = 0, outside = 0;
    for (const auto& p : c.points) {
      if (!(p[2] - cam.epsilon > 0)) {
        ++behind;
        continue;
      }
      const Real pu = std::round(p[0] * cam.focal / p[2] + cam.principal_x);
      const Real pv = std::round(p[1] * cam.focal / p[2] + cam.principal_y);
      if (pu < 0 || pv < 0 || pu >= static_cast<Real>(cam.width) || pv >= static_cast<Real>(cam.height)) ++outside;
    }
    if (got.dropped_behind != behind || got.dropped_out_of_plane != outside) ++bad;
    if (got.mask.popcount() + behind + outside < c.size()) ++dup_cases;
  }
  return {bad == 0 && dup_cases > 0,
          "mismatching clouds=" + std::to_string(bad) + "/60, clouds with duplicates=" + std::to_string(dup_cases)};
}

// 3 ------------------------------------------------------------------------
Real all_pairs(const std::vector<Point3>& p, const std::vector<Point3>& q) {
  Real sum = 0;
  for (const auto& a : p) {
    Real best = std::numeric_limits<Real>::infinity();
    for (const auto& b : q) {
      const Real dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
      best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    sum += best;
  }
  return sum;
}

Outcome chamfer_oracle() {
  Rng rng(303);
  std::size_t bad = 0;
  for (int t = 0; t < 500; ++t) {
    std::vector<Point3> a(1 + rng.index(64)), b(1 + rng.index(64));
    for (auto* cloud : {&a, &b})
      for (auto& p : *cloud)
        for (auto& x : p) x = static_cast<Real>(rng.uniform(-3, 3));
    const Real oracle = all_pairs(a, b) / static_cast<Real>(a.size()) + all_pairs(b, a) / static_cast<Real>(b.size());
    const PointCloud ca{a, {}}, cb{b, {}};
    const Real lib = chamfer_distance(ca, cb);
    const Real grid = chamfer_distance(ca, cb, NeighborSearch::grid);
    const Real swapped = chamfer_distance(cb, ca);
    if (lib != oracle || grid != oracle) ++bad;
    if (std::abs(swapped - lib) > 1e-15 * std::max<Real>(1, lib)) ++bad;
    if (chamfer_distance(ca, ca) != 0) ++bad;
  }
  return {bad == 0, "failures=" + std::to_string(bad) + "/500 (exact, grid and brute, symmetry, CD(A,A)=0)"};
}

// 4 ------------------------------------------------------------------------
Outcome gradient_suite() {
  const auto results = run_loss_gradchecks(404, 20);
  bool ok = !results.empty();
  std::ostringstream os;
  for (const auto& r : results) {
    ok = ok && r.passed && r.max_rel_error < 1e-3 && r.points == 20;
    os << r.loss << "=" << fmt("%.2g", r.max_rel_error) << " ";
  }
  return {ok, os.str()};
}

// 5 ------------------------------------------------------------------------
Outcome mask_algebra() {
  Rng rng(505);
  std::size_t bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t w = 1 + rng.index(24), h = 1 + rng.index(12);
    const DepthMap a = random_depth(rng, w, h, 1, 80);
    DepthMap b = a;
    for (auto& v : b.depth) v += static_cast<Real>(rng.uniform(-1.5, 1.5));
    const Real tau = static_cast<Real>(rng.uniform(0.05, 1.0));
    const Real tau_hi = tau + static_cast<Real>(rng.uniform(0, 1.0));
    const ConsistencyLabel lo = consistency_label(a, b, tau);
    const ConsistencyLabel hi = consistency_label(a, b, tau_hi);
    if (!subset_of(lo.mask, hi.mask)) ++bad;

    const PseudoLabelSet set = make_label_set(lo, a, random_mask(rng, w, h, rng.uniform01()));
    const TrainingMasks f = fuse_for_training(set);
    if (!disjoint(f.cons, f.comp)) ++bad;
    const auto& s = set.stats;
    const std::size_t uni = (set.m_consist | set.m_valid).popcount();
    const std::size_t both = (set.m_consist & set.m_valid).popcount();
    if (s.count_2d_only + s.count_refined + s.count_extended != uni) ++bad;
    if (s.count_refined != both) ++bad;
    if (s.count_2d_only + s.count_refined != set.m_consist.popcount()) ++bad;
    if (s.count_extended + s.count_refined != set.m_valid.popcount()) ++bad;
    if (f.cons.popcount() != s.count_2d_only || f.comp.popcount() != set.m_valid.popcount()) ++bad;
  }
  return {bad == 0, "violations=" + std::to_string(bad) + " over 1000 sets"};
}

// 6 ------------------------------------------------------------------------
Outcome identity_completer() {
  const CameraModel cam = toy_config().camera();
  Rng rng(606);
  Real worst = 0;
  std::size_t mask_bad = 0;
  for (int t = 0; t < 20; ++t) {
    const DepthMap pr = random_depth(rng, cam.width, cam.height, 1, 80);
    DepthMap prs = pr;
    for (auto& v : prs.depth) v += static_cast<Real>(rng.uniform(-1, 1));
    const ConsistencyLabel cons = consistency_label(pr, prs, 0.5);
    if (cons.mask.popcount() == 0) continue;
    const CompletionLabel comp =
        completion_label(cons.label, cons.mask, IdentityCompleter{}, cam, CompletionOptions{1, 7, 80});
    if (!(comp.valid == cons.mask)) ++mask_bad;
    for (std::size_t i = 0; i < pr.depth.size(); ++i)
      worst = std::max(worst, std::abs(comp.label.depth[i] - cons.label.depth[i]));
  }
  return {worst <= 1e-6 && mask_bad == 0,
          "max|y_comp-y_cons|=" + fmt("%.3g", worst) + " mask mismatches=" + std::to_string(mask_bad)};
}

// 7 ------------------------------------------------------------------------
Outcome completion_pretraining() {
  const RunConfig cfg = toy_config();
  const Dataset data = make_dataset(cfg.dataset(), cfg.seed);
  std::vector<DepthMap> train, held_out;
  for (const auto& s : data.source) train.push_back(*s.depth);
  for (const auto& s : data.eval) held_out.push_back(*s.depth);
  CompletionLog log;
  const CompletionNet net = train_completion(train, cfg, &log);
  const EvalReport q = completion_quality(net, held_out, cfg);
  const bool ok = log.final_cd < 0.5 * log.initial_cd && q.delta1 > 0.9;
  return {ok, "CD " + fmt("%.4g", log.initial_cd) + " -> " + fmt("%.4g", log.final_cd) +
                  ", held-out delta1=" + fmt("%.4f", q.delta1) + " abs_rel=" + fmt("%.4f", q.abs_rel)};
}

// 8 ------------------------------------------------------------------------
Real median(std::vector<Real> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

Outcome adaptation_effect() {
  std::vector<Real> syn, cons, full, cons_sq, full_sq;
  std::ostringstream os;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RunConfig cfg = toy_config();
    cfg.seed = seed;
    const AblationRun run = run_ablation(cfg);
    syn.push_back(run.synthetic_only.abs_rel);
    cons.push_back(run.cons_only.abs_rel);
    full.push_back(run.full.abs_rel);
    cons_sq.push_back(run.cons_only.sq_rel);
    full_sq.push_back(run.full.sq_rel);
    std::printf("  seed %llu: abs_rel syn=%.5f cons=%.5f full=%.5f | sq_rel cons=%.5f full=%.5f\n",
                static_cast<unsigned long long>(seed), static_cast<double>(syn.back()),
                static_cast<double>(cons.back()), static_cast<double>(full.back()),
                static_cast<double>(cons_sq.back()), static_cast<double>(full_sq.back()));
    std::fflush(stdout);
  }
  const Real ms = median(syn), mc = median(cons), mf = median(full);
  const Real mcs = median(cons_sq), mfs = median(full_sq);
  const bool ok = ms > mc && mc > mf && mfs < mcs;
  os << "median abs_rel syn=" << fmt("%.5f", ms) << " cons=" << fmt("%.5f", mc) << " full=" << fmt("%.5f", mf)
     << "; median sq_rel cons=" << fmt("%.5f", mcs) << " full=" << fmt("%.5f", mfs);
  return {ok, os.str()};
}

// 9 ------------------------------------------------------------------------
Outcome metric_correctness() {
  std::size_t bad = 0;
  auto near = [&](Real a, double b) {
    if (!(std::abs(a - b) <= 1e-12)) ++bad;
  };
  {
    // hand-evaluated: ratios 1.2, 1.25, 1, 1.5
    DepthMap gt(2, 2, 10), pred(2, 2);
    pred.depth = {12, 8, 10, 15};
    const DepthMap p[] = {pred}, g[] = {gt};
    const EvalReport r = evaluate_depths(p, g, 80, 1);
    near(r.abs_rel, 0.225);
    near(r.sq_rel, 0.825);
    near(r.rmse, std::sqrt(8.25));
    const double l = std::log(1.2) * std::log(1.2) + std::log(0.8) * std::log(0.8) + std::log(1.5) * std::log(1.5);
    near(r.rmse_log, std::sqrt(l / 4));
    near(r.delta1, 0.5);  // 1.25 itself is not below the threshold
    near(r.delta2, 1.0);
    near(r.delta3, 1.0);
    if (r.count != 4) ++bad;
  }
  {
    DepthMap gt(4, 1), pred(4, 1);
    gt.depth = {2, 4, 50, 90};  // 90 is above the cap
    pred.depth = {4, 3, 0.5, 10};  // 0.5 is clamped to d_min = 1
    const DepthMap p[] = {pred}, g[] = {gt};
    const EvalReport r = evaluate_depths(p, g, 80, 1);
    near(r.abs_rel, (1.0 + 0.25 + 49.0 / 50) / 3);
    near(r.sq_rel, (4.0 / 2 + 1.0 / 4 + 49.0 * 49 / 50) / 3);
    near(r.rmse, std::sqrt((4.0 + 1 + 49.0 * 49) / 3));
    near(r.delta1, 0);
    near(r.delta2, 1.0 / 3);
    near(r.delta3, 1.0 / 3);
    if (r.count != 3) ++bad;
  }
  Rng rng(909);
  for (int t = 0; t < 500; ++t) {
    const DepthMap g[] = {random_depth(rng, 2, 2, 1, 80)};
    const DepthMap p[] = {random_depth(rng, 2, 2, 1, 80)};
    const EvalReport r = evaluate_depths(p, g, 80, 1);
    if (!(r.delta1 <= r.delta2 && r.delta2 <= r.delta3)) ++bad;
    if (r.rmse < 0 || r.abs_rel < 0) ++bad;
  }
  return {bad == 0, "mismatches=" + std::to_string(bad)};
}

// 10 -----------------------------------------------------------------------
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path().string());
  return files;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("depthpl_accept_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Outcome determinism() {
  const RunConfig cfg = toy_config();
  std::vector<std::map<std::string, std::string>> trees;
  std::vector<EvalReport> reports;
  for (const char* name : {"a", "b"}) {
    const fs::path out = scratch(name);
    workspace::gen_data(cfg, out.string());
    workspace::train_stage1(cfg, out.string());
    workspace::train_completion(cfg, out.string());
    workspace::gen_pseudo(cfg, out.string());
    workspace::train_stage2(cfg, out.string());
    reports.push_back(workspace::eval(cfg, out.string(), "stage2.ckpt"));
    trees.push_back(tree(out));
    fs::remove_all(out);
  }
  std::vector<std::string> differing;
  for (const auto& [path, bytes] : trees[0]) {
    const auto it = trees[1].find(path);
    if (it == trees[1].end() || it->second != bytes) differing.push_back(path);
  }
  if (trees[0].size() != trees[1].size()) differing.push_back("(file sets differ)");
  std::size_t ckpts = 0, labels = 0;
  for (const auto& [path, _] : trees[0]) {
    ckpts += path.ends_with(".ckpt");
    labels += path.starts_with("labels");
  }
  const bool same_report = metrics_csv(reports[0]) == metrics_csv(reports[1]);
  std::string detail = std::to_string(trees[0].size()) + " files (" + std::to_string(ckpts) + " checkpoints, " +
                       std::to_string(labels) + " label files), differing=" + std::to_string(differing.size());
  for (std::size_t i = 0; i < std::min<std::size_t>(differing.size(), 3); ++i) detail += " " + differing[i];
  return {differing.empty() && same_report && ckpts == 3 && labels > 0, detail};
}

// 11 -----------------------------------------------------------------------
template <class Decode>
bool rejects_or_decodes(Decode decode, const std::string& bytes, bool must_reject) {
  try {
    decode(bytes);
  } catch (const FormatError&) {
    return true;
  } catch (...) {
    return false;
  }
  return !must_reject;
}

Outcome format_round_trips() {
  Rng rng(1111);
  std::size_t bad = 0;
  auto fuzz = [&](auto decode, const std::string& bytes) {
    // every strict prefix is rejected
    if (!rejects_or_decodes(decode, bytes.substr(0, rng.index(bytes.size())), true)) ++bad;
    // random byte damage never escapes as anything but FormatError
    std::string damaged = bytes;
    for (std::size_t k = 1 + rng.index(3); k-- > 0;)
      damaged[rng.index(damaged.size())] = static_cast<char>(rng.index(256));
    if (!rejects_or_decodes(decode, damaged, false)) ++bad;
  };
  for (int t = 0; t < 1000; ++t) {
    const std::size_t w = 1 + rng.index(12), h = 1 + rng.index(12);
    {
      DepthMap d(w, h);
      for (auto& v : d.depth) v = static_cast<Real>(static_cast<float>(rng.uniform(0.01, 100)));
      const std::string b = encode_pfm(d);
      const DepthMap back = decode_pfm(b);
      if (back.depth != d.depth || back.width != w || back.height != h || encode_pfm(back) != b) ++bad;
      fuzz([](const std::string& s) { return decode_pfm(s); }, b);
    }
    {
      const PixelMask m = random_mask(rng, w, h, rng.uniform01());
      const std::string b = encode_pgm_mask(m);
      if (!(decode_pgm_mask(b) == m)) ++bad;
      fuzz([](const std::string& s) { return decode_pgm_mask(s); }, b);
    }
    {
      Image im(3, h, w);
      for (auto& v : im.data) v = static_cast<Real>(rng.index(256)) / 255;
      const std::string b = encode_ppm(im);
      const Image back = decode_ppm(b);
      for (std::size_t i = 0; i < im.data.size(); ++i)
        if (std::abs(back.data[i] - im.data[i]) > 1e-15) ++bad;
      if (encode_ppm(back) != b) ++bad;
      fuzz([](const std::string& s) { return decode_ppm(s); }, b);
    }
    {
      PointCloud c;
      for (std::size_t i = rng.index(16); i-- > 0;)
        c.points.push_back({static_cast<Real>(rng.uniform(-50, 50)), static_cast<Real>(rng.uniform(-5, 5)),
                            static_cast<Real>(rng.uniform(40, 42))});
      const std::string b = encode_ply(c);
      const PointCloud back = decode_ply(b);
      if (back.size() != c.size() || encode_ply(back) != b) ++bad;
      for (std::size_t i = 0; i < std::min(back.size(), c.size()); ++i)
        for (std::size_t a = 0; a < 3; ++a)
          if (std::abs(back.points[i][a] - c.points[i][a]) > 1e-8 * std::abs(c.points[i][a])) ++bad;
      fuzz([](const std::string& s) { return decode_ply(s); }, b);
    }
  }
  return {bad == 0, "failures=" + std::to_string(bad) + " over 4x1000 cases"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else {
      std::fprintf(stderr, "usage: %s [--only N[,N...]]\n", argv[0]);
      return 1;
    }
  }

  const std::vector<Criterion> criteria = {
      {1, "projection round-trip", 5, projection_round_trip},
      {2, "duplicate/out-of-plane rules", 5, duplicate_rules},
      {3, "chamfer oracle", 5, chamfer_oracle},
      {4, "gradient suite", 60, gradient_suite},
      {5, "mask algebra", 0, mask_algebra},
      {6, "identity-completer equivalence", 0, identity_completer},
      {7, "completion pretraining", 600, completion_pretraining},
      {8, "adaptation effect", 2700, adaptation_effect},
      {9, "metric correctness", 0, metric_correctness},
      {10, "determinism", 0, determinism},
      {11, "format round trips", 30, format_round_trips},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += " [over the " + fmt("%.0f", c.budget_s) + " s budget]";
    }
    std::printf("%s criterion %d (%s): %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
