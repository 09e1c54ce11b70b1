#include "depthpl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>

#include "depthpl/error.hpp"
#include "depthpl/formats.hpp"
#include "depthpl/geometry.hpp"
#include "depthpl/losses.hpp"
#include "depthpl/manifest.hpp"
#include "depthpl/ops.hpp"
#include "depthpl/optim.hpp"
#include "depthpl/parallel.hpp"
#include "depthpl/rng.hpp"

namespace depthpl {

namespace fs = std::filesystem;

EvalReport evaluate_depths(std::span<const DepthMap> preds, std::span<const DepthMap> gts, Real cap,
                           Real d_min) {
  if (preds.size() != gts.size()) throw DataError("evaluate: prediction and ground-truth counts differ");
  if (!(cap > d_min)) throw DataError("evaluate: cap must exceed d_min");
  EvalReport r;
  r.cap = cap;
  // long double sums keep the pooled means order-stable enough for 1e-12 checks
  long double abs_rel = 0, sq_rel = 0, sq = 0, sq_log = 0;
  std::size_t d1 = 0, d2 = 0, d3 = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const DepthMap& p = preds[k];
    const DepthMap& g = gts[k];
    if (p.width != g.width || p.height != g.height) {
      throw ShapeError("evaluate: prediction " + std::to_string(p.width) + "x" + std::to_string(p.height) +
                       " vs ground truth " + std::to_string(g.width) + "x" + std::to_string(g.height));
    }
    for (std::size_t i = 0; i < g.depth.size(); ++i) {
      const Real gt = g.depth[i];
      if (!(gt > 0 && gt <= cap)) continue;
      const Real pred = std::clamp(p.depth[i], d_min, cap);
      const long double diff = static_cast<long double>(pred) - gt;
      abs_rel += std::abs(diff) / gt;
      sq_rel += diff * diff / gt;
      sq += diff * diff;
      const long double dl = std::log(static_cast<long double>(pred)) - std::log(static_cast<long double>(gt));
      sq_log += dl * dl;
      const Real ratio = std::max(pred / gt, gt / pred);
      d1 += ratio < Real(1.25);
      d2 += ratio < Real(1.25 * 1.25);
      d3 += ratio < Real(1.25 * 1.25 * 1.25);
      ++r.count;
    }
  }
  if (r.count == 0) throw DataError("evaluate: no ground-truth pixel in (0, cap]");
  const long double n = static_cast<long double>(r.count);
  r.abs_rel = static_cast<Real>(abs_rel / n);
  r.sq_rel = static_cast<Real>(sq_rel / n);
  r.rmse = static_cast<Real>(std::sqrt(sq / n));
  r.rmse_log = static_cast<Real>(std::sqrt(sq_log / n));
  r.delta1 = static_cast<Real>(d1 / n);
  r.delta2 = static_cast<Real>(d2 / n);
  r.delta3 = static_cast<Real>(d3 / n);
  return r;
}

EvalReport evaluate(const DepthNet& net, std::span<const Sample> eval_set, Real cap, Real d_min) {
  std::vector<DepthMap> preds(eval_set.size()), gts(eval_set.size());
  for (std::size_t i = 0; i < eval_set.size(); ++i) {
    if (!eval_set[i].depth) {
      throw DataError("evaluate: eval sample " + std::to_string(i) + " has no ground-truth depth");
    }
    gts[i] = *eval_set[i].depth;
  }
  parallel_for(eval_set.size(), [&](std::size_t i) { preds[i] = net.predict(eval_set[i].image); });
  return evaluate_depths(preds, gts, cap, d_min);
}

std::string metrics_csv(const EvalReport& r) {
  std::string out = "metric,value\n";
  auto line = [&](const char* name, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s,%.17g\n", name, v);
    out += buf;
  };
  line("abs_rel", r.abs_rel);
  line("sq_rel", r.sq_rel);
  line("rmse", r.rmse);
  line("rmse_log", r.rmse_log);
  line("delta1", r.delta1);
  line("delta2", r.delta2);
  line("delta3", r.delta3);
  line("cap", r.cap);
  out += "count," + std::to_string(r.count) + "\n";
  return out;
}

DepthNet make_depth_net(const RunConfig& cfg) { return DepthNet(cfg.depth_net(), derive_seed(cfg.seed, "depthnet")); }

CompletionNet make_completion_net(const RunConfig& cfg) {
  return CompletionNet(cfg.completion_net(), derive_seed(cfg.seed, "completion"));
}

namespace {

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_without_replacement(n, n, rng);
}

void check_resolution(const Image& image, const RunConfig& cfg, const std::string& what) {
  if (image.width != cfg.width || image.height != cfg.height) {
    throw DataError(what + " is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                    ", config expects " + std::to_string(cfg.width) + "x" + std::to_string(cfg.height));
  }
}

struct StepLoss {
  Tensor total;
  Tensor task;
};

// One pass over `count` items in minibatches; returns mean total and task loss.
std::pair<Real, Real> run_epoch(ParameterSet& params, Adam& adam, Real lr, std::size_t count,
                                std::size_t batch_size,
                                const std::function<StepLoss(std::size_t)>& item_loss) {
  Real total_sum = 0, task_sum = 0;
  Tape tape;
  for (std::size_t begin = 0; begin < count; begin += batch_size) {
    const std::size_t end = std::min(count, begin + batch_size);
    params.watch(tape);
    Tensor batch_total;
    for (std::size_t j = begin; j < end; ++j) {
      StepLoss l = item_loss(j);
      total_sum += l.total.item();
      task_sum += l.task.item();
      batch_total = j == begin ? l.total : ops::add(batch_total, l.total);
    }
    batch_total = ops::mul_scalar(batch_total, Real(1) / static_cast<Real>(end - begin));
    if (!std::isfinite(batch_total.item())) throw DataError("training diverged: non-finite loss");
    tape.backward(batch_total);
    tape.reset();
    adam.step(lr);
  }
  return {total_sum / static_cast<Real>(count), task_sum / static_cast<Real>(count)};
}

void require_depth(const Sample& s, const std::string& what) {
  if (!s.depth) throw DataError(what + " has no depth");
}

}  // namespace

std::vector<std::vector<Image>> stylized_sources(const Dataset& data, const RunConfig& cfg) {
  if (data.target.empty()) throw DataError("stylized copies need target images");
  std::vector<std::vector<Image>> out(data.source.size());
  parallel_for(data.source.size(), [&](std::size_t i) {
    Rng rng(derive_seed(cfg.seed, "style-copy", i));
    for (std::size_t c = 0; c < cfg.stylized_copies; ++c) {
      out[i].push_back(stylize(data.source[i].image, data.target[rng.index(data.target.size())].image));
    }
  });
  return out;
}

DepthNet train_stage1(const Dataset& data, const RunConfig& cfg, TrainLog* log) {
  if (data.source.empty() || data.target.empty()) throw DataError("stage 1 needs source and target images");
  for (const auto& s : data.source) {
    require_depth(s, "source sample");
    check_resolution(s.image, cfg, "source image");
  }
  const bool stereo = cfg.mode == TrainMode::stereo;
  for (const auto& t : data.target) {
    check_resolution(t.image, cfg, "target image");
    if (stereo && !t.right) throw DataError("stereo mode needs right target views");
  }
  DepthNet net = make_depth_net(cfg);
  Adam adam(net.parameters());
  const auto copies = stylized_sources(data, cfg);
  const std::size_t ns = data.source.size(), nt = data.target.size();
  const LossWeights& w = cfg.weights;

  std::vector<Tensor> src_img(ns), src_gt(ns), tgt_img(nt), tgt_right(nt);
  for (std::size_t i = 0; i < ns; ++i) {
    src_img[i] = data.source[i].image.to_tensor();
    src_gt[i] = data.source[i].depth->to_tensor();
  }
  for (std::size_t i = 0; i < nt; ++i) {
    tgt_img[i] = data.target[i].image.to_tensor();
    if (stereo) tgt_right[i] = data.target[i].right->to_tensor();
  }

  for (std::size_t epoch = 0; epoch < cfg.epochs_stage1; ++epoch) {
    const auto src_order = shuffled(ns, derive_seed(cfg.seed, "stage1-source", epoch));
    const auto tgt_order = shuffled(nt, derive_seed(cfg.seed, "stage1-target", epoch));
    const std::size_t copy = epoch % cfg.stylized_copies;
    std::vector<Tensor> sr_img(ns);
    for (std::size_t i = 0; i < ns; ++i) sr_img[i] = copies[i][copy].to_tensor();
    const Real lr = linear_decay_lr(cfg.learning_rate, epoch, cfg.decay_start, cfg.epochs_stage1);
    const auto [loss, task] = run_epoch(net.parameters(), adam, lr, ns, cfg.batch_size, [&](std::size_t j) {
      const std::size_t s = src_order[j], t = tgt_order[j % nt];
      const Tensor task_s = task_loss(net.forward(src_img[s]), src_gt[s]);
      const Tensor task_sr = task_loss(net.forward(sr_img[s]), src_gt[s]);
      const Tensor sm = smoothness_loss(net.forward(tgt_img[t]), tgt_img[t]);
      return StepLoss{stage1_total(task_s, task_sr, sm, w), task_s};
    });
    if (log) {
      log->loss.push_back(loss);
      log->task.push_back(task);
    }
  }

  if (stereo) {
    const StereoRig rig = cfg.stereo_rig();
    for (std::size_t epoch = 0; epoch < cfg.epochs_stereo_extra; ++epoch) {
      const auto src_order = shuffled(ns, derive_seed(cfg.seed, "stereo-source", epoch));
      const auto tgt_order = shuffled(nt, derive_seed(cfg.seed, "stereo-target", epoch));
      const Real lr = linear_decay_lr(cfg.learning_rate, epoch, cfg.decay_start, cfg.epochs_stereo_extra);
      const auto [loss, task] = run_epoch(net.parameters(), adam, lr, nt, cfg.batch_size, [&](std::size_t j) {
        const std::size_t t = tgt_order[j], s = src_order[j % ns];
        const Tensor task_s = task_loss(net.forward(src_img[s]), src_gt[s]);
        const Tensor pred_l = net.forward(tgt_img[t]);
        const Tensor pred_r = net.forward(tgt_right[t]);
        const Tensor sm = smoothness_loss(pred_l, tgt_img[t]);
        const Tensor tgc = geometric_consistency_loss(tgt_img[t], tgt_right[t], pred_l, pred_r, rig, w);
        return StepLoss{stage1_stereo_total(task_s, sm, tgc, w), task_s};
      });
      if (log) {
        log->loss.push_back(loss);
        log->task.push_back(task);
      }
    }
  }
  return net;
}

namespace {

PointCloud full_cloud(const DepthMap& depth, const CameraModel& cam) {
  return project_2d_to_3d(depth, PixelMask(depth.width, depth.height, true), cam);
}

void check_depths(std::span<const DepthMap> depths, const RunConfig& cfg) {
  if (depths.empty()) throw DataError("completion: empty depth set");
  for (const auto& d : depths) {
    if (d.width != cfg.width || d.height != cfg.height) {
      throw DataError("completion: depth map " + std::to_string(d.width) + "x" + std::to_string(d.height) +
                      " does not match the configured resolution");
    }
  }
}

}  // namespace

Real completion_cd(const PointCompleter& completer, std::span<const DepthMap> depths, const RunConfig& cfg) {
  check_depths(depths, cfg);
  const CameraModel cam = cfg.camera();
  std::vector<Real> cd(depths.size());
  parallel_for(depths.size(), [&](std::size_t i) {
    const PointCloud full = full_cloud(depths[i], cam);
    const PointCloud sparse = uniform_subsample(full, cfg.sampling_ratio, derive_seed(cfg.seed, "completion-eval", i));
    cd[i] = chamfer_distance(completer.complete(sparse), full);
  });
  Real sum = 0;
  for (Real v : cd) sum += v;
  return sum / static_cast<Real>(cd.size());
}

EvalReport completion_quality(const PointCompleter& completer, std::span<const DepthMap> depths,
                              const RunConfig& cfg) {
  check_depths(depths, cfg);
  const CameraModel cam = cfg.camera();
  std::vector<DepthMap> preds(depths.size()), gts(depths.size());
  parallel_for(depths.size(), [&](std::size_t i) {
    const PointCloud sparse = uniform_subsample(full_cloud(depths[i], cam), cfg.sampling_ratio,
                                                derive_seed(cfg.seed, "completion-eval", i));
    Projection proj = project_3d_to_2d(completer.complete(sparse), cam);
    gts[i] = DepthMap(depths[i].width, depths[i].height, 0);
    for (std::size_t p = 0; p < proj.mask.size(); ++p) {
      if (proj.mask.bits[p]) gts[i].depth[p] = depths[i].depth[p];
      proj.depth.depth[p] = std::min(proj.depth.depth[p], cfg.d_max);
    }
    preds[i] = std::move(proj.depth);
  });
  return evaluate_depths(preds, gts, cfg.d_max, cfg.d_min);
}

CompletionNet train_completion(std::span<const DepthMap> depths, const RunConfig& cfg, CompletionLog* log) {
  check_depths(depths, cfg);
  CompletionNet net = make_completion_net(cfg);
  const CameraModel cam = cfg.camera();
  std::vector<PointCloud> clouds(depths.size());
  std::vector<Tensor> targets(depths.size());
  for (std::size_t i = 0; i < depths.size(); ++i) {
    clouds[i] = full_cloud(depths[i], cam);
    targets[i] = clouds[i].to_tensor();
  }
  if (log) log->initial_cd = completion_cd(net, depths, cfg);
  Adam adam(net.parameters());
  const std::size_t n = depths.size();
  for (std::size_t epoch = 0; epoch < cfg.epochs_completion; ++epoch) {
    const auto order = shuffled(n, derive_seed(cfg.seed, "completion-order", epoch));
    const Real lr = linear_decay_lr(cfg.completion_learning_rate, epoch, cfg.decay_start, cfg.epochs_completion);
    const auto [loss, unused] = run_epoch(net.parameters(), adam, lr, n, cfg.batch_size, [&](std::size_t j) {
      const std::size_t i = order[j];
      const PointCloud sparse =
          uniform_subsample(clouds[i], cfg.sampling_ratio, derive_seed(cfg.seed, "completion-sample", epoch * n + i));
      const Tensor cd = chamfer_distance(net.forward(sparse.to_tensor()), targets[i]);
      return StepLoss{cd, cd};
    });
    (void)unused;
    if (log) log->cd.push_back(loss);
  }
  if (log) log->final_cd = completion_cd(net, depths, cfg);
  return net;
}

namespace {

PseudoLabelSet label_target(const DepthNet& net, const PointCompleter& completer, const Dataset& data,
                            const RunConfig& cfg, std::size_t t, CompletionLabel* detail) {
  const Image& image = data.target[t].image;
  Rng rng(derive_seed(cfg.seed, "label-style", t));
  const Image stylized = stylize(image, data.source[rng.index(data.source.size())].image);
  DepthMap pred_r = net.predict(image);
  DepthMap pred_rs = net.predict(stylized);
  for (auto* m : {&pred_r, &pred_rs}) {
    for (auto& d : m->depth) d = std::clamp(d, cfg.d_min, cfg.d_max);
  }
  ConsistencyLabel cons = consistency_label(pred_r, pred_rs, cfg.weights.tau);
  if (cons.mask.popcount() == 0) {
    return make_label_set(std::move(cons), DepthMap(cfg.width, cfg.height, 0), PixelMask(cfg.width, cfg.height));
  }
  const CompletionOptions options{cfg.sampling_ratio, derive_seed(cfg.seed, "label-sample", t), cfg.d_max};
  CompletionLabel comp = completion_label(cons.label, cons.mask, completer, cfg.camera(), options);
  PseudoLabelSet set = make_label_set(std::move(cons), comp.label, comp.valid);
  if (detail) *detail = std::move(comp);
  return set;
}

}  // namespace

std::vector<PseudoLabelSet> generate_pseudolabels(const DepthNet& stage1, const PointCompleter& completer,
                                                  const Dataset& data, const RunConfig& cfg) {
  if (data.source.empty()) throw DataError("pseudo-labels need source images for stylization");
  for (const auto& t : data.target) check_resolution(t.image, cfg, "target image");
  std::vector<PseudoLabelSet> sets(data.target.size());
  parallel_for(data.target.size(),
               [&](std::size_t t) { sets[t] = label_target(stage1, completer, data, cfg, t, nullptr); });
  return sets;
}

DepthNet train_stage2(const DepthNet& stage1, std::span<const PseudoLabelSet> labels, const Dataset& data,
                      const RunConfig& cfg, TrainLog* log) {
  const std::size_t ns = data.source.size(), nt = data.target.size();
  if (labels.size() != nt) {
    throw DataError("stage 2: " + std::to_string(labels.size()) + " label sets for " + std::to_string(nt) +
                    " target images");
  }
  if (ns == 0 || nt == 0) throw DataError("stage 2 needs source and target images");
  const bool stereo = cfg.mode == TrainMode::stereo;
  for (std::size_t t = 0; t < nt; ++t) {
    check_resolution(data.target[t].image, cfg, "target image");
    if (labels[t].y_cons.width != cfg.width || labels[t].y_cons.height != cfg.height ||
        labels[t].m_valid.width != cfg.width || labels[t].m_valid.height != cfg.height) {
      throw DataError("stage 2: label " + std::to_string(t) + " does not match the image resolution");
    }
    if (stereo && !data.target[t].right) throw DataError("stereo mode needs right target views");
  }
  for (const auto& s : data.source) require_depth(s, "source sample");

  DepthNet net = make_depth_net(cfg);
  assign_parameters(net.parameters(), stage1.parameters());
  Adam adam(net.parameters());
  const LossWeights& w = cfg.weights;
  const StereoRig rig = cfg.stereo_rig();
  const bool cons_only = cfg.label_variant == LabelVariant::cons_only;
  const PixelMask none(cfg.width, cfg.height);

  std::vector<Tensor> src_img(ns), src_gt(ns), tgt_img(nt), tgt_right(nt);
  for (std::size_t i = 0; i < ns; ++i) {
    src_img[i] = data.source[i].image.to_tensor();
    src_gt[i] = data.source[i].depth->to_tensor();
  }
  for (std::size_t i = 0; i < nt; ++i) {
    tgt_img[i] = data.target[i].image.to_tensor();
    if (stereo) tgt_right[i] = data.target[i].right->to_tensor();
  }

  for (std::size_t epoch = 0; epoch < cfg.epochs_stage2; ++epoch) {
    const auto tgt_order = shuffled(nt, derive_seed(cfg.seed, "stage2-target", epoch));
    const auto src_order = shuffled(ns, derive_seed(cfg.seed, "stage2-source", epoch));
    const Real lr = linear_decay_lr(cfg.learning_rate, epoch, cfg.decay_start, cfg.epochs_stage2);
    const auto [loss, task] = run_epoch(net.parameters(), adam, lr, nt, cfg.batch_size, [&](std::size_t j) {
      const std::size_t t = tgt_order[j], s = src_order[j % ns];
      const PseudoLabelSet& set = labels[t];
      const PixelMask& valid = cons_only ? none : set.m_valid;
      const Tensor pred = net.forward(tgt_img[t]);
      const Tensor cons = pseudo_cons_loss(pred, set.y_cons, set.m_consist, valid);
      const Tensor comp = pseudo_comp_loss(pred, set.y_comp, valid);
      const Tensor task_s = task_loss(net.forward(src_img[s]), src_gt[s]);
      const Tensor sm = smoothness_loss(pred, tgt_img[t]);
      if (!stereo) return StepLoss{stage2_total(cons, comp, task_s, sm, w), task_s};
      const Tensor pred_right = net.forward(tgt_right[t]);
      const Tensor tgc = geometric_consistency_loss(tgt_img[t], tgt_right[t], pred, pred_right, rig, w);
      return StepLoss{stage2_stereo_total(cons, comp, task_s, sm, tgc, w), task_s};
    });
    if (log) {
      log->loss.push_back(loss);
      log->task.push_back(task);
    }
  }
  return net;
}

AblationRun run_ablation(const RunConfig& cfg) {
  const Dataset data = make_dataset(cfg.dataset(), cfg.seed);
  AblationRun run;
  const DepthNet stage1 = train_stage1(data, cfg);
  run.synthetic_only = evaluate(stage1, data.eval, cfg.eval_cap, cfg.d_min);
  std::vector<DepthMap> depths;
  for (const auto& s : data.source) depths.push_back(*s.depth);
  const CompletionNet completer = train_completion(depths, cfg, &run.completion);
  const auto labels = generate_pseudolabels(stage1, completer, data, cfg);
  for (const auto& l : labels) run.label_stats.push_back(l.stats);
  RunConfig variant = cfg;
  variant.label_variant = LabelVariant::cons_only;
  run.cons_only = evaluate(train_stage2(stage1, labels, data, variant), data.eval, cfg.eval_cap, cfg.d_min);
  variant.label_variant = LabelVariant::full;
  run.full = evaluate(train_stage2(stage1, labels, data, variant), data.eval, cfg.eval_cap, cfg.d_min);
  return run;
}

namespace workspace {

namespace {

std::string numbered(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%06zu", i);
  return buf;
}

std::string at(const std::string& out, const std::string& rel) { return (fs::path(out) / rel).string(); }

std::string log_csv(const TrainLog& log) {
  std::string s = "epoch,loss,task\n";
  char buf[96];
  for (std::size_t e = 0; e < log.loss.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", e, static_cast<double>(log.loss[e]),
                  static_cast<double>(log.task[e]));
    s += buf;
  }
  return s;
}

DepthNet load_depth_net(const RunConfig& cfg, const std::string& path) {
  if (!fs::exists(path)) throw DataError("missing checkpoint " + path);
  DepthNet net = make_depth_net(cfg);
  try {
    assign_parameters(net.parameters(), load_checkpoint(path));
  } catch (const ShapeError& e) {
    throw DataError(path + ": " + e.what());
  }
  return net;
}

CompletionNet load_completion_net(const RunConfig& cfg, const std::string& path) {
  if (!fs::exists(path)) throw DataError("missing checkpoint " + path);
  CompletionNet net = make_completion_net(cfg);
  try {
    assign_parameters(net.parameters(), load_checkpoint(path));
  } catch (const ShapeError& e) {
    throw DataError(path + ": " + e.what());
  }
  return net;
}

Dataset load_data(const std::string& out) { return read_dataset(at(out, "data")); }

std::vector<DepthMap> source_depths(const Dataset& data) {
  std::vector<DepthMap> depths;
  for (const auto& s : data.source) {
    require_depth(s, "source sample");
    depths.push_back(*s.depth);
  }
  return depths;
}

std::string mode_name(const RunConfig& cfg) { return cfg.mode == TrainMode::stereo ? "stereo" : "single"; }

}  // namespace

void gen_data(const RunConfig& cfg, const std::string& out) {
  const Dataset data = make_dataset(cfg.dataset(), cfg.seed);
  write_dataset(data, at(out, "data"));
  record_run(out, {"gen-data", cfg.seed, cfg.to_text(), {"data/manifest.json"}, {}});
}

void train_stage1(const RunConfig& cfg, const std::string& out) {
  const Dataset data = load_data(out);
  TrainLog log;
  const DepthNet net = depthpl::train_stage1(data, cfg, &log);
  save_checkpoint(at(out, "stage1.ckpt"), net.parameters());
  write_file(at(out, "stage1_loss.csv"), log_csv(log));
  record_run(out, {"train-stage1", cfg.seed, cfg.to_text(), {"stage1.ckpt", "stage1_loss.csv"},
                   {{"mode", mode_name(cfg)}}});
}

void train_completion(const RunConfig& cfg, const std::string& out) {
  const Dataset data = load_data(out);
  const auto depths = source_depths(data);
  CompletionLog log;
  const CompletionNet net = depthpl::train_completion(depths, cfg, &log);
  save_checkpoint(at(out, "completion.ckpt"), net.parameters());
  std::string csv = "epoch,cd\n";
  char buf[64];
  for (std::size_t e = 0; e < log.cd.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", e, static_cast<double>(log.cd[e]));
    csv += buf;
  }
  write_file(at(out, "completion_loss.csv"), csv);
  std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(log.initial_cd));
  std::string initial = buf;
  std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(log.final_cd));
  record_run(out, {"train-completion", cfg.seed, cfg.to_text(), {"completion.ckpt", "completion_loss.csv"},
                   {{"initial_cd", initial}, {"final_cd", buf}}});
}

void write_labels(const std::string& dir, std::span<const PseudoLabelSet> labels) {
  fs::create_directories(dir);
  std::string stats = "index,pixels,count_2d_only,count_refined,count_extended,frac_2d_only,frac_refined,frac_extended\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& l = labels[i];
    const std::string stem = (fs::path(dir) / numbered(i)).string();
    write_pfm(stem + "_cons.pfm", l.y_cons);
    write_pgm_mask(stem + "_consist.pgm", l.m_consist);
    write_pfm(stem + "_comp.pfm", l.y_comp);
    write_pgm_mask(stem + "_valid.pgm", l.m_valid);
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%zu,%zu,%zu,%.17g,%.17g,%.17g\n", i, l.stats.pixels,
                  l.stats.count_2d_only, l.stats.count_refined, l.stats.count_extended,
                  static_cast<double>(l.stats.frac_2d_only), static_cast<double>(l.stats.frac_refined),
                  static_cast<double>(l.stats.frac_extended));
    stats += buf;
  }
  write_file((fs::path(dir) / "stats.csv").string(), stats);
}

std::vector<PseudoLabelSet> read_labels(const std::string& dir, std::size_t count) {
  std::vector<PseudoLabelSet> sets;
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < count; ++i) {
    for (const char* suffix : {"_cons.pfm", "_consist.pgm", "_comp.pfm", "_valid.pgm"}) {
      const std::string p = (fs::path(dir) / (numbered(i) + suffix)).string();
      if (!fs::exists(p)) missing.push_back(p);
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing label files:";
    for (const auto& p : missing) msg += " " + p;
    throw DataError(msg);
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::string stem = (fs::path(dir) / numbered(i)).string();
    ConsistencyLabel cons{read_pgm_mask(stem + "_consist.pgm"), read_pfm(stem + "_cons.pfm")};
    DepthMap comp = read_pfm(stem + "_comp.pfm");
    PixelMask valid = read_pgm_mask(stem + "_valid.pgm");
    sets.push_back(make_label_set(std::move(cons), std::move(comp), std::move(valid)));
  }
  return sets;
}

void gen_pseudo(const RunConfig& cfg, const std::string& out) {
  const Dataset data = load_data(out);
  const DepthNet net = load_depth_net(cfg, at(out, "stage1.ckpt"));
  const CompletionNet completer = load_completion_net(cfg, at(out, "completion.ckpt"));
  const auto sets = generate_pseudolabels(net, completer, data, cfg);
  write_labels(at(out, "labels"), sets);
  std::vector<std::string> artifacts{"labels/stats.csv"};
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (const char* suffix : {"_cons.pfm", "_consist.pgm", "_comp.pfm", "_valid.pgm"}) {
      artifacts.push_back("labels/" + numbered(i) + suffix);
    }
  }
  record_run(out, {"gen-pseudo", cfg.seed, cfg.to_text(), artifacts,
                   {{"label_source", "regenerated from stage1.ckpt"}, {"stage1_mode", mode_name(cfg)}}});
}

void train_stage2(const RunConfig& cfg, const std::string& out) {
  const Dataset data = load_data(out);
  const DepthNet stage1 = load_depth_net(cfg, at(out, "stage1.ckpt"));
  const auto labels = read_labels(at(out, "labels"), data.target.size());
  TrainLog log;
  const DepthNet net = depthpl::train_stage2(stage1, labels, data, cfg, &log);
  save_checkpoint(at(out, "stage2.ckpt"), net.parameters());
  write_file(at(out, "stage2_loss.csv"), log_csv(log));
  record_run(out, {"train-stage2", cfg.seed, cfg.to_text(), {"stage2.ckpt", "stage2_loss.csv"},
                   {{"mode", mode_name(cfg)},
                    {"label_variant", cfg.label_variant == LabelVariant::full ? "full" : "cons_only"}}});
}

EvalReport eval(const RunConfig& cfg, const std::string& out, const std::string& checkpoint) {
  const Dataset data = load_data(out);
  const std::string ckpt = fs::path(checkpoint).is_absolute() ? checkpoint : at(out, checkpoint);
  const DepthNet net = load_depth_net(cfg, ckpt);
  const EvalReport report = evaluate(net, data.eval, cfg.eval_cap, cfg.d_min);
  write_file(at(out, "metrics.csv"), metrics_csv(report));
  record_run(out, {"eval", cfg.seed, cfg.to_text(), {"metrics.csv"}, {{"checkpoint", checkpoint}}});
  return report;
}

void export_cloud(const RunConfig& cfg, const std::string& out, std::size_t index) {
  const Dataset data = load_data(out);
  if (index >= data.target.size()) {
    throw DataError("export-cloud: index " + std::to_string(index) + " out of range for " +
                    std::to_string(data.target.size()) + " target images");
  }
  const DepthNet net = load_depth_net(cfg, at(out, "stage1.ckpt"));
  const CompletionNet completer = load_completion_net(cfg, at(out, "completion.ckpt"));
  CompletionLabel detail;
  label_target(net, completer, data, cfg, index, &detail);
  fs::create_directories(at(out, "clouds"));
  const std::string stem = "clouds/" + numbered(index);
  write_ply(at(out, stem + "_sparse.ply"), detail.sparse);
  write_ply(at(out, stem + "_dense.ply"), detail.dense);
  record_run(out, {"export-cloud", cfg.seed, cfg.to_text(), {stem + "_sparse.ply", stem + "_dense.ply"},
                   {{"index", std::to_string(index)}}});
}

}  // namespace workspace

}  // namespace depthpl
