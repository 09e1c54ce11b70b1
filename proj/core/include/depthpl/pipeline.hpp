#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "depthpl/config.hpp"
#include "depthpl/networks.hpp"
#include "depthpl/pseudolabel.hpp"
#include "depthpl/scenegen.hpp"

namespace depthpl {

struct EvalReport {
  Real abs_rel = 0;
  Real sq_rel = 0;
  Real rmse = 0;
  Real rmse_log = 0;
  Real delta1 = 0;
  Real delta2 = 0;
  Real delta3 = 0;
  Real cap = 80;
  std::size_t count = 0;
};

/// Pools every pixel with 0 < gt <= cap over all pairs; predictions are
/// clamped to [d_min, cap]. Throws DataError when no pixel qualifies.
EvalReport evaluate_depths(std::span<const DepthMap> preds, std::span<const DepthMap> gts, Real cap,
                           Real d_min);
/// Runs the network on every eval sample and scores it against the sidecar depth.
EvalReport evaluate(const DepthNet& net, std::span<const Sample> eval_set, Real cap, Real d_min);

/// "metric,value" lines, fixed order, 17 significant digits.
std::string metrics_csv(const EvalReport& report);

struct TrainLog {
  std::vector<Real> loss;  // per-epoch mean total loss
  std::vector<Real> task;  // per-epoch mean source task loss
};

DepthNet make_depth_net(const RunConfig& cfg);
CompletionNet make_completion_net(const RunConfig& cfg);

/// Three real-stylized copies (cfg.stylized_copies) of each source image,
/// each against a seeded random target image. Indexed [source][copy].
std::vector<std::vector<Image>> stylized_sources(const Dataset& data, const RunConfig& cfg);

/// Preliminary model: task loss on source and source-to-real images plus
/// smoothness on target images; stereo mode continues with the geometric
/// consistency objective for epochs_stereo_extra epochs.
DepthNet train_stage1(const Dataset& data, const RunConfig& cfg, TrainLog* log = nullptr);

struct CompletionLog {
  std::vector<Real> cd;  // per-epoch mean Chamfer distance
  Real initial_cd = 0;   // mean CD over the training set before any step
  Real final_cd = 0;     // same, after the last epoch
};

/// Each ground-truth depth is lifted to 3D, subsampled at sampling_ratio and
/// completed; the network minimises CD to the full cloud.
CompletionNet train_completion(std::span<const DepthMap> depths, const RunConfig& cfg,
                               CompletionLog* log = nullptr);

/// Mean CD of the completer output against the full cloud, using the same
/// seeded subsampling as training.
Real completion_cd(const PointCompleter& completer, std::span<const DepthMap> depths,
                   const RunConfig& cfg);
/// Lifts full depths, subsamples, completes, re-projects and scores the
/// re-projected depth on its valid pixels (cap d_max).
EvalReport completion_quality(const PointCompleter& completer, std::span<const DepthMap> depths,
                              const RunConfig& cfg);

/// One label set per target image. Consistency labels compare the network
/// on the target image and on its copy stylized by a seeded random source
/// image; completion labels come from `completer`.
std::vector<PseudoLabelSet> generate_pseudolabels(const DepthNet& stage1,
                                                  const PointCompleter& completer,
                                                  const Dataset& data, const RunConfig& cfg);

/// Self-training from the stage-1 weights. With label_variant cons_only the
/// completion labels are ignored and every consistent pixel uses y_cons.
DepthNet train_stage2(const DepthNet& stage1, std::span<const PseudoLabelSet> labels,
                      const Dataset& data, const RunConfig& cfg, TrainLog* log = nullptr);

struct AblationRun {
  EvalReport synthetic_only;  // stage-1 model
  EvalReport cons_only;       // stage 2 with consistency labels only
  EvalReport full;            // stage 2 with consistency and completion labels
  CompletionLog completion;
  std::vector<PseudoLabelStats> label_stats;
};

/// One seed of the label ablation on a freshly generated dataset. Stage 1,
/// the completion model and the labels are shared by the three variants.
AblationRun run_ablation(const RunConfig& cfg);

// On-disk workspace used by the command-line tool. Layout under `out`:
//   data/            dataset (manifest.json, source/, target/, eval/)
//   stage1.ckpt      completion.ckpt      stage2.ckpt
//   labels/          per target image: NNNNNN_{cons,comp}.pfm, _{consist,valid}.pgm
//   metrics.csv      run_manifest.json (written last by every command)
namespace workspace {

void gen_data(const RunConfig& cfg, const std::string& out);
void train_stage1(const RunConfig& cfg, const std::string& out);
void train_completion(const RunConfig& cfg, const std::string& out);
void gen_pseudo(const RunConfig& cfg, const std::string& out);
void train_stage2(const RunConfig& cfg, const std::string& out);
EvalReport eval(const RunConfig& cfg, const std::string& out, const std::string& checkpoint);
/// Writes sparse and dense clouds of one target image's completion label.
void export_cloud(const RunConfig& cfg, const std::string& out, std::size_t index);

void write_labels(const std::string& dir, std::span<const PseudoLabelSet> labels);
std::vector<PseudoLabelSet> read_labels(const std::string& dir, std::size_t count);

}  // namespace workspace

}  // namespace depthpl
