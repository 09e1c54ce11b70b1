#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "depthpl/config.hpp"
#include "depthpl/error.hpp"
#include "depthpl/gradsuite.hpp"
#include "depthpl/pipeline.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDataError = 2;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

depthpl::RunConfig resolve(const Globals& g) {
  depthpl::RunConfig cfg = g.config.empty() ? depthpl::RunConfig{} : depthpl::load_config(g.config);
  for (const auto& kv : g.overrides) depthpl::apply_override(cfg, kv);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"depth estimation with 2D and 3D pseudo-labels", "depthpl"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "key=value config file");
  app.add_option("--seed", g.seed, "root seed (overrides the config)");
  app.add_option("--out", g.out, "workspace directory");
  app.add_option("--set", g.overrides, "override one config key, key=value")->allow_extra_args(false);

  auto* gen_data = app.add_subcommand("gen-data", "render source, target and eval scenes");
  auto* stage1 = app.add_subcommand("train-stage1", "train the preliminary depth model");
  auto* completion = app.add_subcommand("train-completion", "pretrain the point completion model");
  auto* gen_pseudo = app.add_subcommand("gen-pseudo", "write consistency and completion labels");
  auto* stage2 = app.add_subcommand("train-stage2", "self-train on the pseudo-labels");
  auto* eval = app.add_subcommand("eval", "score a checkpoint on the eval scenes");
  std::string checkpoint = "stage2.ckpt";
  eval->add_option("--checkpoint", checkpoint, "checkpoint, relative to --out unless absolute");
  auto* export_cloud = app.add_subcommand("export-cloud", "write sparse and dense clouds of one target image");
  std::size_t index = 0;
  export_cloud->add_option("--index", index, "target image index");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every loss");
  std::size_t points = 20;
  gradcheck->add_option("--points", points, "random points per loss")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    const depthpl::RunConfig cfg = resolve(g);
    if (gradcheck->parsed()) {
      bool ok = true;
      for (const auto& r : depthpl::run_loss_gradchecks(cfg.seed, points)) {
        std::printf("%-24s points=%zu max_rel_error=%.3e %s\n", r.loss.c_str(), r.points,
                    static_cast<double>(r.max_rel_error), r.passed ? "ok" : "FAILED");
        ok = ok && r.passed;
      }
      return ok ? kOk : kDataError;
    }
    if (g.out.empty()) {
      std::cerr << "--out is required for " << app.get_subcommands().front()->get_name() << "\n\n"
                << app.help();
      return kUsage;
    }
    if (gen_data->parsed()) depthpl::workspace::gen_data(cfg, g.out);
    else if (stage1->parsed()) depthpl::workspace::train_stage1(cfg, g.out);
    else if (completion->parsed()) depthpl::workspace::train_completion(cfg, g.out);
    else if (gen_pseudo->parsed()) depthpl::workspace::gen_pseudo(cfg, g.out);
    else if (stage2->parsed()) depthpl::workspace::train_stage2(cfg, g.out);
    else if (eval->parsed()) std::cout << depthpl::metrics_csv(depthpl::workspace::eval(cfg, g.out, checkpoint));
    else if (export_cloud->parsed()) depthpl::workspace::export_cloud(cfg, g.out, index);
  } catch (const depthpl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}
