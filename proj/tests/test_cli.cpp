#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>

#include "depthpl/formats.hpp"
#include "test_util.hpp"

#ifdef DEPTHPL_CLI_PATH

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

Result run(const std::string& args) {
  const std::string cmd = std::string("\"") + DEPTHPL_CLI_PATH + "\" " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = depthpl::read_file(e.path().string());
  }
  return files;
}

fs::path tiny_config(const fs::path& dir) {
  const fs::path p = dir / "tiny.cfg";
  depthpl::write_file(p.string(),
                      "width = 32\nheight = 16\nsource_count = 3\ntarget_count = 2\neval_count = 2\n"
                      "depth_channels = 4,8\nepochs_stage1 = 1\nbatch_size = 2\n");
  return p;
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  const Result r = run("frobnicate");
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.output.empty());
  EXPECT_EQ(run("gen-data --no-such-flag").code, 1);
  EXPECT_EQ(run("gen-data").code, 1);  // no --out
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, BadConfigIsExitTwo) {
  const auto dir = depthpl::testing::scratch_dir("cli_badcfg");
  depthpl::write_file((dir / "bad.cfg").string(), "bogus = 1\n");
  const Result r = run("gen-data --config " + (dir / "bad.cfg").string() + " --out " + (dir / "o").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("bogus"), std::string::npos) << r.output;
  fs::remove_all(dir);
}

TEST(Cli, GenDataIsByteIdentical) {
  const auto dir = depthpl::testing::scratch_dir("cli_gen");
  const auto cfg = tiny_config(dir).string();
  ASSERT_EQ(run("gen-data --config " + cfg + " --seed 7 --out " + (dir / "a").string()).code, 0);
  ASSERT_EQ(run("gen-data --config " + cfg + " --seed 7 --out " + (dir / "b").string()).code, 0);
  const auto a = tree(dir / "a"), b = tree(dir / "b");
  EXPECT_GT(a.size(), 5u);
  EXPECT_EQ(a, b);
  ASSERT_EQ(run("gen-data --config " + cfg + " --seed 8 --out " + (dir / "c").string()).code, 0);
  EXPECT_NE(tree(dir / "c"), a);
  fs::remove_all(dir);
}

TEST(Cli, OverrideRecordedInRunManifest) {
  const auto dir = depthpl::testing::scratch_dir("cli_set");
  const auto cfg = tiny_config(dir).string();
  ASSERT_EQ(run("gen-data --config " + cfg + " --set tau=0.3 --out " + (dir / "o").string()).code, 0);
  const std::string m = depthpl::read_file((dir / "o" / "run_manifest.json").string());
  EXPECT_NE(m.find("tau = 0.3"), std::string::npos) << m;
  EXPECT_EQ(run("gen-data --config " + cfg + " --set tau=-1 --out " + (dir / "p").string()).code, 2);
  fs::remove_all(dir);
}

TEST(Cli, EvalNamesMissingSidecars) {
  const auto dir = depthpl::testing::scratch_dir("cli_eval");
  const auto cfg = tiny_config(dir).string();
  const std::string out = (dir / "o").string();
  ASSERT_EQ(run("gen-data --config " + cfg + " --out " + out).code, 0);
  ASSERT_EQ(run("train-stage1 --config " + cfg + " --out " + out).code, 0);
  const Result ok = run("eval --config " + cfg + " --out " + out + " --checkpoint stage1.ckpt");
  ASSERT_EQ(ok.code, 0) << ok.output;
  EXPECT_TRUE(fs::exists(dir / "o" / "metrics.csv"));
  fs::remove(dir / "o" / "data" / "eval" / "000000.pfm");
  fs::remove(dir / "o" / "data" / "eval" / "000001.pfm");
  const Result r = run("eval --config " + cfg + " --out " + out + " --checkpoint stage1.ckpt");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("eval/000000.pfm"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("eval/000001.pfm"), std::string::npos) << r.output;
  const Result missing = run("eval --config " + cfg + " --out " + out + " --checkpoint nope.ckpt");
  EXPECT_EQ(missing.code, 2);
  fs::remove_all(dir);
}

TEST(Cli, GradcheckPasses) {
  const Result r = run("gradcheck --points 3");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("chamfer"), std::string::npos);
}

#endif
