#include <gtest/gtest.h>

#include <filesystem>

#include "depthpl/error.hpp"
#include "depthpl/formats.hpp"
#include "depthpl/manifest.hpp"
#include "test_util.hpp"

using namespace depthpl;
namespace fs = std::filesystem;

namespace {

DatasetConfig tiny(bool stereo) {
  DatasetConfig cfg;
  cfg.source_count = 3;
  cfg.target_count = 2;
  cfg.eval_count = 2;
  cfg.stereo = stereo;
  cfg.camera.width = 32;
  cfg.camera.height = 16;
  cfg.camera.principal_x = 16;
  cfg.camera.principal_y = 8;
  cfg.camera.focal = 19;
  return cfg;
}

}  // namespace

TEST(Manifest, EncodeDecodeRoundTrip) {
  Manifest m;
  m.records.push_back({"source", "mono", "source/000000.ppm", "source/000000.pfm", 18446744073709551615ULL});
  m.records.push_back({"target-train", "left", "target/000000_left.ppm", std::nullopt, 3});
  const std::string text = encode_manifest(m);
  EXPECT_EQ(decode_manifest(text), m);
  EXPECT_NE(text.find("\"18446744073709551615\""), std::string::npos);
  EXPECT_EQ(text.back(), '\n');
}

TEST(Manifest, DecodeRejects) {
  EXPECT_THROW(decode_manifest("{"), FormatError);
  EXPECT_THROW(decode_manifest(R"({"schema_version": 2, "records": []})"), FormatError);
  EXPECT_THROW(decode_manifest(
                   R"({"schema_version": 1, "records": [{"role": "x", "side": "mono", "image": "a", "scene_seed": "1"}]})"),
               FormatError);
  EXPECT_THROW(decode_manifest(
                   R"({"schema_version": 1, "records": [{"role": "source", "side": "up", "image": "a", "scene_seed": "1"}]})"),
               FormatError);
}

TEST(Manifest, DatasetRoundTrip) {
  for (bool stereo : {false, true}) {
    const auto dir = depthpl::testing::scratch_dir(stereo ? "manifest_stereo" : "manifest_mono");
    const Dataset d = make_dataset(tiny(stereo), 4);
    const Manifest m = write_dataset(d, dir.string());
    EXPECT_EQ(m.records.size(), 3u + 2u * (stereo ? 2 : 1) + 2u);
    const Dataset back = read_dataset(dir.string());
    ASSERT_EQ(back.source.size(), 3u);
    ASSERT_EQ(back.target.size(), 2u);
    ASSERT_EQ(back.eval.size(), 2u);
    EXPECT_EQ(back.target[1].right.has_value(), stereo);
    EXPECT_EQ(back.eval[0].scene_seed, d.eval[0].scene_seed);
    // depth goes through float32
    for (std::size_t i = 0; i < d.eval[1].depth->depth.size(); ++i)
      EXPECT_EQ(back.eval[1].depth->depth[i], static_cast<Real>(static_cast<float>(d.eval[1].depth->depth[i])));
    fs::remove_all(dir);
  }
}

TEST(Manifest, MissingFilesAreListed) {
  const auto dir = depthpl::testing::scratch_dir("manifest_missing");
  write_dataset(make_dataset(tiny(false), 5), dir.string());
  fs::remove(dir / "eval" / "000001.pfm");
  fs::remove(dir / "source" / "000002.ppm");
  try {
    read_dataset(dir.string());
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("eval/000001.pfm"), std::string::npos) << msg;
    EXPECT_NE(msg.find("source/000002.ppm"), std::string::npos) << msg;
  }
  fs::remove(dir / "manifest.json");
  EXPECT_THROW(read_dataset(dir.string()), DataError);
  fs::remove_all(dir);
}

TEST(Manifest, EvalSeedsMustBeHeldOut) {
  const auto dir = depthpl::testing::scratch_dir("manifest_leak");
  Manifest m = write_dataset(make_dataset(tiny(false), 6), dir.string());
  m.records.back().scene_seed = m.records.front().scene_seed;
  EXPECT_THROW(validate_manifest(m, dir.string()), DataError);
  fs::remove_all(dir);
}

TEST(RunManifest, DigestsAndMerging) {
  const auto dir = depthpl::testing::scratch_dir("runmanifest");
  write_file((dir / "a.txt").string(), "a");
  write_file((dir / "empty.txt").string(), "");
  EXPECT_EQ(file_digest((dir / "a.txt").string()), "af63dc4c8601ec8c");
  EXPECT_EQ(file_digest((dir / "empty.txt").string()), "cbf29ce484222325");
  record_run(dir.string(), {"one", 7, "seed = 7\n", {"a.txt"}, {{"k", "v"}}});
  record_run(dir.string(), {"two", 7, "seed = 7\n", {"empty.txt"}, {}});
  const std::string first = read_file((dir / "run_manifest.json").string());
  EXPECT_NE(first.find("\"one\""), std::string::npos);
  EXPECT_NE(first.find("\"two\""), std::string::npos);
  EXPECT_NE(first.find("af63dc4c8601ec8c"), std::string::npos);
  record_run(dir.string(), {"one", 7, "seed = 7\n", {"a.txt"}, {{"k", "v"}}});
  EXPECT_EQ(read_file((dir / "run_manifest.json").string()), first);
  fs::remove_all(dir);
}
