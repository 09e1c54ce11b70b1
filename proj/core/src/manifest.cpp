#include "depthpl/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "depthpl/error.hpp"
#include "depthpl/formats.hpp"

namespace depthpl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kRoles{"source", "target-train", "target-eval"};
const std::set<std::string> kSides{"mono", "left", "right"};

std::uint64_t parse_seed(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("manifest: bad scene_seed '" + s + "'");
  }
  return v;
}

std::string numbered(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%06zu", i);
  return buf;
}

}  // namespace

std::string encode_manifest(const Manifest& manifest) {
  json records = json::array();
  for (const auto& r : manifest.records) {
    json j{{"role", r.role},
           {"side", r.side},
           {"image", r.image},
           {"scene_seed", std::to_string(r.scene_seed)}};
    if (r.depth) j["depth"] = *r.depth;
    records.push_back(std::move(j));
  }
  json doc{{"schema_version", manifest.schema_version}, {"records", std::move(records)}};
  return doc.dump(2) + "\n";
}

Manifest decode_manifest(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  Manifest m;
  try {
    m.schema_version = doc.at("schema_version").get<int>();
    if (m.schema_version != kManifestSchemaVersion) {
      throw FormatError("manifest: unsupported schema_version " + std::to_string(m.schema_version));
    }
    for (const auto& j : doc.at("records")) {
      ManifestRecord r;
      r.role = j.at("role").get<std::string>();
      r.side = j.at("side").get<std::string>();
      r.image = j.at("image").get<std::string>();
      r.scene_seed = parse_seed(j.at("scene_seed").get<std::string>());
      if (j.contains("depth")) r.depth = j.at("depth").get<std::string>();
      if (!kRoles.contains(r.role)) throw FormatError("manifest: unknown role '" + r.role + "'");
      if (!kSides.contains(r.side)) throw FormatError("manifest: unknown side '" + r.side + "'");
      m.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return m;
}

void validate_manifest(const Manifest& manifest, const std::string& dir) {
  std::vector<std::string> missing;
  std::set<std::uint64_t> train, eval;
  for (const auto& r : manifest.records) {
    if (!fs::exists(fs::path(dir) / r.image)) missing.push_back(r.image);
    if (r.role != "target-train" && !r.depth) {
      throw DataError("manifest: " + r.role + " record " + r.image + " has no depth file");
    }
    if (r.depth && !fs::exists(fs::path(dir) / *r.depth)) missing.push_back(*r.depth);
    (r.role == "target-eval" ? eval : train).insert(r.scene_seed);
  }
  if (!missing.empty()) {
    std::string msg = "missing files under " + dir + ":";
    for (const auto& p : missing) msg += " " + p;
    throw DataError(msg);
  }
  for (std::uint64_t s : eval) {
    if (train.contains(s)) throw DataError("manifest: eval scene seed " + std::to_string(s) + " also used for training");
  }
}

Manifest write_dataset(const Dataset& data, const std::string& dir) {
  for (const char* sub : {"source", "target", "eval"}) fs::create_directories(fs::path(dir) / sub);
  Manifest m;
  auto put = [&](const std::string& role, const std::string& side, const std::string& stem,
                 const Image& image, const DepthMap* depth, std::uint64_t seed) {
    ManifestRecord r{role, side, stem + ".ppm", std::nullopt, seed};
    write_ppm((fs::path(dir) / r.image).string(), image);
    if (depth) {
      r.depth = stem + ".pfm";
      write_pfm((fs::path(dir) / *r.depth).string(), *depth);
    }
    m.records.push_back(std::move(r));
  };
  for (std::size_t i = 0; i < data.source.size(); ++i) {
    const auto& s = data.source[i];
    put("source", "mono", "source/" + numbered(i), s.image, s.depth ? &*s.depth : nullptr, s.scene_seed);
  }
  for (std::size_t i = 0; i < data.target.size(); ++i) {
    const auto& s = data.target[i];
    if (s.right) {
      put("target-train", "left", "target/" + numbered(i) + "_left", s.image, nullptr, s.scene_seed);
      put("target-train", "right", "target/" + numbered(i) + "_right", *s.right, nullptr, s.scene_seed);
    } else {
      put("target-train", "mono", "target/" + numbered(i), s.image, nullptr, s.scene_seed);
    }
  }
  for (std::size_t i = 0; i < data.eval.size(); ++i) {
    const auto& s = data.eval[i];
    put("target-eval", "mono", "eval/" + numbered(i), s.image, s.depth ? &*s.depth : nullptr, s.scene_seed);
  }
  write_file((fs::path(dir) / "manifest.json").string(), encode_manifest(m));
  return m;
}

Dataset read_dataset(const std::string& dir) {
  const std::string path = (fs::path(dir) / "manifest.json").string();
  if (!fs::exists(path)) throw DataError("missing dataset manifest " + path);
  const Manifest m = decode_manifest(read_file(path));
  validate_manifest(m, dir);
  Dataset data;
  auto full = [&](const std::string& rel) { return (fs::path(dir) / rel).string(); };
  for (const auto& r : m.records) {
    Image image = read_ppm(full(r.image));
    std::optional<DepthMap> depth;
    if (r.depth) depth = read_pfm(full(*r.depth));
    if (r.role == "source") {
      data.source.push_back({r.scene_seed, std::move(image), std::move(depth), std::nullopt});
    } else if (r.role == "target-eval") {
      data.eval.push_back({r.scene_seed, std::move(image), std::move(depth), std::nullopt});
    } else if (r.side == "right") {
      auto it = std::find_if(data.target.begin(), data.target.end(),
                             [&](const Sample& s) { return s.scene_seed == r.scene_seed && !s.right; });
      if (it == data.target.end()) throw DataError("manifest: right view " + r.image + " has no left view");
      it->right = std::move(image);
    } else {
      data.target.push_back({r.scene_seed, std::move(image), std::nullopt, std::nullopt});
    }
  }
  return data;
}

void record_run(const std::string& dir, const RunRecord& record) {
  const fs::path path = fs::path(dir) / "run_manifest.json";
  json doc = json::object();
  if (fs::exists(path)) {
    try {
      doc = json::parse(read_file(path.string()));
    } catch (const json::exception& e) {
      throw FormatError("run manifest " + path.string() + ": " + e.what());
    }
  }
  json artifacts = json::array();
  for (const auto& a : record.artifacts) {
    artifacts.push_back({{"path", a}, {"fnv1a64", file_digest((fs::path(dir) / a).string())}});
  }
  json notes = json::object();
  for (const auto& [k, v] : record.notes) notes[k] = v;
  doc["schema_version"] = kManifestSchemaVersion;
  doc["commands"][record.command] = {{"seed", std::to_string(record.seed)},
                                     {"config", record.config_text},
                                     {"artifacts", std::move(artifacts)},
                                     {"notes", std::move(notes)}};
  write_file(path.string(), doc.dump(2) + "\n");
}

std::string file_digest(const std::string& path) {
  const std::string bytes = read_file(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace depthpl
