#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "depthpl/scenegen.hpp"

namespace depthpl {

inline constexpr int kManifestSchemaVersion = 1;

struct ManifestRecord {
  std::string role;   // source | target-train | target-eval
  std::string side;   // mono | left | right
  std::string image;  // relative to the manifest directory
  std::optional<std::string> depth;
  std::uint64_t scene_seed = 0;

  bool operator==(const ManifestRecord&) const = default;
};

struct Manifest {
  int schema_version = kManifestSchemaVersion;
  std::vector<ManifestRecord> records;

  bool operator==(const Manifest&) const = default;
};

/// Pretty-printed JSON with a trailing newline. Seeds are written as
/// decimal strings so 64-bit values survive any JSON reader.
std::string encode_manifest(const Manifest& manifest);
/// Throws FormatError on malformed JSON, unknown roles/sides or a wrong
/// schema version.
Manifest decode_manifest(const std::string& text);

/// Checks the manifest invariants against files under `dir`: every path
/// exists, source and eval records carry depth, train and eval scene seeds
/// are disjoint. Throws DataError listing every missing file.
void validate_manifest(const Manifest& manifest, const std::string& dir);

/// Writes images, depths and manifest.json (last) into `dir`.
Manifest write_dataset(const Dataset& data, const std::string& dir);
/// Loads and validates `dir`/manifest.json and every file it names.
Dataset read_dataset(const std::string& dir);

/// Adds or replaces one command's entry in `dir`/run_manifest.json. Entries
/// are keyed by command name; the file holds no timestamps so identical runs
/// give identical bytes.
struct RunRecord {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_text;
  std::vector<std::string> artifacts;  // relative to `dir`
  std::map<std::string, std::string> notes;
};
void record_run(const std::string& dir, const RunRecord& record);

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_digest(const std::string& path);

}  // namespace depthpl
