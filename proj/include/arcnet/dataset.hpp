#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace arcnet {

enum class EntryRole { kSourceClear, kSourceDegraded, kTarget, kReference };

std::string to_string(EntryRole role);
EntryRole role_from_string(const std::string& s);

struct ManifestEntry {
  std::string path;     // relative to the manifest root
  EntryRole role;
  std::string pair_id;  // empty = pair by filename stem
};

// JSON document: { "root": dir, "seed": n, "entries": [{path, role, pair_id?}] }
struct DatasetManifest {
  std::string root;
  uint64_t seed = 0;
  std::vector<ManifestEntry> entries;

  std::string resolve(const ManifestEntry& e) const;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& m, const std::string& path);

// A clear/degraded training pair, by explicit pair id or filename stem.
struct SourcePair {
  std::string degraded_path;  // absolute; empty when the pair is synthesized
  std::string clear_path;     // absolute
  std::string id;
};

// Checks that every referenced file exists and that each source-degraded
// entry matches exactly one source-clear entry. Pure: identical manifests
// validate to identical results. Throws DataError on violations.
void validate_manifest(const DatasetManifest& m);

// Degraded/clear pairs, sorted by pair id. Requires a validated manifest.
std::vector<SourcePair> source_pairs(const DatasetManifest& m);

// Absolute paths of all entries with the given role, sorted.
std::vector<std::string> paths_with_role(const DatasetManifest& m, EntryRole role);

// The filename without directory or extension.
std::string path_stem(const std::string& path);

}  // namespace arcnet
