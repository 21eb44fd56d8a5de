#include "arcnet/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "arcnet/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace arcnet {

std::string to_string(EntryRole role) {
  switch (role) {
    case EntryRole::kSourceClear: return "source-clear";
    case EntryRole::kSourceDegraded: return "source-degraded";
    case EntryRole::kTarget: return "target";
    case EntryRole::kReference: return "reference";
  }
  return "?";
}

EntryRole role_from_string(const std::string& s) {
  if (s == "source-clear") return EntryRole::kSourceClear;
  if (s == "source-degraded") return EntryRole::kSourceDegraded;
  if (s == "target") return EntryRole::kTarget;
  if (s == "reference") return EntryRole::kReference;
  throw DataError("unknown manifest role: " + s);
}

std::string DatasetManifest::resolve(const ManifestEntry& e) const {
  return (fs::path(root) / e.path).string();
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + path + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m.root = j.at("root").get<std::string>();
    m.seed = j.value("seed", 0ull);
    for (const auto& je : j.at("entries")) {
      ManifestEntry e;
      e.path = je.at("path").get<std::string>();
      e.role = role_from_string(je.at("role").get<std::string>());
      e.pair_id = je.value("pair_id", "");
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + path + ": " + e.what());
  }
  // relative roots resolve against the manifest's own directory
  if (fs::path(m.root).is_relative()) {
    m.root = (fs::path(path).parent_path() / m.root).string();
  }
  return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  json j;
  j["root"] = m.root;
  j["seed"] = m.seed;
  j["entries"] = json::array();
  for (const auto& e : m.entries) {
    json je{{"path", e.path}, {"role", to_string(e.role)}};
    if (!e.pair_id.empty()) je["pair_id"] = e.pair_id;
    j["entries"].push_back(je);
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

std::string path_stem(const std::string& path) {
  return fs::path(path).stem().string();
}

namespace {
std::string effective_pair_id(const ManifestEntry& e) {
  return e.pair_id.empty() ? path_stem(e.path) : e.pair_id;
}
}  // namespace

void validate_manifest(const DatasetManifest& m) {
  for (const auto& e : m.entries) {
    if (!fs::exists(m.resolve(e))) {
      throw DataError("manifest references a missing file: " + m.resolve(e));
    }
  }
  std::map<std::string, int> clear_count;
  for (const auto& e : m.entries) {
    if (e.role == EntryRole::kSourceClear) clear_count[effective_pair_id(e)]++;
  }
  for (const auto& e : m.entries) {
    if (e.role != EntryRole::kSourceDegraded) continue;
    const auto id = effective_pair_id(e);
    const auto it = clear_count.find(id);
    const int n = it == clear_count.end() ? 0 : it->second;
    if (n != 1) {
      throw DataError("source-degraded entry '" + e.path + "' (pair id '" + id +
                      "') matches " + std::to_string(n) +
                      " source-clear entries, expected exactly 1");
    }
  }
}

std::vector<SourcePair> source_pairs(const DatasetManifest& m) {
  std::map<std::string, std::string> clear_by_id;
  for (const auto& e : m.entries) {
    if (e.role == EntryRole::kSourceClear) clear_by_id[effective_pair_id(e)] = m.resolve(e);
  }
  std::vector<SourcePair> pairs;
  for (const auto& e : m.entries) {
    if (e.role != EntryRole::kSourceDegraded) continue;
    const auto id = effective_pair_id(e);
    auto it = clear_by_id.find(id);
    if (it == clear_by_id.end()) {
      throw DataError("no source-clear match for pair id: " + id);
    }
    pairs.push_back({m.resolve(e), it->second, id});
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const SourcePair& a, const SourcePair& b) { return a.id < b.id; });
  return pairs;
}

std::vector<std::string> paths_with_role(const DatasetManifest& m, EntryRole role) {
  std::vector<std::string> out;
  for (const auto& e : m.entries) {
    if (e.role == role) out.push_back(m.resolve(e));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace arcnet
