#pragma once

#include <filesystem>
#include <string>

namespace arcnet::testutil {

// Fresh per-test scratch directory under the ctest working directory.
// Recreated on every call so reruns never see stale artifacts.
inline std::string scratch_dir(const std::string& name) {
  const auto p = std::filesystem::path("test_scratch") / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace arcnet::testutil
