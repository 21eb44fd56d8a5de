#include "toy_corpus.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "arcnet/dataset.hpp"
#include "arcnet/degradation.hpp"
#include "arcnet/image.hpp"

namespace arcnet::testutil {

using arcnet::RngStream;

torch::Tensor toy_clear_image(int64_t size, RngStream& rng) {
  const int64_t n = size;
  auto img = torch::zeros({3, n, n});
  auto rows = torch::arange(n, torch::kFloat32);
  auto rr = rows.unsqueeze(1).expand({n, n});
  auto cc = rows.unsqueeze(0).expand({n, n});
  const double c0 = (n - 1) / 2.0;
  auto d_center = ((rr - c0).pow(2) + (cc - c0).pow(2)).sqrt();
  auto fov = (d_center <= 0.48 * n).to(torch::kFloat32);

  const double base[3] = {0.55 + rng.uniform(-0.08, 0.08),
                          0.30 + rng.uniform(-0.06, 0.06),
                          0.12 + rng.uniform(-0.04, 0.04)};
  auto fall = 1.0 - 0.35 * (d_center / (0.48 * n)).clamp(0.0, 1.0).pow(2);
  for (int c = 0; c < 3; ++c) img[c] = base[c] * fall;

  // bright optic-disc blob
  const double br = c0 + rng.uniform(-0.22, 0.22) * n;
  const double bc = c0 + rng.uniform(-0.22, 0.22) * n;
  const double radius = n * rng.uniform(0.07, 0.12);
  auto blob = (-((rr - br).pow(2) + (cc - bc).pow(2)) / (2 * radius * radius)).exp();
  const double tint[3] = {0.32, 0.28, 0.16};
  for (int c = 0; c < 3; ++c) img[c] += tint[c] * blob;

  // dark vessel walks radiating from the disc; sharp, so the image has
  // genuine high-frequency content for the guidance to latch onto
  auto acc = torch::zeros({n, n});
  auto a = acc.accessor<float, 2>();
  const int vessels = 6 + static_cast<int>(rng.uniform_int(0, 3));
  for (int v = 0; v < vessels; ++v) {
    double r = br + rng.uniform(-3.0, 3.0);
    double col = bc + rng.uniform(-3.0, 3.0);
    double ang = rng.uniform(0.0, 2.0 * M_PI);
    const int len = static_cast<int>(static_cast<double>(n) * rng.uniform(0.5, 0.9));
    for (int s = 0; s < len; ++s) {
      ang += rng.uniform(-0.3, 0.3);
      r += std::sin(ang);
      col += std::cos(ang);
      const auto ri = static_cast<int64_t>(std::lround(r));
      const auto ci = static_cast<int64_t>(std::lround(col));
      if (ri < 0 || ri >= n || ci < 0 || ci >= n) break;
      a[ri][ci] = 1.0f;
      if (ri + 1 < n) a[ri + 1][ci] = 1.0f;
    }
  }
  const double vess[3] = {0.28, 0.20, 0.08};
  for (int c = 0; c < 3; ++c) img[c] -= vess[c] * acc;

  return (img * fov.unsqueeze(0)).clamp(0.0, 1.0);
}

namespace {

std::string pad_id(const char* prefix, int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%03lld", prefix, static_cast<long long>(i));
  return buf;
}

void write_pair(const std::string& root, const std::string& sub_clear,
                const std::string& sub_degraded, const std::string& id,
                int64_t size, uint64_t seed, const char* clear_tag,
                const char* degrade_tag, bool gamma_shift,
                DatasetManifest* manifest, bool degraded_only) {
  auto rng = derive_stream(seed, std::string(clear_tag) + id);
  auto clear = toy_clear_image(size, rng);
  if (gamma_shift) clear = clear.pow(0.85);
  const FundusImage clear_img{clear, std::nullopt};

  auto params =
      sample_params(size, size, derive_seed(seed, std::string(degrade_tag) + id));
  const FundusImage degraded = simulate_cataract(clear_img, params);

  const std::string degraded_rel = sub_degraded + "/" + id + ".png";
  save_image(degraded, root + "/" + degraded_rel);
  manifest->entries.push_back({degraded_rel,
                               degraded_only ? EntryRole::kTarget
                                             : EntryRole::kSourceDegraded,
                               degraded_only ? "" : id});
  if (!degraded_only) {
    const std::string clear_rel = sub_clear + "/" + id + ".png";
    save_image(clear_img, root + "/" + clear_rel);
    manifest->entries.push_back({clear_rel, EntryRole::kSourceClear, id});
  }
}

}  // namespace

ToyCorpus make_toy_corpus(const std::string& root_in, int64_t train_pairs,
                          int64_t eval_pairs, int64_t targets, int64_t size,
                          uint64_t seed) {
  namespace fs = std::filesystem;
  // manifests carry an absolute root so they stay valid from any cwd
  const std::string root = fs::absolute(root_in).string();
  for (const char* sub : {"clear", "degraded", "target", "eval_clear", "eval_degraded"}) {
    fs::create_directories(fs::path(root) / sub);
  }

  DatasetManifest source{root, seed, {}};
  for (int64_t i = 0; i < train_pairs; ++i) {
    write_pair(root, "clear", "degraded", pad_id("p", i), size, seed, "train-clear-",
               "train-degrade-", false, &source, false);
  }
  DatasetManifest eval{root, seed, {}};
  for (int64_t i = 0; i < eval_pairs; ++i) {
    write_pair(root, "eval_clear", "eval_degraded", pad_id("e", i), size, seed,
               "eval-clear-", "eval-degrade-", false, &eval, false);
  }
  // target images come from a shifted clear distribution, so the domains
  // genuinely differ from the paired training set
  DatasetManifest target{root, seed, {}};
  for (int64_t i = 0; i < targets; ++i) {
    write_pair(root, "", "target", pad_id("t", i), size, seed, "target-clear-",
               "target-degrade-", true, &target, true);
  }

  ToyCorpus corpus;
  corpus.root = root;
  corpus.source_manifest = (fs::path(root) / "source_manifest.json").string();
  corpus.target_manifest = (fs::path(root) / "target_manifest.json").string();
  corpus.eval_manifest = (fs::path(root) / "eval_manifest.json").string();
  save_manifest(source, corpus.source_manifest);
  save_manifest(target, corpus.target_manifest);
  save_manifest(eval, corpus.eval_manifest);
  return corpus;
}

}  // namespace arcnet::testutil
