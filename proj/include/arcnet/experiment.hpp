#pragma once

#include <cstdint>
#include <string>

#include "arcnet/training.hpp"

namespace arcnet {

// One named end-to-end run: train under the ablation flags, restore the
// held-out evaluation pairs, and score them against their references.
struct ExperimentSpec {
  std::string name = "experiment";
  std::string source_manifest;
  std::string target_manifest;
  std::string eval_manifest;  // held-out degraded/clear pairs
  bool use_hfc = true;
  bool use_structure_loss = true;
  bool use_domain_loss = true;
  std::string out_dir = "experiment_out";
  TrainConfig train;  // hyperparameters; manifests/flags/out_dir are overridden
};

ExperimentSpec experiment_from_json(const std::string& text);
ExperimentSpec load_experiment_spec(const std::string& path);
std::string experiment_to_json(const ExperimentSpec& spec);

struct ExperimentResult {
  std::string name;
  uint64_t seed = 0;
  std::string config_fingerprint;
  std::string checkpoint;
  int64_t eval_pairs = 0;
  double restored_ssim = 0.0;
  double restored_psnr = 0.0;
  double degraded_ssim = 0.0;
  double degraded_psnr = 0.0;
  std::string report_json;  // per-image restored metrics
  std::string result_json;  // the machine-readable result row
};

// Trains under the given ExperimentSpec, writes restored/reference/degraded
// copies of the evaluation set under out_dir, evaluates restored-vs-reference and
// degraded-vs-reference from those files (so the result matches the
// train/restore/evaluate CLI composition bit for bit), and writes
// result.json. Structure loss without HFC guidance is a config error.
ExperimentResult run_experiment(const ExperimentSpec& spec);

}  // namespace arcnet
