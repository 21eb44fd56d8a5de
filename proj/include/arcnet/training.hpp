#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arcnet/network.hpp"
#include "arcnet/objectives.hpp"
#include "arcnet/rng.hpp"

namespace arcnet {

// Two-phase schedule and loop hyperparameters. The defaults are the
// production settings; smoke configs shrink sizes, not structure.
struct TrainConfig {
  std::string source_manifest;
  std::string target_manifest;
  std::string out_dir = "train_out";
  int64_t epochs = 100;
  int64_t phase1_epochs = 80;  // at lr_phase1; the rest run at lr_phase2
  double lr_phase1 = 2e-4;
  double lr_phase2 = 5e-5;
  int64_t batch_size = 8;
  int64_t crop = 256;
  std::vector<int64_t> resize_scales{286, 306, 326, 346};
  LossWeights weights;
  uint64_t seed = 1;
  int64_t checkpoint_every = 0;  // steps between checkpoints; 0 = final only
  GuidanceSettings guidance;
  bool use_structure_loss = true;
  bool use_domain_loss = true;
  int depth = 8;
  int64_t base_width = 64;
  bool deterministic = true;
};

TrainConfig train_config_from_json(const std::string& text);
TrainConfig load_train_config(const std::string& path);
std::string train_config_to_json(const TrainConfig& cfg);
void validate_train_config(const TrainConfig& cfg);

// FNV-1a of the canonical JSON form with the identity-irrelevant fields
// (seed, out_dir) removed, as a 16-digit hex string. Two runs that differ
// only in seed or output location share a fingerprint.
std::string config_fingerprint(const TrainConfig& cfg);

// The exact step schedule: lr_phase1 for epochs [0, phase1), lr_phase2 after.
double lr_for_epoch(const TrainConfig& cfg, int64_t epoch);

// One scale draw from `scales`, square bilinear resize, one crop window
// applied identically to both images of a pair. Three rng draws per call
// regardless of pairing.
struct Augmented {
  torch::Tensor image;
  torch::Tensor paired;  // undefined when no pair was given
};
Augmented augment(const torch::Tensor& img, const std::optional<torch::Tensor>& paired,
                  const std::vector<int64_t>& scales, int64_t crop, RngStream& rng);

struct StepOptions {
  LossWeights weights;
  bool use_structure_loss = true;
  bool use_domain_loss = true;
};

// One optimization step: D_pixel, then D_domain, then the generator, once
// each. Batches are {N,3,H,W} in [0,1]; the target batch must match the
// source batch size (pass an undefined tensor when the domain loss is
// off). Returns the step's losses; any non-finite term aborts with a
// NumericError naming it.
LossReport train_step(ModelBundle& bundle, const StructureGuidance* guidance,
                      const torch::Tensor& source_degraded,
                      const torch::Tensor& source_clear, const torch::Tensor& target,
                      const StepOptions& opts);

// Full two-phase run (optionally resumed from a checkpoint of the same
// config fingerprint). Writes <out_dir>/train_log.csv, periodic
// checkpoints <out_dir>/ckpt_<step>.arcnet, and returns the final
// checkpoint path.
std::string fit(const TrainConfig& cfg, const std::string& resume_checkpoint = {});

}  // namespace arcnet
