#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "arcnet/frequency.hpp"
#include "arcnet/image.hpp"

namespace arcnet {

// U-net generator layout. Channel widths double from base_width up to
// max_width; with the defaults the progression is
// 64,128,256,512,512,512,512,512 and the parameter count lands near 54M.
struct GeneratorSpec {
  int64_t in_channels = 6;  // image plus its 3-channel structure guidance
  int64_t out_channels = 3;
  int depth = 8;  // down-sampling layers; mirrored on the way up
  int64_t base_width = 64;
  int64_t max_width = 512;
};

struct DiscriminatorSpec {
  int64_t in_channels = 3;
  int64_t base_width = 64;
};

// How the generator input is assembled and which guidance the structure
// loss compares. Recorded in checkpoints so inference reuses the training
// settings.
struct GuidanceSettings {
  bool use_guidance = true;
  std::string name = "hfc";
  int r_p = 26;
  double sigma_p = 9.0;
};

void validate_spec(const GeneratorSpec& spec);

class UnetGeneratorImpl : public torch::nn::Module {
 public:
  explicit UnetGeneratorImpl(const GeneratorSpec& spec);
  torch::Tensor forward(const torch::Tensor& x) { return forward(x, false); }
  // zero_bottleneck replaces the deepest activations with zeros; used to
  // demonstrate that the skip connections carry signal on their own.
  torch::Tensor forward(const torch::Tensor& x, bool zero_bottleneck);
  const GeneratorSpec& spec() const { return spec_; }

 private:
  GeneratorSpec spec_;
  std::vector<torch::nn::Conv2d> down_convs_;
  std::vector<torch::nn::BatchNorm2d> down_norms_;  // depth-1 entries; innermost bare
  std::vector<torch::nn::ConvTranspose2d> up_convs_;
  std::vector<torch::nn::BatchNorm2d> up_norms_;  // depth-1 entries; output layer bare
};
TORCH_MODULE(UnetGenerator);

// 5-conv patch classifier, kernel 4, padding 1, strides 2,2,2,1,1,
// channels 64,128,256,512,1. Returns raw logits (no sigmoid).
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit PatchDiscriminatorImpl(const DiscriminatorSpec& spec);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  std::vector<torch::nn::Conv2d> convs_;
  std::vector<torch::nn::BatchNorm2d> norms_;
};
TORCH_MODULE(PatchDiscriminator);

// Everything one training run mutates, plus the bookkeeping a checkpoint
// must carry to resume it exactly.
struct ModelBundle {
  GeneratorSpec gen_spec;
  DiscriminatorSpec disc_spec;
  GuidanceSettings guidance;
  int64_t inference_size = 256;

  UnetGenerator generator{nullptr};
  PatchDiscriminator d_pixel{nullptr};
  PatchDiscriminator d_domain{nullptr};
  std::shared_ptr<torch::optim::Adam> opt_g, opt_dp, opt_dd;

  int64_t step = 0;
  int64_t epoch = 0;
  int64_t batch_index = 0;        // next source batch within the current epoch
  torch::Tensor permutation;      // int64 source order for the current epoch
  std::map<std::string, std::string> rng_states;
  std::string config_fingerprint;
};

// Deterministic construction: weights are N(0, 0.02), normalization scales
// 1, biases 0, drawn from a stream derived from `seed`.
UnetGenerator build_generator(const GeneratorSpec& spec, uint64_t seed);
PatchDiscriminator build_discriminator(const DiscriminatorSpec& spec, uint64_t seed);

// Builds generator + both discriminators + their Adam(0.5, 0.999)
// optimizers at the given learning rate.
ModelBundle build_bundle(const GeneratorSpec& gen_spec, const DiscriminatorSpec& disc_spec,
                         const GuidanceSettings& guidance, uint64_t seed, double lr);

int64_t count_trainable_parameters(const torch::nn::Module& m);

// Maps a [0,1] image batch to the generator input: [-1,1] image channels,
// concatenated with the raw guidance raster when one is given. Accepts
// {C,H,W} or {N,C,H,W}.
torch::Tensor generator_input(const torch::Tensor& batch01,
                              const StructureGuidance* guidance);

// Single archive with the three weight sets, three optimizer states, and
// the resume/bookkeeping metadata. Format tag "arcnet-ckpt-v1".
void save_checkpoint(const ModelBundle& bundle, const std::string& path);
ModelBundle load_checkpoint(const std::string& path);

// Resizes to the bundle's inference size if needed, assembles the guidance
// input with the recorded settings, forwards in inference mode, and maps
// the Tanh output back to [0,1].
FundusImage restore(ModelBundle& bundle, const FundusImage& degraded);

}  // namespace arcnet
