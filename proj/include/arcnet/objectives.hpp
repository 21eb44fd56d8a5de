#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>

#include "arcnet/frequency.hpp"

namespace arcnet {

enum class AdvSide { discriminator, generator };

// Patch-level BCE adversarial loss on raw logits, averaged over patches so
// magnitudes are resolution-independent. Discriminator side is
// 0.5 * (BCE(real -> 1) + BCE(fake -> 0)); generator side is the
// non-saturating BCE(fake -> 1) and ignores `real_logits` (it may be an
// undefined tensor). NaN logits raise NumericError. Differentiable.
torch::Tensor adversarial_loss(const torch::Tensor& real_logits,
                               const torch::Tensor& fake_logits, AdvSide side);

// Mean absolute difference over all elements. Shapes must match.
torch::Tensor image_l1(const torch::Tensor& restored, const torch::Tensor& reference);

// L1 between the guidance rasters of the two images: backpropagates
// through the guidance of `restored`.
torch::Tensor structure_l1(const torch::Tensor& restored, const torch::Tensor& reference,
                           const StructureGuidance& guidance);

struct LossWeights {
  double lambda1 = 100.0;  // on the image L1
  double lambda2 = 50.0;   // on the structure L1
  double lambda3 = 1.0;    // on the domain adversarial term
};

struct LossReport {
  double l_p = 0.0;
  double l_i = 0.0;
  double l_s = 0.0;
  double l_d = 0.0;
  double total = 0.0;
  int64_t step = 0;
};

// l_p + lambda1 * l_i + lambda2 * l_s + lambda3 * l_d. Weights must be
// nonnegative.
double total_generator_loss(const LossReport& parts, const LossWeights& w);

// Training-log CSV column layout.
std::string loss_csv_header();
std::string loss_csv_row(const LossReport& r);

}  // namespace arcnet
