#include "arcnet/objectives.hpp"

#include <cstdio>
#include <stdexcept>

#include "arcnet/errors.hpp"

namespace arcnet {

namespace {

void check_finite_logits(const torch::Tensor& t, const char* which) {
  if (t.defined() && torch::isnan(t).any().item<bool>()) {
    throw NumericError(std::string("adversarial loss: NaN in ") + which + " logits");
  }
}

}  // namespace

torch::Tensor adversarial_loss(const torch::Tensor& real_logits,
                               const torch::Tensor& fake_logits, AdvSide side) {
  check_finite_logits(fake_logits, "fake");
  if (side == AdvSide::generator) {
    return torch::binary_cross_entropy_with_logits(fake_logits,
                                                   torch::ones_like(fake_logits));
  }
  check_finite_logits(real_logits, "real");
  if (real_logits.sizes() != fake_logits.sizes()) {
    throw std::invalid_argument("adversarial loss: logit maps must have equal shape");
  }
  auto real_term = torch::binary_cross_entropy_with_logits(
      real_logits, torch::ones_like(real_logits));
  auto fake_term = torch::binary_cross_entropy_with_logits(
      fake_logits, torch::zeros_like(fake_logits));
  return 0.5 * (real_term + fake_term);
}

torch::Tensor image_l1(const torch::Tensor& restored, const torch::Tensor& reference) {
  if (restored.sizes() != reference.sizes()) {
    throw std::invalid_argument("image_l1: shape mismatch");
  }
  return (restored - reference).abs().mean();
}

torch::Tensor structure_l1(const torch::Tensor& restored, const torch::Tensor& reference,
                           const StructureGuidance& guidance) {
  if (restored.sizes() != reference.sizes()) {
    throw std::invalid_argument("structure_l1: shape mismatch");
  }
  return image_l1(guidance.extract(restored), guidance.extract(reference).detach());
}

double total_generator_loss(const LossReport& parts, const LossWeights& w) {
  if (w.lambda1 < 0.0 || w.lambda2 < 0.0 || w.lambda3 < 0.0) {
    throw std::invalid_argument("loss weights must be nonnegative");
  }
  return parts.l_p + w.lambda1 * parts.l_i + w.lambda2 * parts.l_s + w.lambda3 * parts.l_d;
}

std::string loss_csv_header() { return "step,l_p,l_i,l_s,l_d,total"; }

std::string loss_csv_row(const LossReport& r) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "%lld,%.8g,%.8g,%.8g,%.8g,%.8g",
                static_cast<long long>(r.step), r.l_p, r.l_i, r.l_s, r.l_d, r.total);
  return buf;
}

}  // namespace arcnet
