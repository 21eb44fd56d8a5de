#pragma once

#include <torch/torch.h>

#include <memory>
#include <string>

#include "arcnet/image.hpp"

namespace arcnet {

// Additive split of an image into a Gaussian low-pass base and the signed
// residual detail: lfc + hfc reconstructs the source exactly.
struct FrequencyPair {
  torch::Tensor lfc;  // {3,H,W} in [0,1]
  torch::Tensor hfc;  // {3,H,W} signed, in [-1,1]
  int r_p = 26;
  double sigma_p = 9.0;
};

// Tensor form used in the training loop; accepts {C,H,W} or {N,C,H,W} in
// [0,1] and returns the high-frequency residual x - blur(x). Differentiable.
torch::Tensor high_frequency(const torch::Tensor& x, int r_p, double sigma_p);

// r_p must be >= 1.
FrequencyPair decompose(const FundusImage& img, int r_p = 26, double sigma_p = 9.0);

// Seam for the structure guidance fed to the generator and compared by the
// structure loss. Implementations must be pure and differentiable so the
// loss can backpropagate through guidance of generated images.
class StructureGuidance {
 public:
  virtual ~StructureGuidance() = default;
  // {C,H,W} or {N,C,H,W} image in [0,1] -> guidance raster of equal shape.
  virtual torch::Tensor extract(const torch::Tensor& image) const = 0;
  virtual std::string name() const = 0;
};

class HfcGuidance final : public StructureGuidance {
 public:
  explicit HfcGuidance(int r_p = 26, double sigma_p = 9.0);
  torch::Tensor extract(const torch::Tensor& image) const override;
  std::string name() const override { return "hfc"; }
  int r_p() const { return r_p_; }
  double sigma_p() const { return sigma_p_; }

 private:
  int r_p_;
  double sigma_p_;
};

// Factory keyed by guidance name; unknown names are a configuration error.
std::shared_ptr<StructureGuidance> make_guidance(const std::string& name,
                                                 int r_p = 26,
                                                 double sigma_p = 9.0);

}  // namespace arcnet
