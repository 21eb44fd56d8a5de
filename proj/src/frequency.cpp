#include "arcnet/frequency.hpp"

#include <stdexcept>

#include "arcnet/errors.hpp"
#include "arcnet/filters.hpp"

namespace arcnet {

torch::Tensor high_frequency(const torch::Tensor& x, int r_p, double sigma_p) {
  if (r_p < 1) throw std::invalid_argument("r_p must be >= 1");
  return x - gaussian_blur(x, r_p, sigma_p);
}

FrequencyPair decompose(const FundusImage& img, int r_p, double sigma_p) {
  if (r_p < 1) throw std::invalid_argument("r_p must be >= 1");
  auto lfc = gaussian_blur(img.pixels, r_p, sigma_p);
  return FrequencyPair{lfc, img.pixels - lfc, r_p, sigma_p};
}

HfcGuidance::HfcGuidance(int r_p, double sigma_p) : r_p_(r_p), sigma_p_(sigma_p) {
  if (r_p < 1) throw std::invalid_argument("r_p must be >= 1");
  if (!(sigma_p > 0.0)) throw std::invalid_argument("sigma_p must be > 0");
}

torch::Tensor HfcGuidance::extract(const torch::Tensor& image) const {
  return high_frequency(image, r_p_, sigma_p_);
}

std::shared_ptr<StructureGuidance> make_guidance(const std::string& name, int r_p,
                                                 double sigma_p) {
  if (name == "hfc") return std::make_shared<HfcGuidance>(r_p, sigma_p);
  throw ConfigError("unknown structure guidance: " + name);
}

}  // namespace arcnet
