#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>

#include "arcnet/filters.hpp"
#include "arcnet/image.hpp"

namespace arcnet {

// Parameters of the cataract-like simulation: the clear image is smoothed
// and attenuated by alpha, and a blurred radial panel scaled by beta adds
// haze proportional to the headroom below the per-channel intensity peak.
struct DegradationParams {
  double alpha = 0.8;   // attenuation weight of the clear image, in (0, 1]
  double beta = 0.4;    // weight of the cataract haze, in [0, 1]
  int64_t center_row = 0;  // panel center (a, b)
  int64_t center_col = 0;
  int r_b = 5;          // Gaussian for smoothing the clear image
  double sigma_b = 2.0;
  int r_l = 30;         // Gaussian for smoothing the panel
  double sigma_l = 10.0;
  uint64_t seed = 0;
};

// Sampling ranges for sample_params. sigma is tied to the sampled radius
// as (r+1)/3; the panel center is uniform in the central box covering
// `center_box` of each dimension.
struct ParamRanges {
  double alpha_lo = 0.6, alpha_hi = 0.95;
  double beta_lo = 0.2, beta_hi = 0.6;
  int r_b_lo = 3, r_b_hi = 11;
  int r_l_lo = 20, r_l_hi = 40;
  double center_box = 0.5;
};

// Radial distance panel, normalized so the maximum over the raster is 1
// (a single-pixel raster stays 0). The value at the center is exactly 0.
struct CataractPanel {
  torch::Tensor values;  // float32 {H,W} in [0,1]
};

void validate_params(const DegradationParams& p, int64_t height, int64_t width);

CataractPanel build_panel(int64_t height, int64_t width, int64_t center_row,
                          int64_t center_col);

// Applies the per-channel degradation given an already-blurred panel
// ({H,W}); exposed separately so the arithmetic is testable in isolation.
FundusImage simulate_with_panel(const FundusImage& clear,
                                const torch::Tensor& blurred_panel,
                                const DegradationParams& p);

// Full simulation: panel construction, both Gaussian filters, per-channel
// combination, clamp to [0,1]. The per-channel peak is taken inside the
// FOV mask when one is present. The input image is not modified.
FundusImage simulate_cataract(const FundusImage& clear, const DegradationParams& p);

// Deterministic parameter draw for a given seed.
DegradationParams sample_params(int64_t height, int64_t width, uint64_t seed,
                                const ParamRanges& ranges = {});

std::string params_to_json(const DegradationParams& p);
DegradationParams params_from_json(const std::string& text);
ParamRanges ranges_from_json_file(const std::string& path);

}  // namespace arcnet
