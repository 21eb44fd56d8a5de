#include "arcnet/degradation.hpp"

#include <fstream>

#include <json.hpp>

#include "arcnet/errors.hpp"
#include "arcnet/rng.hpp"

using nlohmann::json;

namespace arcnet {

void validate_params(const DegradationParams& p, int64_t height, int64_t width) {
  if (!(p.alpha > 0.0 && p.alpha <= 1.0)) {
    throw std::invalid_argument("alpha must lie in (0,1]");
  }
  if (!(p.beta >= 0.0 && p.beta <= 1.0)) {
    throw std::invalid_argument("beta must lie in [0,1]");
  }
  if (p.r_b < 0 || p.r_l < 0) {
    throw std::invalid_argument("filter radii must be >= 0");
  }
  if (p.r_b > 0 && !(p.sigma_b > 0.0)) {
    throw std::invalid_argument("sigma_b must be > 0 when r_b > 0");
  }
  if (p.r_l > 0 && !(p.sigma_l > 0.0)) {
    throw std::invalid_argument("sigma_l must be > 0 when r_l > 0");
  }
  if (p.center_row < 0 || p.center_row >= height || p.center_col < 0 ||
      p.center_col >= width) {
    throw std::invalid_argument("panel center outside image bounds");
  }
}

CataractPanel build_panel(int64_t height, int64_t width, int64_t center_row,
                          int64_t center_col) {
  auto rows = torch::arange(height, torch::kFloat32) - static_cast<double>(center_row);
  auto cols = torch::arange(width, torch::kFloat32) - static_cast<double>(center_col);
  auto dist = torch::sqrt(rows.square().unsqueeze(1) + cols.square().unsqueeze(0));
  const double max_dist = dist.max().item<double>();
  if (max_dist > 0.0) dist = dist / max_dist;
  return CataractPanel{dist};
}

FundusImage simulate_with_panel(const FundusImage& clear,
                                const torch::Tensor& blurred_panel,
                                const DegradationParams& p) {
  const auto& s = clear.pixels;
  auto smoothed = gaussian_blur(s, p.r_b, p.sigma_b);

  // per-channel peak L_c, restricted to the FOV when a mask is present
  torch::Tensor peak;
  if (clear.mask.has_value() && clear.mask->any().item<bool>()) {
    auto flat = s.flatten(1);
    auto sel = clear.mask->flatten();
    peak = flat.index({torch::indexing::Slice(), sel}).amax(1).view({3, 1, 1});
  } else {
    peak = s.amax({1, 2}, /*keepdim=*/true);
  }

  auto out = p.alpha * smoothed + p.beta * blurred_panel.unsqueeze(0) * (peak - s);
  return FundusImage{out.clamp(0.0, 1.0), clear.mask};
}

FundusImage simulate_cataract(const FundusImage& clear, const DegradationParams& p) {
  validate_params(p, clear.height(), clear.width());
  auto panel = build_panel(clear.height(), clear.width(), p.center_row, p.center_col);
  auto blurred = gaussian_blur(panel.values.unsqueeze(0), p.r_l, p.sigma_l).squeeze(0);
  return simulate_with_panel(clear, blurred, p);
}

DegradationParams sample_params(int64_t height, int64_t width, uint64_t seed,
                                const ParamRanges& ranges) {
  RngStream rng = derive_stream(seed, "degradation-params");
  DegradationParams p;
  p.alpha = rng.uniform(ranges.alpha_lo, ranges.alpha_hi);
  p.beta = rng.uniform(ranges.beta_lo, ranges.beta_hi);
  const auto box = [&](int64_t extent) -> std::pair<int64_t, int64_t> {
    const auto span = static_cast<int64_t>(static_cast<double>(extent) * ranges.center_box);
    const int64_t lo = (extent - span) / 2;
    const int64_t hi = std::max(lo, lo + span - 1);
    return {lo, std::min(hi, extent - 1)};
  };
  const auto [row_lo, row_hi] = box(height);
  const auto [col_lo, col_hi] = box(width);
  p.center_row = rng.uniform_int(row_lo, row_hi);
  p.center_col = rng.uniform_int(col_lo, col_hi);
  p.r_b = static_cast<int>(rng.uniform_int(ranges.r_b_lo, ranges.r_b_hi));
  p.sigma_b = (p.r_b + 1) / 3.0;
  p.r_l = static_cast<int>(rng.uniform_int(ranges.r_l_lo, ranges.r_l_hi));
  p.sigma_l = (p.r_l + 1) / 3.0;
  p.seed = seed;
  return p;
}

std::string params_to_json(const DegradationParams& p) {
  json j{{"alpha", p.alpha},
         {"beta", p.beta},
         {"center_row", p.center_row},
         {"center_col", p.center_col},
         {"r_b", p.r_b},
         {"sigma_b", p.sigma_b},
         {"r_l", p.r_l},
         {"sigma_l", p.sigma_l},
         {"seed", p.seed}};
  return j.dump(2);
}

DegradationParams params_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed degradation params: ") + e.what());
  }
  DegradationParams p;
  p.alpha = j.value("alpha", p.alpha);
  p.beta = j.value("beta", p.beta);
  p.center_row = j.value("center_row", p.center_row);
  p.center_col = j.value("center_col", p.center_col);
  p.r_b = j.value("r_b", p.r_b);
  p.sigma_b = j.value("sigma_b", p.sigma_b);
  p.r_l = j.value("r_l", p.r_l);
  p.sigma_l = j.value("sigma_l", p.sigma_l);
  p.seed = j.value("seed", p.seed);
  return p;
}

ParamRanges ranges_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open params file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed params file " + path + ": " + e.what());
  }
  ParamRanges r;
  r.alpha_lo = j.value("alpha_lo", r.alpha_lo);
  r.alpha_hi = j.value("alpha_hi", r.alpha_hi);
  r.beta_lo = j.value("beta_lo", r.beta_lo);
  r.beta_hi = j.value("beta_hi", r.beta_hi);
  r.r_b_lo = j.value("r_b_lo", r.r_b_lo);
  r.r_b_hi = j.value("r_b_hi", r.r_b_hi);
  r.r_l_lo = j.value("r_l_lo", r.r_l_lo);
  r.r_l_hi = j.value("r_l_hi", r.r_l_hi);
  r.center_box = j.value("center_box", r.center_box);
  if (r.alpha_lo > r.alpha_hi || r.beta_lo > r.beta_hi || r.r_b_lo > r.r_b_hi ||
      r.r_l_lo > r.r_l_hi) {
    throw ConfigError("degradation ranges must satisfy lo <= hi");
  }
  return r;
}

}  // namespace arcnet
