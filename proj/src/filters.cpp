#include "arcnet/filters.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace F = torch::nn::functional;

namespace arcnet {

torch::Tensor gaussian_kernel_1d(int radius, double sigma) {
  if (radius < 0) throw std::invalid_argument("gaussian radius must be >= 0");
  if (radius > 0 && !(sigma > 0.0)) {
    throw std::invalid_argument("gaussian sigma must be > 0");
  }
  const int side = 2 * radius + 1;
  auto k = torch::empty({side}, torch::kFloat64);
  auto acc = k.accessor<double, 1>();
  double sum = 0.0;
  for (int i = 0; i < side; ++i) {
    const double d = i - radius;
    acc[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    sum += acc[i];
  }
  return k / sum;
}

torch::Tensor gaussian_kernel(int radius, double sigma) {
  auto k1 = gaussian_kernel_1d(radius, sigma);
  return torch::outer(k1, k1);
}

torch::Tensor gaussian_blur(const torch::Tensor& x, int radius, double sigma) {
  if (radius == 0) {
    if (!(sigma > 0.0) && radius > 0) throw std::invalid_argument("sigma must be > 0");
    return x;
  }
  const bool batched = x.dim() == 4;
  TORCH_CHECK(batched || x.dim() == 3, "gaussian_blur expects {C,H,W} or {N,C,H,W}");
  auto x4 = batched ? x : x.unsqueeze(0);
  const int64_t c = x4.size(1);
  const int64_t h = x4.size(2), w = x4.size(3);
  if (radius >= h || radius >= w) {
    throw std::invalid_argument("gaussian radius " + std::to_string(radius) +
                                " too large for image " + std::to_string(h) + "x" +
                                std::to_string(w));
  }
  auto k1 = gaussian_kernel_1d(radius, sigma).to(x.dtype());
  const int64_t side = k1.size(0);
  auto w_row = k1.view({1, 1, 1, side}).expand({c, 1, 1, side}).contiguous();
  auto w_col = k1.view({1, 1, side, 1}).expand({c, 1, side, 1}).contiguous();

  auto y = F::pad(x4, F::PadFuncOptions({radius, radius, 0, 0}).mode(torch::kReflect));
  y = F::conv2d(y, w_row, F::Conv2dFuncOptions().groups(c));
  y = F::pad(y, F::PadFuncOptions({0, 0, radius, radius}).mode(torch::kReflect));
  y = F::conv2d(y, w_col, F::Conv2dFuncOptions().groups(c));
  return batched ? y : y.squeeze(0);
}

}  // namespace arcnet
