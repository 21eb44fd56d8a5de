#pragma once

#include <torch/torch.h>

namespace arcnet {

// Normalized 1-D Gaussian, length 2r+1, double precision. r = 0 gives [1].
torch::Tensor gaussian_kernel_1d(int radius, double sigma);

// Normalized 2-D Gaussian of side 2r+1 with entries proportional to
// exp(-(x^2+y^2)/(2 sigma^2)); entries sum to 1. r = 0 gives [[1]].
// sigma must be positive whenever r > 0.
torch::Tensor gaussian_kernel(int radius, double sigma);

// Separable Gaussian blur with reflect padding. Accepts {C,H,W} or
// {N,C,H,W}, preserves dtype and shape, and is differentiable. r = 0
// returns the input unchanged. Spatial dims must exceed the radius.
torch::Tensor gaussian_blur(const torch::Tensor& x, int radius, double sigma);

}  // namespace arcnet
