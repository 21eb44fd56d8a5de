#pragma once

#include <torch/torch.h>

#include <optional>
#include <string>

namespace arcnet {

// RGB fundus raster. `pixels` is a float32 {3, H, W} tensor with values in
// [0, 1] (channel order R, G, B). `mask`, when present, is a bool {H, W}
// tensor marking the circular field of view; absent means all-true.
struct FundusImage {
  torch::Tensor pixels;
  std::optional<torch::Tensor> mask;

  int64_t height() const { return pixels.size(1); }
  int64_t width() const { return pixels.size(2); }
};

// Loads an 8-bit 3-channel PNG or JPEG. Byte value v maps to v/255.
// Throws DataError for unreadable files or non-3-channel content.
FundusImage load_image(const std::string& path);

// Writes an 8-bit PNG or JPEG (chosen by extension). Values are quantized
// with round-half-up; a PNG round trip differs by at most 1/255 per channel.
void save_image(const FundusImage& img, const std::string& path);

// Field-of-view estimate: a pixel is inside iff the channel maximum reaches
// `threshold`, after a morphological closing with a 5-pixel-radius disk.
// `threshold` must lie in (0, 1). The input is not modified.
torch::Tensor estimate_fov_mask(const FundusImage& img, double threshold);

}  // namespace arcnet
