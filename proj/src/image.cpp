#include "arcnet/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <cmath>
#include <filesystem>

#include "arcnet/errors.hpp"

namespace arcnet {

FundusImage load_image(const std::string& path) {
  cv::Mat mat = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (mat.empty()) {
    throw DataError("cannot read image: " + path);
  }
  if (mat.channels() != 3) {
    throw DataError("expected a 3-channel image, got " +
                    std::to_string(mat.channels()) + " channel(s): " + path);
  }
  if (mat.depth() != CV_8U) {
    throw DataError("expected 8-bit pixel data: " + path);
  }

  const int h = mat.rows, w = mat.cols;
  auto pixels = torch::empty({3, h, w}, torch::kFloat32);
  auto acc = pixels.accessor<float, 3>();
  for (int y = 0; y < h; ++y) {
    const cv::Vec3b* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < w; ++x) {
      // OpenCV stores BGR
      acc[0][y][x] = row[x][2] / 255.0f;
      acc[1][y][x] = row[x][1] / 255.0f;
      acc[2][y][x] = row[x][0] / 255.0f;
    }
  }
  return FundusImage{pixels, std::nullopt};
}

void save_image(const FundusImage& img, const std::string& path) {
  TORCH_CHECK(img.pixels.dim() == 3 && img.pixels.size(0) == 3,
              "save_image expects a {3,H,W} tensor");
  auto t = img.pixels.to(torch::kFloat32).contiguous();
  const int h = static_cast<int>(img.height());
  const int w = static_cast<int>(img.width());
  cv::Mat mat(h, w, CV_8UC3);
  auto acc = t.accessor<float, 3>();
  for (int y = 0; y < h; ++y) {
    cv::Vec3b* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::lround(std::clamp(acc[c][y][x], 0.0f, 1.0f) * 255.0);
        row[x][2 - c] = static_cast<unsigned char>(v);
      }
    }
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path, mat);
  } catch (const cv::Exception& e) {
    throw DataError("cannot write image " + path + ": " + e.what());
  }
  if (!ok) {
    throw DataError("cannot write image: " + path);
  }
}

namespace {

// Binary dilation/erosion by a disk, done as a float convolution against the
// disk footprint. Outside the image counts as false.
torch::Tensor disk_kernel(int radius) {
  const int side = 2 * radius + 1;
  auto k = torch::zeros({side, side}, torch::kFloat32);
  auto acc = k.accessor<float, 2>();
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const int dy = y - radius, dx = x - radius;
      if (dy * dy + dx * dx <= radius * radius) acc[y][x] = 1.0f;
    }
  }
  return k;
}

torch::Tensor binary_conv(const torch::Tensor& mask01, const torch::Tensor& disk) {
  namespace F = torch::nn::functional;
  const int64_t pad = (disk.size(0) - 1) / 2;
  auto x = mask01.unsqueeze(0).unsqueeze(0);
  auto w = disk.unsqueeze(0).unsqueeze(0);
  auto y = F::conv2d(x, w, F::Conv2dFuncOptions().padding(pad));
  return y.squeeze(0).squeeze(0);
}

}  // namespace

torch::Tensor estimate_fov_mask(const FundusImage& img, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("fov threshold must lie in (0,1)");
  }
  auto bright = std::get<0>(img.pixels.max(0)) >= threshold;
  auto disk = disk_kernel(5);
  const double footprint = disk.sum().item<double>();
  // closing = dilation then erosion
  auto dil = binary_conv(bright.to(torch::kFloat32), disk) > 0.5;
  auto ero = binary_conv(dil.to(torch::kFloat32), disk) > (footprint - 0.5);
  return ero;
}

}  // namespace arcnet
