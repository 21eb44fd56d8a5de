#include <doctest.h>

#include <torch/torch.h>

#include <cmath>

#include "arcnet/errors.hpp"
#include "arcnet/image.hpp"
#include "arcnet/rng.hpp"
#include "../support/test_util.hpp"

using namespace arcnet;
using arcnet::testutil::scratch_dir;

namespace {

torch::Tensor random_image(int64_t h, int64_t w, uint64_t seed) {
  auto rng = derive_stream(seed, "image-fixture");
  auto t = torch::empty({3, h, w}, torch::kFloat32);
  auto* data = t.data_ptr<float>();
  for (int64_t i = 0; i < t.numel(); ++i) data[i] = static_cast<float>(rng.uniform());
  return t;
}

}  // namespace

TEST_SUITE("image") {

TEST_CASE("png round trip stays within one quantization step") {
  const auto dir = scratch_dir("image_roundtrip");
  const FundusImage img{random_image(21, 17, 1), std::nullopt};
  save_image(img, dir + "/a.png");
  const FundusImage back = load_image(dir + "/a.png");
  REQUIRE(back.pixels.sizes() == img.pixels.sizes());
  CHECK((back.pixels - img.pixels).abs().max().item<double>() <= 1.0 / 255.0 + 1e-7);
  CHECK_FALSE(back.mask.has_value());
}

TEST_CASE("quantization endpoints and midpoint") {
  const auto dir = scratch_dir("image_quant");
  auto t = torch::zeros({3, 1, 3}, torch::kFloat32);
  t.index_put_({torch::indexing::Slice(), 0, 1}, 0.5);
  t.index_put_({torch::indexing::Slice(), 0, 2}, 1.0);
  save_image(FundusImage{t, std::nullopt}, dir + "/q.png");
  const auto back = load_image(dir + "/q.png").pixels;
  CHECK(back[0][0][0].item<double>() == 0.0);
  // round-half-up: 0.5*255 = 127.5 -> byte 128 (stored as float32)
  CHECK(back[0][0][1].item<double>() ==
        doctest::Approx(static_cast<float>(128.0 / 255.0)).epsilon(1e-12));
  CHECK(back[0][0][2].item<double>() == 1.0);
}

TEST_CASE("saved bytes reload identically") {
  const auto dir = scratch_dir("image_idempotent");
  const FundusImage img{random_image(9, 9, 2), std::nullopt};
  save_image(img, dir + "/a.png");
  const auto once = load_image(dir + "/a.png");
  save_image(once, dir + "/b.png");
  const auto twice = load_image(dir + "/b.png");
  CHECK(torch::equal(once.pixels, twice.pixels));
}

TEST_CASE("unreadable and unwritable paths raise DataError") {
  CHECK_THROWS_AS(load_image("definitely_missing_file.png"), DataError);
  const FundusImage img{torch::zeros({3, 4, 4}), std::nullopt};
  CHECK_THROWS_AS(save_image(img, "/nonexistent_dir_zz/x.png"), DataError);
}

TEST_CASE("fov mask finds a bright disk") {
  const int64_t n = 128;
  auto rows = torch::arange(n, torch::kFloat32);
  auto rr = rows.unsqueeze(1).expand({n, n});
  auto cc = rows.unsqueeze(0).expand({n, n});
  const double c0 = (n - 1) / 2.0;
  const double radius = 40.0;
  auto inside = (((rr - c0).pow(2) + (cc - c0).pow(2)).sqrt() <= radius);
  auto img = torch::where(inside.unsqueeze(0), 0.8, 0.0).expand({3, n, n});

  auto mask = estimate_fov_mask(FundusImage{img.clone(), std::nullopt}, 0.3);
  REQUIRE(mask.sizes() == torch::IntArrayRef({n, n}));
  CHECK(mask.dtype() == torch::kBool);
  CHECK(mask[64][64].item<bool>());
  CHECK_FALSE(mask[0][0].item<bool>());

  const double area = mask.to(torch::kFloat64).sum().item<double>();
  const double expected = M_PI * radius * radius;
  CHECK(std::abs(area - expected) / expected < 0.02);
}

TEST_CASE("fov threshold bounds are enforced") {
  const FundusImage img{torch::zeros({3, 8, 8}), std::nullopt};
  CHECK_THROWS_AS(estimate_fov_mask(img, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(estimate_fov_mask(img, 1.0), std::invalid_argument);
}

}  // TEST_SUITE
