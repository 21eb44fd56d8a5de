#include <doctest.h>

#include <torch/torch.h>

#include <filesystem>
#include <fstream>

#include "arcnet/errors.hpp"
#include "arcnet/network.hpp"
#include "arcnet/rng.hpp"
#include "../support/test_util.hpp"

using namespace arcnet;
using arcnet::testutil::scratch_dir;

namespace {

torch::Tensor random_tensor(std::vector<int64_t> shape, uint64_t seed, double lo,
                            double hi) {
  auto rng = derive_stream(seed, "network-fixture");
  auto t = torch::empty(shape, torch::kFloat32);
  auto* data = t.data_ptr<float>();
  for (int64_t i = 0; i < t.numel(); ++i)
    data[i] = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

GeneratorSpec small_gen_spec() {
  GeneratorSpec s;
  s.depth = 4;
  s.base_width = 8;
  s.max_width = 32;
  return s;
}

DiscriminatorSpec small_disc_spec() {
  DiscriminatorSpec s;
  s.base_width = 8;
  return s;
}

bool modules_equal(const torch::nn::Module& a, const torch::nn::Module& b) {
  auto pa = a.named_parameters();
  auto pb = b.named_parameters();
  if (pa.size() != pb.size()) return false;
  for (const auto& item : pa) {
    if (!pb.contains(item.key())) return false;
    if (!torch::equal(item.value(), *pb.find(item.key()))) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("production generator shape and parameter count") {
  auto gen = build_generator(GeneratorSpec{}, 1);
  const int64_t params = count_trainable_parameters(*gen);
  CHECK(params == 54422659);
  CHECK(params >= 48000000);
  CHECK(params <= 72000000);

  gen->eval();
  torch::NoGradGuard no_grad;
  auto x = torch::rand({1, 6, 256, 256}) * 2 - 1;
  auto y = gen->forward(x);
  CHECK(y.sizes() == torch::IntArrayRef({1, 3, 256, 256}));
  CHECK(y.min().item<double>() >= -1.0);
  CHECK(y.max().item<double>() <= 1.0);
}

TEST_CASE("discriminator patch-map sizes and parameter count") {
  auto d = build_discriminator(DiscriminatorSpec{}, 2);
  CHECK(count_trainable_parameters(*d) == 2766529);
  d->eval();
  torch::NoGradGuard no_grad;
  CHECK(d->forward(torch::rand({1, 3, 256, 256})).sizes() ==
        torch::IntArrayRef({1, 1, 30, 30}));
  CHECK(d->forward(torch::rand({1, 3, 128, 128})).sizes() ==
        torch::IntArrayRef({1, 1, 14, 14}));
  CHECK(d->forward(torch::rand({2, 3, 32, 32})).sizes() ==
        torch::IntArrayRef({2, 1, 2, 2}));
}

TEST_CASE("initialization is seed-deterministic") {
  auto a = build_generator(small_gen_spec(), 7);
  auto b = build_generator(small_gen_spec(), 7);
  auto c = build_generator(small_gen_spec(), 8);
  CHECK(modules_equal(*a, *b));
  CHECK_FALSE(modules_equal(*a, *c));
}

TEST_CASE("initialization statistics") {
  auto gen = build_generator(GeneratorSpec{}, 3);
  for (const auto& named : gen->named_parameters()) {
    const auto& key = named.key();
    const auto& t = named.value();
    if (key.find("bias") != std::string::npos) {
      CHECK(t.abs().max().item<double>() == 0.0);
    } else if (key.find("norm") != std::string::npos) {
      CHECK((t - 1.0).abs().max().item<double>() == 0.0);
    } else if (t.numel() > 100000) {
      const double std = t.std().item<double>();
      CHECK(std > 0.015);
      CHECK(std < 0.025);
      CHECK(t.mean().item<double>() == doctest::Approx(0.0).epsilon(1e-3));
    }
  }
}

TEST_CASE("skip connections carry most of the signal at init") {
  auto gen = build_generator(small_gen_spec(), 5);
  gen->eval();
  torch::NoGradGuard no_grad;
  auto x = random_tensor({1, 6, 32, 32}, 6, -1.0, 1.0);
  auto full = gen->forward(x, false).flatten().to(torch::kFloat64);
  auto skips_only = gen->forward(x, true).flatten().to(torch::kFloat64);
  CHECK(skips_only.std().item<double>() > 0.0);
  const auto fc = full - full.mean();
  const auto sc = skips_only - skips_only.mean();
  const double corr = (fc * sc).sum().item<double>() /
                      (fc.norm().item<double>() * sc.norm().item<double>() + 1e-12);
  CHECK(corr > 0.2);
}

TEST_CASE("gradients reach every trainable parameter") {
  auto gen = build_generator(small_gen_spec(), 9);
  gen->train();
  auto x = random_tensor({2, 6, 32, 32}, 10, -1.0, 1.0);
  gen->forward(x).pow(2).mean().backward();
  for (const auto& named : gen->named_parameters()) {
    REQUIRE(named.value().grad().defined());
    CHECK(torch::isfinite(named.value().grad()).all().item<bool>());
    CHECK(named.value().grad().abs().sum().item<double>() > 0.0);
  }

  auto d = build_discriminator(small_disc_spec(), 11);
  d->train();
  d->forward(random_tensor({2, 3, 32, 32}, 12, 0.0, 1.0)).pow(2).mean().backward();
  for (const auto& named : d->named_parameters()) {
    REQUIRE(named.value().grad().defined());
    CHECK(named.value().grad().abs().sum().item<double>() > 0.0);
  }
}

TEST_CASE("inputs must match channels and divisibility") {
  auto gen = build_generator(small_gen_spec(), 13);
  CHECK_THROWS_AS(gen->forward(torch::rand({1, 3, 32, 32})), std::invalid_argument);
  CHECK_THROWS_AS(gen->forward(torch::rand({1, 6, 24, 24})), std::invalid_argument);
  CHECK_THROWS_AS(gen->forward(torch::rand({6, 32, 32})), std::invalid_argument);
}

TEST_CASE("spec validation") {
  GeneratorSpec s;
  s.depth = 0;
  CHECK_THROWS_AS(validate_spec(s), std::invalid_argument);
  s = {};
  s.depth = 17;
  CHECK_THROWS_AS(validate_spec(s), std::invalid_argument);
  s = {};
  s.base_width = 0;
  CHECK_THROWS_AS(validate_spec(s), std::invalid_argument);
  s = {};
  s.max_width = 32;
  s.base_width = 64;
  CHECK_THROWS_AS(validate_spec(s), std::invalid_argument);
}

TEST_CASE("generator_input maps range and concatenates guidance") {
  auto x = random_tensor({2, 3, 16, 16}, 14, 0.0, 1.0);
  auto plain = generator_input(x, nullptr);
  CHECK(plain.sizes() == torch::IntArrayRef({2, 3, 16, 16}));
  CHECK((plain - (x * 2 - 1)).abs().max().item<double>() == 0.0);

  const HfcGuidance g(3, 1.0);
  auto with_guidance = generator_input(x, &g);
  REQUIRE(with_guidance.sizes() == torch::IntArrayRef({2, 6, 16, 16}));
  using torch::indexing::Slice;
  CHECK((with_guidance.index({Slice(), Slice(0, 3)}) - (x * 2 - 1))
            .abs()
            .max()
            .item<double>() == 0.0);
  CHECK((with_guidance.index({Slice(), Slice(3, 6)}) - g.extract(x))
            .abs()
            .max()
            .item<double>() == 0.0);

  auto chw = generator_input(x[0], &g);
  CHECK(chw.sizes() == torch::IntArrayRef({6, 16, 16}));
  CHECK((chw - with_guidance[0]).abs().max().item<double>() == 0.0);
}

TEST_CASE("checkpoint round trip preserves weights, optimizers, and bookkeeping") {
  const auto dir = scratch_dir("network_ckpt");
  auto bundle = build_bundle(small_gen_spec(), small_disc_spec(), GuidanceSettings{}, 21,
                             2e-4);
  // advance the optimizers so their internal state is nontrivial
  auto x = random_tensor({2, 6, 32, 32}, 22, -1.0, 1.0);
  for (int i = 0; i < 2; ++i) {
    bundle.opt_g->zero_grad();
    bundle.generator->forward(x).pow(2).mean().backward();
    bundle.opt_g->step();
    bundle.opt_dp->zero_grad();
    bundle.d_pixel->forward(random_tensor({2, 3, 32, 32}, 23, 0.0, 1.0))
        .pow(2)
        .mean()
        .backward();
    bundle.opt_dp->step();
  }
  bundle.step = 17;
  bundle.epoch = 3;
  bundle.batch_index = 2;
  bundle.inference_size = 32;
  bundle.permutation = torch::tensor({3, 1, 2, 0}, torch::kInt64);
  bundle.rng_states["shuffle"] = "101 7";
  bundle.rng_states["augment"] = "55 1";
  bundle.config_fingerprint = "00000000deadbeef";

  const auto path = dir + "/ckpt.arcnet";
  save_checkpoint(bundle, path);
  auto loaded = load_checkpoint(path);

  CHECK(loaded.gen_spec.depth == 4);
  CHECK(loaded.gen_spec.base_width == 8);
  CHECK(loaded.disc_spec.base_width == 8);
  CHECK(loaded.guidance.use_guidance);
  CHECK(loaded.guidance.name == "hfc");
  CHECK(loaded.step == 17);
  CHECK(loaded.epoch == 3);
  CHECK(loaded.batch_index == 2);
  CHECK(loaded.inference_size == 32);
  REQUIRE(loaded.permutation.defined());
  CHECK(torch::equal(loaded.permutation, bundle.permutation));
  CHECK(loaded.rng_states.at("shuffle") == "101 7");
  CHECK(loaded.rng_states.at("augment") == "55 1");
  CHECK(loaded.config_fingerprint == "00000000deadbeef");
  CHECK(modules_equal(*loaded.generator, *bundle.generator));
  CHECK(modules_equal(*loaded.d_pixel, *bundle.d_pixel));
  CHECK(modules_equal(*loaded.d_domain, *bundle.d_domain));

  // identical optimizer state: one more identical update must keep the
  // two bundles in lockstep
  for (auto* b : {&bundle, &loaded}) {
    b->opt_g->zero_grad();
    b->generator->forward(x).pow(2).mean().backward();
    b->opt_g->step();
  }
  CHECK(modules_equal(*loaded.generator, *bundle.generator));
}

TEST_CASE("checkpoint loading failure modes") {
  const auto dir = scratch_dir("network_ckpt_bad");
  CHECK_THROWS_AS(load_checkpoint(dir + "/absent.arcnet"), DataError);
  std::ofstream(dir + "/garbage.arcnet") << "this is not a checkpoint";
  CHECK_THROWS_AS(load_checkpoint(dir + "/garbage.arcnet"), DataError);
}

TEST_CASE("restore maps to [0,1] at the bundle's inference size") {
  auto bundle = build_bundle(small_gen_spec(), small_disc_spec(), GuidanceSettings{}, 31,
                             2e-4);
  bundle.inference_size = 32;
  bundle.generator->train();  // restore must not leave eval mode behind

  const FundusImage degraded{random_tensor({3, 20, 24}, 32, 0.0, 1.0), std::nullopt};
  auto out1 = restore(bundle, degraded);
  CHECK(out1.pixels.sizes() == torch::IntArrayRef({3, 32, 32}));
  CHECK(out1.pixels.min().item<double>() >= 0.0);
  CHECK(out1.pixels.max().item<double>() <= 1.0);
  CHECK(bundle.generator->is_training());

  auto out2 = restore(bundle, degraded);
  CHECK(torch::equal(out1.pixels, out2.pixels));

  // size-matched input skips the resize but still restores deterministically
  const FundusImage sized{random_tensor({3, 32, 32}, 33, 0.0, 1.0), std::nullopt};
  CHECK(restore(bundle, sized).pixels.sizes() == torch::IntArrayRef({3, 32, 32}));
}

TEST_CASE("guidance-free bundles restore from 3-channel inputs") {
  GuidanceSettings g;
  g.use_guidance = false;
  auto spec = small_gen_spec();
  spec.in_channels = 3;
  auto bundle = build_bundle(spec, small_disc_spec(), g, 41, 2e-4);
  bundle.inference_size = 32;
  const FundusImage degraded{random_tensor({3, 32, 32}, 42, 0.0, 1.0), std::nullopt};
  CHECK(restore(bundle, degraded).pixels.sizes() == torch::IntArrayRef({3, 32, 32}));
}

}  // TEST_SUITE
