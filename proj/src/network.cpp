#include "arcnet/network.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "arcnet/errors.hpp"
#include "arcnet/rng.hpp"

using nlohmann::json;

namespace arcnet {

namespace {

constexpr const char* kFormatTag = "arcnet-ckpt-v1";

int64_t width_at(const GeneratorSpec& spec, int level) {
  return std::min(spec.base_width << level, spec.max_width);
}

// N(0, 0.02) convolution weights, unit normalization scales, zero biases;
// the draw order follows registration order so a seed pins every weight.
void init_weights(torch::nn::Module& m, uint64_t seed) {
  auto gen = at::detail::createCPUGenerator(seed);
  torch::NoGradGuard no_grad;
  for (auto& named : m.named_parameters()) {
    auto& t = named.value();
    const bool is_norm = named.key().find("norm") != std::string::npos;
    const bool is_bias = named.key().find("bias") != std::string::npos;
    if (is_bias) {
      t.zero_();
    } else if (is_norm) {
      t.fill_(1.0);
    } else {
      t.normal_(0.0, 0.02, gen);
    }
  }
}

std::shared_ptr<torch::optim::Adam> make_adam(std::vector<torch::Tensor> params,
                                              double lr) {
  return std::make_shared<torch::optim::Adam>(
      std::move(params), torch::optim::AdamOptions(lr).betas({0.5, 0.999}));
}

json spec_to_json(const GeneratorSpec& s) {
  return json{{"in_channels", s.in_channels},
              {"out_channels", s.out_channels},
              {"depth", s.depth},
              {"base_width", s.base_width},
              {"max_width", s.max_width}};
}

GeneratorSpec gen_spec_from_json(const json& j) {
  GeneratorSpec s;
  s.in_channels = j.at("in_channels").get<int64_t>();
  s.out_channels = j.at("out_channels").get<int64_t>();
  s.depth = j.at("depth").get<int>();
  s.base_width = j.at("base_width").get<int64_t>();
  s.max_width = j.at("max_width").get<int64_t>();
  return s;
}

}  // namespace

void validate_spec(const GeneratorSpec& spec) {
  if (spec.in_channels < 1 || spec.out_channels < 1) {
    throw std::invalid_argument("generator channels must be positive");
  }
  if (spec.depth < 1 || spec.depth > 16) {
    throw std::invalid_argument("generator depth must lie in [1, 16]");
  }
  if (spec.base_width < 1 || spec.max_width < spec.base_width) {
    throw std::invalid_argument("generator widths must satisfy 1 <= base <= max");
  }
}

UnetGeneratorImpl::UnetGeneratorImpl(const GeneratorSpec& spec) : spec_(spec) {
  validate_spec(spec);
  const int d = spec.depth;
  for (int i = 0; i < d; ++i) {
    const int64_t in = (i == 0) ? spec.in_channels : width_at(spec, i - 1);
    const int64_t out = width_at(spec, i);
    down_convs_.push_back(register_module(
        "down_" + std::to_string(i),
        torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 4).stride(2).padding(1))));
    if (i + 1 < d) {
      down_norms_.push_back(register_module("down_norm_" + std::to_string(i),
                                            torch::nn::BatchNorm2d(out)));
    }
  }
  for (int j = 0; j + 1 < d; ++j) {
    const int64_t in = (j == 0) ? width_at(spec, d - 1) : 2 * width_at(spec, d - 1 - j);
    const int64_t out = width_at(spec, d - 2 - j);
    up_convs_.push_back(register_module(
        "up_" + std::to_string(j),
        torch::nn::ConvTranspose2d(
            torch::nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1))));
    up_norms_.push_back(
        register_module("up_norm_" + std::to_string(j), torch::nn::BatchNorm2d(out)));
  }
  const int64_t out_in = (d == 1) ? width_at(spec, 0) : 2 * width_at(spec, 0);
  up_convs_.push_back(register_module(
      "up_" + std::to_string(d - 1),
      torch::nn::ConvTranspose2d(
          torch::nn::ConvTranspose2dOptions(out_in, spec.out_channels, 4)
              .stride(2)
              .padding(1))));
}

torch::Tensor UnetGeneratorImpl::forward(const torch::Tensor& x, bool zero_bottleneck) {
  if (x.dim() != 4 || x.size(1) != spec_.in_channels) {
    throw std::invalid_argument("generator expects {N," +
                                std::to_string(spec_.in_channels) + ",H,W} input");
  }
  const int64_t div = int64_t{1} << spec_.depth;
  if (x.size(2) % div != 0 || x.size(3) % div != 0 || x.size(2) == 0 || x.size(3) == 0) {
    throw std::invalid_argument("generator input spatial size must be divisible by 2^" +
                                std::to_string(spec_.depth));
  }
  const int d = spec_.depth;
  std::vector<torch::Tensor> feats;
  feats.reserve(d);
  auto h = x;
  for (int i = 0; i < d; ++i) {
    h = down_convs_[i]->forward(h);
    h = torch::leaky_relu(h, 0.2);
    if (i + 1 < d) h = down_norms_[i]->forward(h);
    feats.push_back(h);
  }
  if (zero_bottleneck) h = torch::zeros_like(h);
  for (int j = 0; j + 1 < d; ++j) {
    h = up_convs_[j]->forward(h);
    h = torch::relu(h);
    h = up_norms_[j]->forward(h);
    h = torch::cat({h, feats[d - 2 - j]}, 1);
  }
  h = torch::relu(h);
  h = up_convs_[d - 1]->forward(h);
  return torch::tanh(h);
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(const DiscriminatorSpec& spec) {
  if (spec.in_channels < 1 || spec.base_width < 1) {
    throw std::invalid_argument("discriminator spec fields must be positive");
  }
  const int64_t w = spec.base_width;
  const int64_t chans[5] = {w, w * 2, w * 4, w * 8, 1};
  const int strides[5] = {2, 2, 2, 1, 1};
  int64_t in = spec.in_channels;
  for (int i = 0; i < 5; ++i) {
    convs_.push_back(register_module(
        "conv_" + std::to_string(i),
        torch::nn::Conv2d(
            torch::nn::Conv2dOptions(in, chans[i], 4).stride(strides[i]).padding(1))));
    in = chans[i];
  }
  for (int i = 1; i <= 3; ++i) {
    norms_.push_back(register_module("norm_" + std::to_string(i),
                                     torch::nn::BatchNorm2d(chans[i])));
  }
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& x) {
  auto h = x;
  for (int i = 0; i < 5; ++i) {
    h = convs_[i]->forward(h);
    if (i >= 1 && i <= 3) h = norms_[i - 1]->forward(h);
    if (i < 4) h = torch::leaky_relu(h, 0.2);
  }
  return h;
}

UnetGenerator build_generator(const GeneratorSpec& spec, uint64_t seed) {
  UnetGenerator g(spec);
  init_weights(*g, seed);
  return g;
}

PatchDiscriminator build_discriminator(const DiscriminatorSpec& spec, uint64_t seed) {
  PatchDiscriminator d(spec);
  init_weights(*d, seed);
  return d;
}

ModelBundle build_bundle(const GeneratorSpec& gen_spec, const DiscriminatorSpec& disc_spec,
                         const GuidanceSettings& guidance, uint64_t seed, double lr) {
  ModelBundle b;
  b.gen_spec = gen_spec;
  b.disc_spec = disc_spec;
  b.guidance = guidance;
  b.generator = build_generator(gen_spec, derive_seed(seed, "init-generator"));
  b.d_pixel = build_discriminator(disc_spec, derive_seed(seed, "init-d-pixel"));
  b.d_domain = build_discriminator(disc_spec, derive_seed(seed, "init-d-domain"));
  b.opt_g = make_adam(b.generator->parameters(), lr);
  b.opt_dp = make_adam(b.d_pixel->parameters(), lr);
  b.opt_dd = make_adam(b.d_domain->parameters(), lr);
  return b;
}

int64_t count_trainable_parameters(const torch::nn::Module& m) {
  int64_t n = 0;
  for (const auto& p : m.parameters()) {
    if (p.requires_grad()) n += p.numel();
  }
  return n;
}

torch::Tensor generator_input(const torch::Tensor& batch01,
                              const StructureGuidance* guidance) {
  if (batch01.dim() != 3 && batch01.dim() != 4) {
    throw std::invalid_argument("generator_input expects {C,H,W} or {N,C,H,W}");
  }
  auto x = batch01 * 2.0 - 1.0;
  if (guidance == nullptr) return x;
  return torch::cat({x, guidance->extract(batch01)},
                    static_cast<int64_t>(batch01.dim()) - 3);
}

void save_checkpoint(const ModelBundle& bundle, const std::string& path) {
  json meta{{"format", kFormatTag},
            {"step", bundle.step},
            {"epoch", bundle.epoch},
            {"batch_index", bundle.batch_index},
            {"has_permutation", bundle.permutation.defined()},
            {"config_fingerprint", bundle.config_fingerprint},
            {"inference_size", bundle.inference_size},
            {"generator", spec_to_json(bundle.gen_spec)},
            {"discriminator",
             {{"in_channels", bundle.disc_spec.in_channels},
              {"base_width", bundle.disc_spec.base_width}}},
            {"guidance",
             {{"use_guidance", bundle.guidance.use_guidance},
              {"name", bundle.guidance.name},
              {"r_p", bundle.guidance.r_p},
              {"sigma_p", bundle.guidance.sigma_p}}},
            {"rng_states", bundle.rng_states}};

  torch::serialize::OutputArchive root;
  root.write("format", torch::IValue(std::string(kFormatTag)));
  root.write("meta", torch::IValue(meta.dump()));
  if (bundle.permutation.defined()) root.write("permutation", bundle.permutation);

  const auto write_module = [&root](const char* key, const torch::nn::Module& m) {
    torch::serialize::OutputArchive a;
    m.save(a);
    root.write(key, a);
  };
  write_module("generator", *bundle.generator);
  write_module("d_pixel", *bundle.d_pixel);
  write_module("d_domain", *bundle.d_domain);

  const auto write_opt = [&root](const char* key, const torch::optim::Adam& opt) {
    torch::serialize::OutputArchive a;
    opt.save(a);
    root.write(key, a);
  };
  write_opt("opt_g", *bundle.opt_g);
  write_opt("opt_dp", *bundle.opt_dp);
  write_opt("opt_dd", *bundle.opt_dd);

  try {
    root.save_to(path);
  } catch (const c10::Error& e) {
    throw DataError("cannot write checkpoint " + path + ": " + e.what_without_backtrace());
  }
}

ModelBundle load_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw DataError("checkpoint not found: " + path);
  }
  torch::serialize::InputArchive root;
  try {
    root.load_from(path);
  } catch (const c10::Error& e) {
    throw DataError("cannot read checkpoint " + path + ": " + e.what_without_backtrace());
  }

  torch::IValue format, meta_text;
  if (!root.try_read("format", format) ||
      format.toStringRef() != std::string(kFormatTag)) {
    throw DataError("not an " + std::string(kFormatTag) + " checkpoint: " + path);
  }
  root.read("meta", meta_text);
  json meta;
  try {
    meta = json::parse(meta_text.toStringRef());
  } catch (const json::exception& e) {
    throw DataError("corrupt checkpoint metadata in " + path + ": " + e.what());
  }

  ModelBundle b;
  b.gen_spec = gen_spec_from_json(meta.at("generator"));
  b.disc_spec.in_channels = meta.at("discriminator").at("in_channels").get<int64_t>();
  b.disc_spec.base_width = meta.at("discriminator").at("base_width").get<int64_t>();
  b.guidance.use_guidance = meta.at("guidance").at("use_guidance").get<bool>();
  b.guidance.name = meta.at("guidance").at("name").get<std::string>();
  b.guidance.r_p = meta.at("guidance").at("r_p").get<int>();
  b.guidance.sigma_p = meta.at("guidance").at("sigma_p").get<double>();
  b.step = meta.at("step").get<int64_t>();
  b.epoch = meta.at("epoch").get<int64_t>();
  b.batch_index = meta.at("batch_index").get<int64_t>();
  b.config_fingerprint = meta.at("config_fingerprint").get<std::string>();
  b.inference_size = meta.at("inference_size").get<int64_t>();
  b.rng_states = meta.at("rng_states").get<std::map<std::string, std::string>>();

  b.generator = UnetGenerator(b.gen_spec);
  b.d_pixel = PatchDiscriminator(b.disc_spec);
  b.d_domain = PatchDiscriminator(b.disc_spec);
  const auto read_module = [&root](const char* key, torch::nn::Module& m) {
    torch::serialize::InputArchive a;
    root.read(key, a);
    m.load(a);
  };
  read_module("generator", *b.generator);
  read_module("d_pixel", *b.d_pixel);
  read_module("d_domain", *b.d_domain);

  // Learning rate placeholder: load() restores the serialized options.
  b.opt_g = make_adam(b.generator->parameters(), 1e-3);
  b.opt_dp = make_adam(b.d_pixel->parameters(), 1e-3);
  b.opt_dd = make_adam(b.d_domain->parameters(), 1e-3);
  const auto read_opt = [&root](const char* key, torch::optim::Adam& opt) {
    torch::serialize::InputArchive a;
    root.read(key, a);
    opt.load(a);
  };
  read_opt("opt_g", *b.opt_g);
  read_opt("opt_dp", *b.opt_dp);
  read_opt("opt_dd", *b.opt_dd);

  if (meta.at("has_permutation").get<bool>()) {
    root.read("permutation", b.permutation);
  }
  return b;
}

FundusImage restore(ModelBundle& bundle, const FundusImage& degraded) {
  auto img = degraded.pixels;
  const int64_t s = bundle.inference_size;
  if (img.size(1) != s || img.size(2) != s) {
    img = torch::nn::functional::interpolate(
              img.unsqueeze(0), torch::nn::functional::InterpolateFuncOptions()
                                    .size(std::vector<int64_t>{s, s})
                                    .mode(torch::kBilinear)
                                    .align_corners(false))
              .squeeze(0);
  }
  std::shared_ptr<StructureGuidance> guidance;
  if (bundle.guidance.use_guidance) {
    guidance =
        make_guidance(bundle.guidance.name, bundle.guidance.r_p, bundle.guidance.sigma_p);
  }
  const bool was_training = bundle.generator->is_training();
  bundle.generator->eval();
  torch::Tensor out;
  {
    torch::NoGradGuard no_grad;
    auto x = generator_input(img.unsqueeze(0), guidance.get());
    out = ((bundle.generator->forward(x) + 1.0) * 0.5).clamp(0.0, 1.0).squeeze(0);
  }
  if (was_training) bundle.generator->train();
  return FundusImage{out, std::nullopt};
}

}  // namespace arcnet
