#include "arcnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "arcnet/dataset.hpp"
#include "arcnet/errors.hpp"
#include "arcnet/image.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace arcnet {

namespace {

json config_to_json_obj(const TrainConfig& c) {
  return json{{"source_manifest", c.source_manifest},
              {"target_manifest", c.target_manifest},
              {"out_dir", c.out_dir},
              {"epochs", c.epochs},
              {"phase1_epochs", c.phase1_epochs},
              {"lr_phase1", c.lr_phase1},
              {"lr_phase2", c.lr_phase2},
              {"batch_size", c.batch_size},
              {"crop", c.crop},
              {"resize_scales", c.resize_scales},
              {"weights",
               {{"lambda1", c.weights.lambda1},
                {"lambda2", c.weights.lambda2},
                {"lambda3", c.weights.lambda3}}},
              {"seed", c.seed},
              {"checkpoint_every", c.checkpoint_every},
              {"guidance",
               {{"use_guidance", c.guidance.use_guidance},
                {"name", c.guidance.name},
                {"r_p", c.guidance.r_p},
                {"sigma_p", c.guidance.sigma_p}}},
              {"use_structure_loss", c.use_structure_loss},
              {"use_domain_loss", c.use_domain_loss},
              {"depth", c.depth},
              {"base_width", c.base_width},
              {"deterministic", c.deterministic}};
}

void set_learning_rate(torch::optim::Adam& opt, double lr) {
  for (auto& group : opt.param_groups()) {
    static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
  }
}

torch::Tensor draw_permutation(int64_t n, RngStream& rng) {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), int64_t{0});
  for (int64_t i = n - 1; i > 0; --i) {
    const int64_t j = rng.uniform_int(0, i);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  return torch::tensor(idx, torch::kInt64);
}

double item_checked(const torch::Tensor& t, const char* term, int64_t step) {
  const double v = t.item<double>();
  if (!std::isfinite(v)) {
    throw NumericError(std::string("non-finite ") + term + " at step " +
                       std::to_string(step));
  }
  return v;
}

}  // namespace

TrainConfig train_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed train config: ") + e.what());
  }
  TrainConfig c;
  try {
    c.source_manifest = j.value("source_manifest", c.source_manifest);
    c.target_manifest = j.value("target_manifest", c.target_manifest);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.epochs = j.value("epochs", c.epochs);
    c.phase1_epochs = j.value("phase1_epochs", c.phase1_epochs);
    c.lr_phase1 = j.value("lr_phase1", c.lr_phase1);
    c.lr_phase2 = j.value("lr_phase2", c.lr_phase2);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.crop = j.value("crop", c.crop);
    c.resize_scales = j.value("resize_scales", c.resize_scales);
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      c.weights.lambda1 = w.value("lambda1", c.weights.lambda1);
      c.weights.lambda2 = w.value("lambda2", c.weights.lambda2);
      c.weights.lambda3 = w.value("lambda3", c.weights.lambda3);
    }
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    if (j.contains("guidance")) {
      const auto& g = j.at("guidance");
      c.guidance.use_guidance = g.value("use_guidance", c.guidance.use_guidance);
      c.guidance.name = g.value("name", c.guidance.name);
      c.guidance.r_p = g.value("r_p", c.guidance.r_p);
      c.guidance.sigma_p = g.value("sigma_p", c.guidance.sigma_p);
    }
    c.use_structure_loss = j.value("use_structure_loss", c.use_structure_loss);
    c.use_domain_loss = j.value("use_domain_loss", c.use_domain_loss);
    c.depth = j.value("depth", c.depth);
    c.base_width = j.value("base_width", c.base_width);
    c.deterministic = j.value("deterministic", c.deterministic);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad train config field: ") + e.what());
  }
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open train config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return train_config_from_json(text);
}

std::string train_config_to_json(const TrainConfig& cfg) {
  return config_to_json_obj(cfg).dump(2);
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.phase1_epochs < 0 || cfg.phase1_epochs > cfg.epochs) {
    throw ConfigError("phase1_epochs must lie in [0, epochs]");
  }
  if (!(cfg.lr_phase1 > 0.0) || !(cfg.lr_phase2 > 0.0)) {
    throw ConfigError("learning rates must be positive");
  }
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.resize_scales.empty()) throw ConfigError("resize_scales must be nonempty");
  const int64_t min_scale =
      *std::min_element(cfg.resize_scales.begin(), cfg.resize_scales.end());
  if (cfg.crop < 1 || cfg.crop > min_scale) {
    throw ConfigError("crop must satisfy 1 <= crop <= min(resize_scales)");
  }
  if (cfg.depth < 1 || cfg.depth > 16) throw ConfigError("depth must lie in [1, 16]");
  if (cfg.crop % (int64_t{1} << cfg.depth) != 0) {
    throw ConfigError("crop must be divisible by 2^depth");
  }
  if (cfg.base_width < 1) throw ConfigError("base_width must be >= 1");
  if (cfg.checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (cfg.weights.lambda1 < 0 || cfg.weights.lambda2 < 0 || cfg.weights.lambda3 < 0) {
    throw ConfigError("loss weights must be nonnegative");
  }
  if (cfg.use_structure_loss && !cfg.guidance.use_guidance) {
    throw ConfigError("structure loss without guidance is undefined");
  }
  if (cfg.guidance.use_guidance) {
    if (cfg.guidance.r_p < 1) throw ConfigError("guidance r_p must be >= 1");
    if (!(cfg.guidance.sigma_p > 0.0)) throw ConfigError("guidance sigma_p must be > 0");
  }
}

std::string config_fingerprint(const TrainConfig& cfg) {
  json j = config_to_json_obj(cfg);
  j.erase("seed");
  j.erase("out_dir");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

double lr_for_epoch(const TrainConfig& cfg, int64_t epoch) {
  return epoch < cfg.phase1_epochs ? cfg.lr_phase1 : cfg.lr_phase2;
}

Augmented augment(const torch::Tensor& img, const std::optional<torch::Tensor>& paired,
                  const std::vector<int64_t>& scales, int64_t crop, RngStream& rng) {
  const int64_t scale =
      scales[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(scales.size()) - 1))];
  const int64_t r0 = rng.uniform_int(0, scale - crop);
  const int64_t c0 = rng.uniform_int(0, scale - crop);
  const auto apply = [&](const torch::Tensor& t) {
    auto r = torch::nn::functional::interpolate(
                 t.unsqueeze(0), torch::nn::functional::InterpolateFuncOptions()
                                     .size(std::vector<int64_t>{scale, scale})
                                     .mode(torch::kBilinear)
                                     .align_corners(false))
                 .squeeze(0);
    using torch::indexing::Slice;
    return r.index({Slice(), Slice(r0, r0 + crop), Slice(c0, c0 + crop)}).contiguous();
  };
  Augmented out;
  out.image = apply(img);
  if (paired.has_value()) out.paired = apply(*paired);
  return out;
}

LossReport train_step(ModelBundle& bundle, const StructureGuidance* guidance,
                      const torch::Tensor& source_degraded,
                      const torch::Tensor& source_clear, const torch::Tensor& target,
                      const StepOptions& opts) {
  if (source_degraded.dim() != 4 || source_degraded.sizes() != source_clear.sizes()) {
    throw std::invalid_argument("source batches must be {N,3,H,W} of equal shape");
  }
  if (opts.use_domain_loss) {
    if (!target.defined() || target.size(0) != source_degraded.size(0)) {
      throw std::invalid_argument(
          "target batch must match the source batch size when the domain loss is on");
    }
  }
  if (opts.use_structure_loss && guidance == nullptr) {
    throw std::invalid_argument("structure loss requires a guidance instance");
  }
  if (bundle.guidance.use_guidance && guidance == nullptr) {
    throw std::invalid_argument("bundle expects guidance input channels");
  }

  bundle.generator->train();
  bundle.d_pixel->train();
  bundle.d_domain->train();
  const auto to_pm1 = [](const torch::Tensor& t) { return t * 2.0 - 1.0; };
  const StructureGuidance* input_guidance =
      bundle.guidance.use_guidance ? guidance : nullptr;

  auto s_hat = (bundle.generator->forward(generator_input(source_degraded, input_guidance)) +
                1.0) *
               0.5;
  torch::Tensor t_hat;
  if (opts.use_domain_loss) {
    t_hat =
        (bundle.generator->forward(generator_input(target, input_guidance)) + 1.0) * 0.5;
  }
  const int64_t step = bundle.step + 1;
  // NaN guards inside the loss functions get re-labeled with the phase and
  // step, so a diverged run reports where it died
  const auto with_term = [step](const char* term, auto&& fn) -> torch::Tensor {
    try {
      return fn();
    } catch (const NumericError& e) {
      throw NumericError(std::string("non-finite ") + term + " at step " +
                         std::to_string(step) + " (" + e.what() + ")");
    }
  };

  // pixel discriminator: clear images real, restored source images fake
  bundle.opt_dp->zero_grad();
  auto loss_dp = with_term("d_pixel loss", [&] {
    return adversarial_loss(bundle.d_pixel->forward(to_pm1(source_clear)),
                            bundle.d_pixel->forward(to_pm1(s_hat.detach())),
                            AdvSide::discriminator);
  });
  item_checked(loss_dp, "d_pixel loss", step);
  loss_dp.backward();
  bundle.opt_dp->step();

  // domain discriminator: restored source real-labeled, restored target fake-labeled
  if (opts.use_domain_loss) {
    bundle.opt_dd->zero_grad();
    auto loss_dd = with_term("d_domain loss", [&] {
      return adversarial_loss(bundle.d_domain->forward(to_pm1(s_hat.detach())),
                              bundle.d_domain->forward(to_pm1(t_hat.detach())),
                              AdvSide::discriminator);
    });
    item_checked(loss_dd, "d_domain loss", step);
    loss_dd.backward();
    bundle.opt_dd->step();
  }

  // generator
  bundle.opt_g->zero_grad();
  auto l_p = with_term("l_p", [&] {
    return adversarial_loss(torch::Tensor(), bundle.d_pixel->forward(to_pm1(s_hat)),
                            AdvSide::generator);
  });
  auto l_i = image_l1(s_hat, source_clear);
  LossReport report;
  report.step = step;
  report.l_p = item_checked(l_p, "l_p", step);
  report.l_i = item_checked(l_i, "l_i", step);
  auto total = l_p + opts.weights.lambda1 * l_i;
  if (opts.use_structure_loss) {
    auto l_s = structure_l1(s_hat, source_clear, *guidance);
    report.l_s = item_checked(l_s, "l_s", step);
    total = total + opts.weights.lambda2 * l_s;
  }
  if (opts.use_domain_loss) {
    auto l_d = with_term("l_d", [&] {
      return adversarial_loss(torch::Tensor(), bundle.d_domain->forward(to_pm1(t_hat)),
                              AdvSide::generator);
    });
    report.l_d = item_checked(l_d, "l_d", step);
    total = total + opts.weights.lambda3 * l_d;
  }
  total.backward();
  bundle.opt_g->step();

  report.total = total_generator_loss(report, opts.weights);
  bundle.step = step;
  return report;
}

std::string fit(const TrainConfig& cfg, const std::string& resume_checkpoint) {
  validate_train_config(cfg);

  auto src_manifest = load_manifest(cfg.source_manifest);
  validate_manifest(src_manifest);
  auto pairs = source_pairs(src_manifest);
  if (pairs.empty()) throw ConfigError("source manifest has no clear/degraded pairs");
  std::vector<std::string> targets;
  if (cfg.use_domain_loss) {
    auto tgt_manifest = load_manifest(cfg.target_manifest);
    validate_manifest(tgt_manifest);
    targets = paths_with_role(tgt_manifest, EntryRole::kTarget);
    if (targets.empty()) throw ConfigError("target manifest has no target images");
  }

  torch::manual_seed(derive_seed(cfg.seed, "torch"));
  if (cfg.deterministic) {
    torch::set_num_threads(1);
    at::globalContext().setDeterministicAlgorithms(true, /*warn_only=*/true);
  }

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);

  const std::string fingerprint = config_fingerprint(cfg);
  auto shuffle_rng = derive_stream(cfg.seed, "shuffle");
  auto augment_rng = derive_stream(cfg.seed, "augment");
  auto target_rng = derive_stream(cfg.seed, "target-sample");

  ModelBundle bundle;
  const bool resuming = !resume_checkpoint.empty();
  if (resuming) {
    bundle = load_checkpoint(resume_checkpoint);
    if (bundle.config_fingerprint != fingerprint) {
      throw ConfigError("checkpoint fingerprint does not match this config");
    }
    const auto restore_stream = [&](const char* key, RngStream& rng) {
      auto it = bundle.rng_states.find(key);
      if (it == bundle.rng_states.end()) {
        throw DataError(std::string("checkpoint lacks rng state '") + key + "'");
      }
      rng.restore_state(it->second);
    };
    restore_stream("shuffle", shuffle_rng);
    restore_stream("augment", augment_rng);
    restore_stream("target-sample", target_rng);
  } else {
    GeneratorSpec gen_spec;
    gen_spec.in_channels = cfg.guidance.use_guidance ? 6 : 3;
    gen_spec.out_channels = 3;
    gen_spec.depth = cfg.depth;
    gen_spec.base_width = cfg.base_width;
    bundle = build_bundle(gen_spec, DiscriminatorSpec{}, cfg.guidance, cfg.seed,
                          cfg.lr_phase1);
    bundle.config_fingerprint = fingerprint;
    bundle.inference_size = cfg.crop;
  }

  std::shared_ptr<StructureGuidance> guidance;
  if (cfg.guidance.use_guidance) {
    guidance = make_guidance(cfg.guidance.name, cfg.guidance.r_p, cfg.guidance.sigma_p);
  }

  const std::string csv_path = (fs::path(cfg.out_dir) / "train_log.csv").string();
  const bool append_log = resuming && fs::exists(csv_path);
  std::ofstream log(csv_path, append_log ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write training log: " + csv_path);
  if (!append_log) log << loss_csv_header() << "\n";

  StepOptions opts;
  opts.weights = cfg.weights;
  opts.use_structure_loss = cfg.use_structure_loss;
  opts.use_domain_loss = cfg.use_domain_loss;

  // Originals are cached decoded; augmentation redraws from them per use.
  std::unordered_map<std::string, torch::Tensor> cache;
  const auto load01 = [&cache](const std::string& path) -> const torch::Tensor& {
    auto it = cache.find(path);
    if (it == cache.end()) it = cache.emplace(path, load_image(path).pixels).first;
    return it->second;
  };

  const auto save_ckpt = [&](const std::string& path) {
    bundle.rng_states = {{"shuffle", shuffle_rng.save_state()},
                         {"augment", augment_rng.save_state()},
                         {"target-sample", target_rng.save_state()}};
    save_checkpoint(bundle, path);
  };

  const int64_t n = static_cast<int64_t>(pairs.size());
  const int64_t n_batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  for (int64_t epoch = bundle.epoch; epoch < cfg.epochs; ++epoch) {
    bundle.epoch = epoch;
    const double lr = lr_for_epoch(cfg, epoch);
    set_learning_rate(*bundle.opt_g, lr);
    set_learning_rate(*bundle.opt_dp, lr);
    set_learning_rate(*bundle.opt_dd, lr);

    if (!(bundle.permutation.defined() && bundle.batch_index > 0)) {
      bundle.permutation = draw_permutation(n, shuffle_rng);
      bundle.batch_index = 0;
    }
    auto perm = bundle.permutation.accessor<int64_t, 1>();

    for (int64_t b = bundle.batch_index; b < n_batches; ++b) {
      const int64_t lo = b * cfg.batch_size;
      const int64_t hi = std::min(n, lo + cfg.batch_size);
      std::vector<torch::Tensor> degraded, clear, tgt;
      for (int64_t k = lo; k < hi; ++k) {
        const auto& pair = pairs[static_cast<size_t>(perm[k])];
        auto aug = augment(load01(pair.degraded_path), load01(pair.clear_path),
                           cfg.resize_scales, cfg.crop, augment_rng);
        degraded.push_back(aug.image);
        clear.push_back(aug.paired);
      }
      torch::Tensor target_batch;
      if (cfg.use_domain_loss) {
        for (int64_t k = lo; k < hi; ++k) {
          const auto idx = static_cast<size_t>(
              target_rng.uniform_int(0, static_cast<int64_t>(targets.size()) - 1));
          tgt.push_back(
              augment(load01(targets[idx]), std::nullopt, cfg.resize_scales, cfg.crop,
                      augment_rng)
                  .image);
        }
        target_batch = torch::stack(tgt);
      }

      auto report = train_step(bundle, guidance.get(), torch::stack(degraded),
                               torch::stack(clear), target_batch, opts);
      log << loss_csv_row(report) << "\n";
      log.flush();

      bundle.batch_index = b + 1;
      if (cfg.checkpoint_every > 0 && bundle.step % cfg.checkpoint_every == 0) {
        save_ckpt((fs::path(cfg.out_dir) / ("ckpt_" + std::to_string(bundle.step) +
                                            ".arcnet"))
                      .string());
      }
    }
    bundle.batch_index = 0;
    bundle.permutation = torch::Tensor();
    bundle.epoch = epoch + 1;
  }

  const std::string final_path =
      (fs::path(cfg.out_dir) / ("ckpt_" + std::to_string(bundle.step) + ".arcnet"))
          .string();
  save_ckpt(final_path);
  return final_path;
}

}  // namespace arcnet
