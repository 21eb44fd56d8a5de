#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "arcnet/dataset.hpp"
#include "arcnet/degradation.hpp"
#include "arcnet/errors.hpp"
#include "arcnet/evaluation.hpp"
#include "arcnet/experiment.hpp"
#include "arcnet/frequency.hpp"
#include "arcnet/image.hpp"
#include "arcnet/network.hpp"
#include "arcnet/rng.hpp"
#include "arcnet/training.hpp"

namespace fs = std::filesystem;
using namespace arcnet;

namespace {

std::map<std::string, fs::path> image_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") {
      out[e.path().stem().string()] = e.path();
    }
  }
  return out;
}

torch::Tensor resize_to(const torch::Tensor& chw, int64_t h, int64_t w) {
  return torch::nn::functional::interpolate(
             chw.unsqueeze(0), torch::nn::functional::InterpolateFuncOptions()
                                   .size(std::vector<int64_t>{h, w})
                                   .mode(torch::kBilinear)
                                   .align_corners(false))
      .squeeze(0)
      .clamp(0.0, 1.0);
}

void cmd_simulate(const std::string& input_dir, const std::string& output_dir,
                  uint64_t seed, const std::string& params_path, double fov_threshold) {
  ParamRanges ranges;
  if (!params_path.empty()) ranges = ranges_from_json_file(params_path);
  auto images = image_files(input_dir);
  if (images.empty()) throw DataError("no images in " + input_dir);
  fs::create_directories(output_dir);
  for (const auto& [stem, path] : images) {
    auto img = load_image(path.string());
    if (fov_threshold > 0.0) img.mask = estimate_fov_mask(img, fov_threshold);
    auto params =
        sample_params(img.height(), img.width(), derive_seed(seed, stem), ranges);
    auto degraded = simulate_cataract(img, params);
    save_image(degraded, (fs::path(output_dir) / (stem + ".png")).string());
    std::ofstream sidecar(fs::path(output_dir) / (stem + ".json"));
    if (!sidecar) throw DataError("cannot write sidecar for " + stem);
    sidecar << params_to_json(params) << "\n";
  }
  std::printf("simulated %zu images into %s\n", images.size(), output_dir.c_str());
}

void cmd_decompose(const std::string& input, int rp, double sigma,
                   const std::string& prefix) {
  auto img = load_image(input);
  auto pair = decompose(img, rp, sigma);
  save_image(FundusImage{pair.lfc.clamp(0.0, 1.0), std::nullopt}, prefix + "_lfc.png");
  // visualization mapping only; training always consumes the raw residual
  save_image(FundusImage{(pair.hfc * 0.5 + 0.5).clamp(0.0, 1.0), std::nullopt},
             prefix + "_hfc.png");
  std::printf("wrote %s_lfc.png and %s_hfc.png\n", prefix.c_str(), prefix.c_str());
}

void cmd_train(const std::string& config_path, const std::string& resume) {
  auto cfg = load_train_config(config_path);
  auto final_ckpt = fit(cfg, resume);
  std::printf("final checkpoint: %s\n", final_ckpt.c_str());
}

void cmd_restore(const std::string& ckpt, const std::string& input,
                 const std::string& output, const std::string& input_dir,
                 const std::string& output_dir, bool keep_inference_size) {
  auto bundle = load_checkpoint(ckpt);
  const auto one = [&](const fs::path& in_path, const fs::path& out_path) {
    auto degraded = load_image(in_path.string());
    auto restored = restore(bundle, degraded);
    if (!keep_inference_size &&
        (restored.height() != degraded.height() || restored.width() != degraded.width())) {
      restored.pixels = resize_to(restored.pixels, degraded.height(), degraded.width());
    }
    save_image(restored, out_path.string());
  };
  if (!input.empty()) {
    one(input, output);
    std::printf("restored %s -> %s\n", input.c_str(), output.c_str());
    return;
  }
  auto images = image_files(input_dir);
  if (images.empty()) throw DataError("no images in " + input_dir);
  fs::create_directories(output_dir);
  for (const auto& [stem, path] : images) {
    one(path, fs::path(output_dir) / (stem + ".png"));
  }
  std::printf("restored %zu images into %s\n", images.size(), output_dir.c_str());
}

void cmd_evaluate(const std::string& pred, const std::string& ref,
                  const std::string& mask, const std::string& out) {
  std::optional<std::string> mask_dir;
  if (!mask.empty()) mask_dir = mask;
  auto report = evaluate_dir(pred, ref, mask_dir);
  write_report_json(report, out);
  auto csv = fs::path(out).replace_extension(".csv");
  write_report_csv(report, csv.string());
  std::printf("%zu pairs, %zu skipped\n", report.rows.size(), report.skipped.size());
  for (const auto& [name, v] : report.means) {
    std::printf("mean %s: %.6g\n", name.c_str(), v);
  }
}

void cmd_experiment(const std::string& spec_path) {
  auto result = run_experiment(load_experiment_spec(spec_path));
  std::printf("experiment %s (seed %llu)\n", result.name.c_str(),
              static_cast<unsigned long long>(result.seed));
  std::printf("restored ssim %.6g psnr %.6g | degraded ssim %.6g psnr %.6g\n",
              result.restored_ssim, result.restored_psnr, result.degraded_ssim,
              result.degraded_psnr);
  std::printf("result row: %s\n", result.result_json.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"arcnet: annotation-free cataract fundus restoration pipeline"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Synthesize cataract-like images");
  std::string sim_in, sim_out, sim_params;
  uint64_t sim_seed = 1;
  double sim_fov = 0.0;
  sim->add_option("--input-dir", sim_in, "Directory of clear images")->required();
  sim->add_option("--output-dir", sim_out, "Output directory")->required();
  sim->add_option("--seed", sim_seed, "Root seed; each image derives its own");
  sim->add_option("--params", sim_params, "JSON file overriding sampling ranges");
  sim->add_option("--fov-threshold", sim_fov,
                  "Estimate a field-of-view mask at this threshold (0 = off)");
  sim->callback([&] { cmd_simulate(sim_in, sim_out, sim_seed, sim_params, sim_fov); });

  auto* dec = app.add_subcommand("decompose", "Split an image into LFC and HFC");
  std::string dec_in, dec_prefix;
  int dec_rp = 26;
  double dec_sigma = 9.0;
  dec->add_option("--input", dec_in, "Input image")->required();
  dec->add_option("--rp", dec_rp, "Gaussian radius");
  dec->add_option("--sigma", dec_sigma, "Gaussian spatial constant");
  dec->add_option("--out-prefix", dec_prefix, "Output path prefix")->required();
  dec->callback([&] { cmd_decompose(dec_in, dec_rp, dec_sigma, dec_prefix); });

  auto* trn = app.add_subcommand("train", "Train a restoration model");
  std::string trn_config, trn_resume;
  trn->add_option("--config", trn_config, "TrainConfig JSON")->required();
  trn->add_option("--resume", trn_resume, "Checkpoint to resume from");
  trn->callback([&] { cmd_train(trn_config, trn_resume); });

  auto* res = app.add_subcommand("restore", "Restore degraded images");
  std::string res_ckpt, res_in, res_out, res_in_dir, res_out_dir;
  bool res_keep = false;
  res->add_option("--ckpt", res_ckpt, "Checkpoint file")->required();
  res->add_option("--input", res_in, "Single input image");
  res->add_option("--output", res_out, "Single output image");
  res->add_option("--input-dir", res_in_dir, "Directory of inputs");
  res->add_option("--output-dir", res_out_dir, "Directory for outputs");
  res->add_flag("--keep-inference-size", res_keep,
                "Write at the model's inference size instead of the input size");
  res->callback([&] {
    const bool single = !res_in.empty() || !res_out.empty();
    const bool batch = !res_in_dir.empty() || !res_out_dir.empty();
    if (single == batch || (single && (res_in.empty() || res_out.empty())) ||
        (batch && (res_in_dir.empty() || res_out_dir.empty()))) {
      throw ConfigError("pass either --input/--output or --input-dir/--output-dir");
    }
    cmd_restore(res_ckpt, res_in, res_out, res_in_dir, res_out_dir, res_keep);
  });

  auto* eva = app.add_subcommand("evaluate", "Score predictions against references");
  std::string eva_pred, eva_ref, eva_mask, eva_out;
  eva->add_option("--pred", eva_pred, "Directory of predictions")->required();
  eva->add_option("--ref", eva_ref, "Directory of references")->required();
  eva->add_option("--mask", eva_mask, "Directory of overlap masks");
  eva->add_option("--out", eva_out, "Report JSON path (CSV written alongside)")
      ->required();
  eva->callback([&] { cmd_evaluate(eva_pred, eva_ref, eva_mask, eva_out); });

  auto* exp = app.add_subcommand("experiment", "Train, restore, and evaluate end to end");
  std::string exp_spec;
  exp->add_option("--spec", exp_spec, "ExperimentSpec JSON")->required();
  exp->callback([&] { cmd_experiment(exp_spec); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
