#include "arcnet/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "arcnet/dataset.hpp"
#include "arcnet/errors.hpp"
#include "arcnet/evaluation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace arcnet {

ExperimentSpec experiment_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed experiment spec: ") + e.what());
  }
  ExperimentSpec s;
  s.name = j.value("name", s.name);
  s.source_manifest = j.value("source_manifest", s.source_manifest);
  s.target_manifest = j.value("target_manifest", s.target_manifest);
  s.eval_manifest = j.value("eval_manifest", s.eval_manifest);
  s.use_hfc = j.value("use_hfc", s.use_hfc);
  s.use_structure_loss = j.value("use_structure_loss", s.use_structure_loss);
  s.use_domain_loss = j.value("use_domain_loss", s.use_domain_loss);
  s.out_dir = j.value("out_dir", s.out_dir);
  if (j.contains("train")) s.train = train_config_from_json(j.at("train").dump());
  return s;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open experiment spec: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return experiment_from_json(text);
}

std::string experiment_to_json(const ExperimentSpec& spec) {
  json j{{"name", spec.name},
         {"source_manifest", spec.source_manifest},
         {"target_manifest", spec.target_manifest},
         {"eval_manifest", spec.eval_manifest},
         {"use_hfc", spec.use_hfc},
         {"use_structure_loss", spec.use_structure_loss},
         {"use_domain_loss", spec.use_domain_loss},
         {"out_dir", spec.out_dir},
         {"train", json::parse(train_config_to_json(spec.train))}};
  return j.dump(2);
}

namespace {

TrainConfig effective_train_config(const ExperimentSpec& spec) {
  TrainConfig cfg = spec.train;
  cfg.source_manifest = spec.source_manifest;
  cfg.target_manifest = spec.target_manifest;
  cfg.out_dir = (fs::path(spec.out_dir) / "train").string();
  cfg.guidance.use_guidance = spec.use_hfc;
  cfg.use_structure_loss = spec.use_structure_loss;
  cfg.use_domain_loss = spec.use_domain_loss;
  return cfg;
}

json number_or_sentinel(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.use_structure_loss && !spec.use_hfc) {
    throw ConfigError("experiment flags contradict: structure loss without guidance");
  }
  TrainConfig cfg = effective_train_config(spec);
  validate_train_config(cfg);

  auto eval_manifest = load_manifest(spec.eval_manifest);
  validate_manifest(eval_manifest);
  auto eval_pairs = source_pairs(eval_manifest);
  if (eval_pairs.empty()) throw ConfigError("eval manifest has no clear/degraded pairs");

  ExperimentResult result;
  result.name = spec.name;
  result.seed = cfg.seed;
  result.config_fingerprint = config_fingerprint(cfg);
  result.eval_pairs = static_cast<int64_t>(eval_pairs.size());

  result.checkpoint = fit(cfg);
  auto bundle = load_checkpoint(result.checkpoint);

  const fs::path restored_dir = fs::path(spec.out_dir) / "restored";
  const fs::path reference_dir = fs::path(spec.out_dir) / "reference";
  const fs::path degraded_dir = fs::path(spec.out_dir) / "degraded";
  fs::create_directories(restored_dir);
  fs::create_directories(reference_dir);
  fs::create_directories(degraded_dir);

  for (const auto& pair : eval_pairs) {
    auto degraded = load_image(pair.degraded_path);
    auto restored = restore(bundle, degraded);
    if (restored.height() != degraded.height() || restored.width() != degraded.width()) {
      restored.pixels = torch::nn::functional::interpolate(
                            restored.pixels.unsqueeze(0),
                            torch::nn::functional::InterpolateFuncOptions()
                                .size(std::vector<int64_t>{degraded.height(),
                                                           degraded.width()})
                                .mode(torch::kBilinear)
                                .align_corners(false))
                            .squeeze(0)
                            .clamp(0.0, 1.0);
    }
    const std::string file = pair.id + ".png";
    save_image(restored, (restored_dir / file).string());
    save_image(load_image(pair.clear_path), (reference_dir / file).string());
    save_image(degraded, (degraded_dir / file).string());
  }

  auto restored_report = evaluate_dir(restored_dir.string(), reference_dir.string());
  auto degraded_report = evaluate_dir(degraded_dir.string(), reference_dir.string());
  restored_report.config_fingerprint = result.config_fingerprint;

  result.report_json = (fs::path(spec.out_dir) / "report.json").string();
  write_report_json(restored_report, result.report_json);
  write_report_csv(restored_report, (fs::path(spec.out_dir) / "report.csv").string());

  result.restored_ssim = restored_report.means.at("ssim");
  result.restored_psnr = restored_report.means.at("psnr");
  result.degraded_ssim = degraded_report.means.at("ssim");
  result.degraded_psnr = degraded_report.means.at("psnr");

  json row{{"name", result.name},
           {"seed", result.seed},
           {"config_fingerprint", result.config_fingerprint},
           {"flags",
            {{"use_hfc", spec.use_hfc},
             {"use_structure_loss", spec.use_structure_loss},
             {"use_domain_loss", spec.use_domain_loss}}},
           {"checkpoint", result.checkpoint},
           {"eval_pairs", result.eval_pairs},
           {"restored",
            {{"ssim", number_or_sentinel(result.restored_ssim)},
             {"psnr", number_or_sentinel(result.restored_psnr)}}},
           {"degraded",
            {{"ssim", number_or_sentinel(result.degraded_ssim)},
             {"psnr", number_or_sentinel(result.degraded_psnr)}}}};
  result.result_json = (fs::path(spec.out_dir) / "result.json").string();
  std::ofstream out(result.result_json);
  if (!out) throw DataError("cannot write " + result.result_json);
  out << row.dump(2) << "\n";
  return result;
}

}  // namespace arcnet
