#include "arcnet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "arcnet/errors.hpp"
#include "arcnet/filters.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace arcnet {

namespace {

void check_same_shape(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) {
    throw std::invalid_argument("metric inputs must have equal shape");
  }
  if (a.dim() != 3) {
    throw std::invalid_argument("metric inputs must be {C,H,W}");
  }
}

torch::Tensor checked_mask(const torch::Tensor& mask, const torch::Tensor& img) {
  auto m = mask.to(torch::kBool);
  if (m.dim() != 2 || m.size(0) != img.size(1) || m.size(1) != img.size(2)) {
    throw std::invalid_argument("mask must be {H,W} matching the images");
  }
  if (!m.any().item<bool>()) {
    throw std::invalid_argument("mask selects no pixels");
  }
  return m;
}

}  // namespace

double psnr(const torch::Tensor& a, const torch::Tensor& b,
            const std::optional<torch::Tensor>& mask) {
  check_same_shape(a, b);
  auto diff2 = (a.to(torch::kFloat64) - b.to(torch::kFloat64)).square();
  double mse;
  if (mask.has_value()) {
    auto m = checked_mask(*mask, a);
    mse = diff2.masked_select(m.unsqueeze(0)).mean().item<double>();
  } else {
    mse = diff2.mean().item<double>();
  }
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

double ssim(const torch::Tensor& a, const torch::Tensor& b,
            const std::optional<torch::Tensor>& mask) {
  check_same_shape(a, b);
  constexpr int kRadius = 5;  // 11x11 window
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
  constexpr double kC2 = 0.03 * 0.03;
  const int64_t h = a.size(1), w = a.size(2);
  if (h < 2 * kRadius + 1 || w < 2 * kRadius + 1) {
    throw std::invalid_argument("image smaller than the 11x11 SSIM window");
  }

  auto x = a.to(torch::kFloat64).unsqueeze(1);  // {C,1,H,W}
  auto y = b.to(torch::kFloat64).unsqueeze(1);
  auto win = gaussian_kernel(kRadius, kSigma).view({1, 1, 2 * kRadius + 1, 2 * kRadius + 1});

  auto mu_x = torch::conv2d(x, win);
  auto mu_y = torch::conv2d(y, win);
  auto sxx = torch::conv2d(x * x, win) - mu_x * mu_x;
  auto syy = torch::conv2d(y * y, win) - mu_y * mu_y;
  auto sxy = torch::conv2d(x * y, win) - mu_x * mu_y;

  auto num = (2.0 * mu_x * mu_y + kC1) * (2.0 * sxy + kC2);
  auto den = (mu_x * mu_x + mu_y * mu_y + kC1) * (sxx + syy + kC2);
  auto map = num / den;  // {C,1,h',w'}

  if (!mask.has_value()) return map.mean().item<double>();

  auto m = checked_mask(*mask, a).to(torch::kFloat64).view({1, 1, h, w});
  auto ones = torch::ones({1, 1, 2 * kRadius + 1, 2 * kRadius + 1}, torch::kFloat64);
  auto inside = torch::conv2d(m, ones);  // count of mask pixels per window
  auto valid = inside > (2 * kRadius + 1) * (2 * kRadius + 1) - 0.5;
  if (!valid.any().item<bool>()) {
    throw std::invalid_argument("mask admits no full SSIM window");
  }
  return map.masked_select(valid).mean().item<double>();
}

double SsimMetric::compute(const FundusImage& pred, const std::optional<FundusImage>& ref,
                           const std::optional<torch::Tensor>& mask) const {
  if (!ref.has_value()) throw std::invalid_argument("ssim requires a reference image");
  return ssim(pred.pixels, ref->pixels, mask);
}

double PsnrMetric::compute(const FundusImage& pred, const std::optional<FundusImage>& ref,
                           const std::optional<torch::Tensor>& mask) const {
  if (!ref.has_value()) throw std::invalid_argument("psnr requires a reference image");
  return psnr(pred.pixels, ref->pixels, mask);
}

std::vector<std::shared_ptr<Metric>> default_metrics() {
  return {std::make_shared<SsimMetric>(), std::make_shared<PsnrMetric>()};
}

namespace {

bool has_image_extension(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::map<std::string, fs::path> list_images(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || !has_image_extension(e.path())) continue;
    auto stem = e.path().stem().string();
    if (!out.emplace(stem, e.path()).second) {
      throw DataError("ambiguous stem '" + stem + "' in " + dir);
    }
  }
  return out;
}

torch::Tensor load_mask_file(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw DataError("cannot read mask: " + path.string());
  auto t = torch::from_blob(m.data, {m.rows, m.cols}, torch::kUInt8);
  return (t >= 128).clone();
}

// JSON cannot carry infinities; keep them as sentinel strings.
json number_or_sentinel(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

std::string csv_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

EvalReport evaluate_dir(const std::string& pred_dir, const std::string& ref_dir,
                        const std::optional<std::string>& mask_dir,
                        const std::vector<std::shared_ptr<Metric>>& metrics) {
  auto preds = list_images(pred_dir);
  auto refs = list_images(ref_dir);
  std::map<std::string, fs::path> masks;
  if (mask_dir.has_value()) masks = list_images(*mask_dir);

  EvalReport report;
  for (const auto& [stem, path] : preds) {
    if (!refs.count(stem)) {
      report.skipped.push_back(stem + ":missing-ref");
      continue;
    }
    if (mask_dir.has_value() && !masks.count(stem)) {
      report.skipped.push_back(stem + ":missing-mask");
      continue;
    }
    auto pred = load_image(path.string());
    auto ref = load_image(refs.at(stem).string());
    std::optional<torch::Tensor> mask;
    if (mask_dir.has_value()) mask = load_mask_file(masks.at(stem));
    EvalRow row{stem, {}};
    for (const auto& m : metrics) {
      row.values[m->name()] = m->compute(pred, ref, mask);
    }
    report.rows.push_back(std::move(row));
  }
  for (const auto& [stem, path] : refs) {
    if (!preds.count(stem)) report.skipped.push_back(stem + ":missing-pred");
  }
  std::sort(report.skipped.begin(), report.skipped.end());

  if (!report.rows.empty()) {
    for (const auto& m : metrics) {
      double sum = 0.0;
      for (const auto& row : report.rows) sum += row.values.at(m->name());
      report.means[m->name()] = sum / static_cast<double>(report.rows.size());
    }
  }
  return report;
}

void write_report_json(const EvalReport& report, const std::string& path) {
  json rows = json::array();
  for (const auto& row : report.rows) {
    json values;
    for (const auto& [name, v] : row.values) values[name] = number_or_sentinel(v);
    rows.push_back({{"id", row.id}, {"values", values}});
  }
  json means;
  for (const auto& [name, v] : report.means) means[name] = number_or_sentinel(v);
  json doc{{"rows", rows},
           {"means", means},
           {"skipped", report.skipped},
           {"config_fingerprint", report.config_fingerprint},
           {"metric_params",
            {{"ssim",
              {{"window", 11}, {"sigma", 1.5}, {"k1", 0.01}, {"k2", 0.03}, {"dynamic_range", 1.0}}},
             {"psnr", {{"peak", 1.0}}}}}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report: " + path);
  out << doc.dump(2) << "\n";
}

void write_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report: " + path);
  std::vector<std::string> cols;
  if (!report.rows.empty()) {
    for (const auto& [name, v] : report.rows.front().values) cols.push_back(name);
  }
  out << "id";
  for (const auto& c : cols) out << "," << c;
  out << "\n";
  for (const auto& row : report.rows) {
    out << row.id;
    for (const auto& c : cols) out << "," << csv_number(row.values.at(c));
    out << "\n";
  }
}

}  // namespace arcnet
