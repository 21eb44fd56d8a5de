#pragma once

#include <torch/torch.h>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arcnet/image.hpp"

namespace arcnet {

// Peak 1.0; 10*log10(1/MSE) over all channels of the masked pixels.
// Identical inputs return +infinity. An all-false mask is an error.
double psnr(const torch::Tensor& a, const torch::Tensor& b,
            const std::optional<torch::Tensor>& mask = std::nullopt);

// Gaussian-window SSIM: 11x11 window, sigma 1.5, K1 0.01, K2 0.03, dynamic
// range 1. Computed per channel on window centers whose full window lies
// inside the image (and inside the mask when one is given), then averaged
// over channels. Symmetric; 1.0 exactly for identical inputs.
double ssim(const torch::Tensor& a, const torch::Tensor& b,
            const std::optional<torch::Tensor>& mask = std::nullopt);

// Plug-in seam so no-reference or model-based metrics can be added without
// touching the report assembly.
class Metric {
 public:
  virtual ~Metric() = default;
  virtual std::string name() const = 0;
  virtual double compute(const FundusImage& pred, const std::optional<FundusImage>& ref,
                         const std::optional<torch::Tensor>& mask) const = 0;
};

class SsimMetric final : public Metric {
 public:
  std::string name() const override { return "ssim"; }
  double compute(const FundusImage& pred, const std::optional<FundusImage>& ref,
                 const std::optional<torch::Tensor>& mask) const override;
};

class PsnrMetric final : public Metric {
 public:
  std::string name() const override { return "psnr"; }
  double compute(const FundusImage& pred, const std::optional<FundusImage>& ref,
                 const std::optional<torch::Tensor>& mask) const override;
};

std::vector<std::shared_ptr<Metric>> default_metrics();

struct EvalRow {
  std::string id;
  std::map<std::string, double> values;
};

struct EvalReport {
  std::vector<EvalRow> rows;            // ordered by id
  std::map<std::string, double> means;  // arithmetic mean per metric
  std::vector<std::string> skipped;     // stems present on only one side
  std::string config_fingerprint;
};

// Pairs images between the two directories by filename stem; unmatched
// stems land in `skipped`. When mask_dir is given, a stem without a mask
// file is skipped as well. Rows are ordered by stem.
EvalReport evaluate_dir(const std::string& pred_dir, const std::string& ref_dir,
                        const std::optional<std::string>& mask_dir = std::nullopt,
                        const std::vector<std::shared_ptr<Metric>>& metrics =
                            default_metrics());

// +/-infinity serializes as the strings "inf" / "-inf" in both formats.
void write_report_json(const EvalReport& report, const std::string& path);
void write_report_csv(const EvalReport& report, const std::string& path);

}  // namespace arcnet
