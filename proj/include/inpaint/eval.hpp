#pragma once

#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "inpaint/data.hpp"
#include "inpaint/imaging.hpp"
#include "inpaint/networks.hpp"

namespace inpaint {

struct PixelMetrics {
  Scalar l1 = 0;
  Scalar l2 = 0;
};

// Mean |d| and d^2 over masked pixels x channels, both images taken to the
// unit scale first. Empty mask -> DegenerateMaskError.
PixelMetrics pixel_metrics(const ImageTensor& completion, const ImageTensor& gt, const Mask& mask);

// Running sums; merging shards in any order gives the same means up to
// rounding of the final division.
struct MetricSums {
  Scalar abs_sum = 0;
  Scalar sq_sum = 0;
  std::uint64_t count = 0;

  void add(const ImageTensor& completion, const ImageTensor& gt, const Mask& mask);
  void merge(const MetricSums& other);
  PixelMetrics means() const;
};

// 10 log10(1 / mean_l2) on the unit scale; +infinity for mean_l2 == 0.
Scalar psnr(Scalar mean_l2);

enum class MaskRegime { kCenter, kRandom };
std::string to_string(MaskRegime r);
MaskRegime parse_regime(const std::string& s);

struct RegimeRow {
  MaskRegime regime = MaskRegime::kCenter;
  Scalar mean_l1 = 0;
  Scalar mean_l2 = 0;
  Scalar psnr = 0;

  friend bool operator==(const RegimeRow&, const RegimeRow&) = default;
};

struct MetricsReport {
  std::vector<RegimeRow> rows;
  int mask_size = 56;
  int n_images = 0;
  std::string pixel_scale = "unit";  // [0, 1]
  std::string region = "masked-only";

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// Maps a batch (signed gt, corrupted input, mask) to the raw signed NCHW
// generator output; the evaluator does the composition.
using Completer = std::function<Tensor(const CompletionBatch&)>;

Completer generator_completer(const Generator& g);
// Returns the ground truth; the best any model can score.
Completer identity_completer();

struct EvalOptions {
  std::vector<MaskRegime> regimes{MaskRegime::kCenter, MaskRegime::kRandom};
  int mask_size = 56;
  std::uint64_t seed = 0;
  int batch_size = 8;
};

// Center-cropped test images, one square hole each, composed output scored
// over the hole.
MetricsReport evaluate(const Completer& model, const Dataset& test, const EvalOptions& options);

// The hole used for test image `index` under a regime.
Mask regime_mask(MaskRegime regime, int side, int mask_size, std::uint64_t seed, std::size_t index);

enum class ReportFormat { kText, kCsv, kJson };
ReportFormat parse_report_format(const std::string& s);
std::string emit_report(const MetricsReport& report, ReportFormat format);
// Inverse of the CSV form.
MetricsReport parse_report_csv(const std::string& csv);

void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);

}  // namespace inpaint
