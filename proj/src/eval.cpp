#include "inpaint/eval.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "inpaint/errors.hpp"
#include "inpaint/ops.hpp"

namespace inpaint {

namespace {

std::string format_scalar(Scalar v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Scalar parse_scalar(const std::string& s) {
  if (s == "inf") return std::numeric_limits<Scalar>::infinity();
  if (s == "-inf") return -std::numeric_limits<Scalar>::infinity();
  std::size_t used = 0;
  Scalar v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ValidationError("report: '" + s + "' is not a number");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

constexpr const char* kCsvHeader = "regime,mean_l1,mean_l2,psnr,mask_size,n_images,pixel_scale,region";

}  // namespace

void MetricSums::add(const ImageTensor& completion, const ImageTensor& gt, const Mask& mask) {
  if (completion.height() != gt.height() || completion.width() != gt.width() ||
      completion.channels() != gt.channels()) {
    throw ValidationError("pixel_metrics: completion and ground truth differ in shape");
  }
  if (mask.height() != gt.height() || mask.width() != gt.width()) {
    throw ValidationError("pixel_metrics: mask does not match the image size");
  }
  const ImageTensor a = to_unit(completion);
  const ImageTensor b = to_unit(gt);
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!mask.at(y, x)) continue;
      for (int c = 0; c < gt.channels(); ++c) {
        const Scalar d = a.at(y, x, c) - b.at(y, x, c);
        abs_sum += std::abs(d);
        sq_sum += d * d;
        ++count;
      }
    }
  }
}

void MetricSums::merge(const MetricSums& other) {
  abs_sum += other.abs_sum;
  sq_sum += other.sq_sum;
  count += other.count;
}

PixelMetrics MetricSums::means() const {
  if (count == 0) throw DegenerateMaskError("metrics: the mask selects no pixels");
  return {abs_sum / static_cast<Scalar>(count), sq_sum / static_cast<Scalar>(count)};
}

PixelMetrics pixel_metrics(const ImageTensor& completion, const ImageTensor& gt, const Mask& mask) {
  MetricSums s;
  s.add(completion, gt, mask);
  return s.means();
}

Scalar psnr(Scalar mean_l2) {
  if (std::isnan(mean_l2) || mean_l2 < 0) {
    throw ValidationError("psnr: mean_l2 must be >= 0, got " + format_scalar(mean_l2));
  }
  if (mean_l2 == 0) return std::numeric_limits<Scalar>::infinity();
  return 10.0 * std::log10(1.0 / mean_l2);
}

std::string to_string(MaskRegime r) { return r == MaskRegime::kCenter ? "center" : "random"; }

MaskRegime parse_regime(const std::string& s) {
  if (s == "center") return MaskRegime::kCenter;
  if (s == "random") return MaskRegime::kRandom;
  throw ConfigError("/regime: expected center or random, got \"" + s + "\"");
}

Completer generator_completer(const Generator& g) {
  return [&g](const CompletionBatch& b) { return g.generate(b.input4); };
}

Completer identity_completer() {
  return [](const CompletionBatch& b) { return b.gt; };
}

Mask regime_mask(MaskRegime regime, int side, int mask_size, std::uint64_t seed, std::size_t index) {
  if (mask_size < 1 || mask_size > side) {
    throw ConfigError("/mask_size: must lie in [1, " + std::to_string(side) + "], got " +
                      std::to_string(mask_size));
  }
  if (regime == MaskRegime::kCenter) return center_mask(side, side, mask_size);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0xe7a1u};
  Rng rng(seq);
  return sample_mask(MaskSpec{mask_size, mask_size}, side, side, rng);
}

MetricsReport evaluate(const Completer& model, const Dataset& test, const EvalOptions& options) {
  if (test.empty()) throw ValidationError("evaluate: the test split is empty");
  if (options.batch_size < 1) throw ConfigError("/batch_size: must be >= 1");
  if (options.regimes.empty()) throw ConfigError("/regimes: at least one regime is required");
  const int side = test.target_size();
  MetricsReport report;
  report.mask_size = options.mask_size;
  report.n_images = static_cast<int>(test.size());
  for (const MaskRegime regime : options.regimes) {
    MetricSums sums;
    for (std::size_t start = 0; start < test.size(); start += options.batch_size) {
      const std::size_t end = std::min(test.size(), start + options.batch_size);
      std::vector<ImageTensor> gt;
      std::vector<Mask> masks;
      std::vector<std::string> ids;
      for (std::size_t i = start; i < end; ++i) {
        gt.push_back(test.preprocessed(i, nullptr));
        masks.push_back(regime_mask(regime, side, options.mask_size, options.seed, i));
        ids.push_back(test.id(i));
      }
      const CompletionBatch batch = assemble_batch(gt, masks, std::move(ids));
      const Tensor generated = model(batch);
      if (generated.shape() != batch.gt.shape()) {
        throw ValidationError("evaluate: model output shape " + generated.shape().str() +
                              " does not match the batch " + batch.gt.shape().str());
      }
      Tensor completed;
      {
        NoGradGuard guard;
        completed = compose(Var(generated), batch.gt, batch.mask).value();
      }
      for (int n = 0; n < batch.size(); ++n) {
        sums.add(from_nchw(completed, n, RangeTag::kSigned), gt[n], masks[n]);
      }
    }
    const PixelMetrics m = sums.means();
    report.rows.push_back({regime, m.l1, m.l2, psnr(m.l2)});
  }
  return report;
}

ReportFormat parse_report_format(const std::string& s) {
  if (s == "text") return ReportFormat::kText;
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "json") return ReportFormat::kJson;
  throw ConfigError("/format: expected text, csv or json, got \"" + s + "\"");
}

std::string emit_report(const MetricsReport& report, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::kText: {
      char line[128];
      std::snprintf(line, sizeof(line), "%-8s %10s %10s %10s\n", "Regime", "Mean L1", "Mean L2", "PSNR");
      out << line;
      for (const auto& r : report.rows) {
        const std::string p = std::isinf(r.psnr) ? "inf" : [&] {
          char b[32];
          std::snprintf(b, sizeof(b), "%.4f", r.psnr);
          return std::string(b);
        }();
        std::snprintf(line, sizeof(line), "%-8s %10.4f %10.4f %10s\n", to_string(r.regime).c_str(),
                      r.mean_l1, r.mean_l2, p.c_str());
        out << line;
      }
      out << "# " << report.n_images << " images, " << report.mask_size << "x" << report.mask_size
          << " holes, " << report.pixel_scale << " [0,1] scale, " << report.region
          << " region, PSNR in dB\n";
      break;
    }
    case ReportFormat::kCsv:
      out << kCsvHeader << "\n";
      for (const auto& r : report.rows) {
        out << to_string(r.regime) << ',' << format_scalar(r.mean_l1) << ',' << format_scalar(r.mean_l2)
            << ',' << format_scalar(r.psnr) << ',' << report.mask_size << ',' << report.n_images << ','
            << report.pixel_scale << ',' << report.region << "\n";
      }
      break;
    case ReportFormat::kJson:
      out << nlohmann::json(report).dump(2) << "\n";
      break;
  }
  return out.str();
}

MetricsReport parse_report_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw ValidationError("report CSV: missing or unexpected header");
  }
  MetricsReport r;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 8) throw ValidationError("report CSV: expected 8 columns in '" + line + "'");
    RegimeRow row;
    row.regime = parse_regime(cells[0]);
    row.mean_l1 = parse_scalar(cells[1]);
    row.mean_l2 = parse_scalar(cells[2]);
    row.psnr = parse_scalar(cells[3]);
    const int mask_size = std::stoi(cells[4]);
    const int n_images = std::stoi(cells[5]);
    if (first) {
      r.mask_size = mask_size;
      r.n_images = n_images;
      r.pixel_scale = cells[6];
      r.region = cells[7];
      first = false;
    } else if (mask_size != r.mask_size || n_images != r.n_images || cells[6] != r.pixel_scale ||
               cells[7] != r.region) {
      throw ValidationError("report CSV: rows disagree on the report-level columns");
    }
    r.rows.push_back(row);
  }
  return r;
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json p = std::isinf(row.psnr) ? nlohmann::json("inf") : nlohmann::json(row.psnr);
    rows.push_back({{"regime", to_string(row.regime)},
                    {"mean_l1", row.mean_l1},
                    {"mean_l2", row.mean_l2},
                    {"psnr", p}});
  }
  j = {{"rows", rows},
       {"mask_size", r.mask_size},
       {"n_images", r.n_images},
       {"pixel_scale", r.pixel_scale},
       {"region", r.region},
       {"psnr_unit", "dB"}};
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
  try {
    r.rows.clear();
    for (const auto& row : j.at("rows")) {
      const auto& p = row.at("psnr");
      r.rows.push_back({parse_regime(row.at("regime").get<std::string>()), row.at("mean_l1").get<Scalar>(),
                        row.at("mean_l2").get<Scalar>(),
                        p.is_string() ? parse_scalar(p.get<std::string>()) : p.get<Scalar>()});
    }
    r.mask_size = j.at("mask_size").get<int>();
    r.n_images = j.at("n_images").get<int>();
    r.pixel_scale = j.at("pixel_scale").get<std::string>();
    r.region = j.at("region").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("report JSON: ") + e.what());
  }
}

}  // namespace inpaint
