#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "inpaint/errors.hpp"
#include "inpaint/eval.hpp"

using namespace inpaint;

namespace {

ImageTensor constant_unit(int side, Scalar v) { return ImageTensor::filled(side, side, 3, RangeTag::kUnit, v); }

ImageTensor noisy_unit(int side, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<Scalar> u(0.0, 1.0);
  std::vector<Scalar> v(static_cast<std::size_t>(side) * side * 3);
  for (auto& x : v) x = u(rng);
  return ImageTensor(side, side, 3, RangeTag::kUnit, std::move(v));
}

DatasetSplits synthetic_splits(int size = 128, int test = 5) {
  DatasetSpec s;
  s.synthetic = SyntheticSpec{2, test, size, 11};
  s.target_size = size;
  return ingest_dataset(s);
}

Scalar oracle_psnr(Scalar mse) { return 20.0 * std::log10(1.0) - 10.0 * std::log10(mse); }

}  // namespace

TEST_CASE("pixel metrics closed forms") {
  const Mask m = Mask::square(16, 16, 4, 4, 6);
  const ImageTensor gt = noisy_unit(16, 1);
  const PixelMetrics same = pixel_metrics(gt, gt, m);
  CHECK(same.l1 == 0);
  CHECK(same.l2 == 0);

  const ImageTensor half = constant_unit(16, 0.5);
  ImageTensor shifted = half;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c) shifted.set(y, x, c, m.at(y, x) ? 0.6 : 0.5);
  const PixelMetrics off = pixel_metrics(shifted, half, m);
  CHECK(off.l1 == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(off.l2 == doctest::Approx(0.01).epsilon(1e-12));

  ImageTensor outside = half;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c) outside.set(y, x, c, m.at(y, x) ? 0.5 : 0.9);
  const PixelMetrics none = pixel_metrics(outside, half, m);
  CHECK(none.l1 == 0);
  CHECK(none.l2 == 0);

  // Zero output against a constant 0.5 field.
  const Mask center = center_mask(128, 128, 56);
  CHECK(pixel_metrics(constant_unit(128, 0.0), constant_unit(128, 0.5), center).l1 == 0.5);

  CHECK_THROWS_AS(pixel_metrics(gt, gt, Mask::zeros(16, 16)), DegenerateMaskError);
  CHECK_THROWS_AS(pixel_metrics(gt, noisy_unit(8, 1), m), ValidationError);
}

TEST_CASE("metrics use the unit scale whatever the input range") {
  const Mask m = Mask::ones(4, 4);
  const ImageTensor a = ImageTensor::filled(4, 4, 3, RangeTag::kRaw, 255.0);
  const ImageTensor b = ImageTensor::filled(4, 4, 3, RangeTag::kSigned, -1.0);
  const PixelMetrics p = pixel_metrics(a, b, m);
  CHECK(p.l1 == 1.0);
  CHECK(p.l2 == 1.0);
}

TEST_CASE("region restriction holds for random perturbations") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Mask m = sample_mask(MaskSpec{3, 10}, 16, 16, rng);
    const ImageTensor gt = noisy_unit(16, trial);
    const ImageTensor comp = noisy_unit(16, 1000 + trial);
    ImageTensor perturbed = comp;
    std::uniform_real_distribution<Scalar> u(0.0, 1.0);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        if (!m.at(y, x))
          for (int c = 0; c < 3; ++c) perturbed.set(y, x, c, u(rng));
    const PixelMetrics a = pixel_metrics(comp, gt, m);
    const PixelMetrics b = pixel_metrics(perturbed, gt, m);
    REQUIRE(a.l1 == b.l1);
    REQUIRE(a.l2 == b.l2);
  }
}

TEST_CASE("psnr closed forms, oracle and monotonicity") {
  CHECK(psnr(0.01) == doctest::Approx(20.0).epsilon(1e-14));
  CHECK(psnr(1.0) == 0.0);
  CHECK(std::isinf(psnr(0.0)));
  CHECK(psnr(0.0) > 0);
  CHECK_THROWS_AS(psnr(-1e-3), ValidationError);
  CHECK_THROWS_AS(psnr(std::numeric_limits<Scalar>::quiet_NaN()), ValidationError);

  Rng rng(9);
  std::uniform_real_distribution<Scalar> u(-8.0, 0.0);
  std::vector<Scalar> mses;
  for (int i = 0; i < 100; ++i) mses.push_back(std::pow(10.0, u(rng)));
  for (Scalar m : mses) REQUIRE(std::abs(psnr(m) - oracle_psnr(m)) < 1e-6);
  std::sort(mses.begin(), mses.end());
  for (std::size_t i = 1; i < mses.size(); ++i) REQUIRE(psnr(mses[i]) <= psnr(mses[i - 1]));

  // gt against gt + uniform noise.
  const ImageTensor gt = constant_unit(32, 0.5);
  ImageTensor noisy = gt;
  std::uniform_real_distribution<Scalar> n(-0.1, 0.1);
  Scalar sq = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) {
        const Scalar d = n(rng);
        noisy.set(y, x, c, 0.5 + d);
        sq += d * d;
      }
  const PixelMetrics p = pixel_metrics(noisy, gt, Mask::ones(32, 32));
  CHECK(std::abs(psnr(p.l2) - oracle_psnr(sq / (32.0 * 32 * 3))) < 1e-6);
}

TEST_CASE("shard sums merge to the same means") {
  const Mask m = center_mask(16, 16, 8);
  MetricSums whole, left, right;
  for (int i = 0; i < 6; ++i) {
    const ImageTensor gt = noisy_unit(16, i);
    const ImageTensor comp = noisy_unit(16, 100 + i);
    whole.add(comp, gt, m);
    (i < 3 ? left : right).add(comp, gt, m);
  }
  MetricSums merged = right;
  merged.merge(left);
  CHECK(merged.count == whole.count);
  CHECK(merged.means().l1 == doctest::Approx(whole.means().l1).epsilon(1e-14));
  CHECK(merged.means().l2 == doctest::Approx(whole.means().l2).epsilon(1e-14));
}

TEST_CASE("identity model is optimal and reports the infinity sentinel") {
  const DatasetSplits d = synthetic_splits();
  const MetricsReport r = evaluate(identity_completer(), d.test, EvalOptions{});
  REQUIRE(r.rows.size() == 2);
  CHECK(r.n_images == 5);
  CHECK(r.mask_size == 56);
  CHECK(r.region == "masked-only");
  for (const auto& row : r.rows) {
    CHECK(row.mean_l1 == 0);
    CHECK(row.mean_l2 == 0);
    CHECK(std::isinf(row.psnr));
  }
}

TEST_CASE("evaluate scores the composed output over the hole") {
  const DatasetSplits d = synthetic_splits(64, 3);
  EvalOptions o;
  o.mask_size = 20;
  o.regimes = {MaskRegime::kCenter};
  // Output -1 is 0 on the unit scale, so L1 is the mean unit gt over the hole.
  const Completer zero = [](const CompletionBatch& b) {
    Tensor t(b.gt.shape());
    t.fill(-1.0);
    return t;
  };
  const MetricsReport r = evaluate(zero, d.test, o);
  Scalar sum = 0, sq = 0;
  std::size_t count = 0;
  const Mask m = center_mask(64, 64, 20);
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    const ImageTensor gt = to_unit(d.test.preprocessed(i, nullptr));
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (m.at(y, x))
          for (int c = 0; c < 3; ++c) {
            sum += gt.at(y, x, c);
            sq += gt.at(y, x, c) * gt.at(y, x, c);
            ++count;
          }
  }
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].mean_l1 == doctest::Approx(sum / count).epsilon(1e-12));
  CHECK(r.rows[0].mean_l2 == doctest::Approx(sq / count).epsilon(1e-12));
  CHECK(std::abs(r.rows[0].psnr - 10 * std::log10(1 / r.rows[0].mean_l2)) < 1e-6);
}

TEST_CASE("random regime is seeded and masks lie inside the image") {
  for (std::size_t i = 0; i < 200; ++i) {
    const Mask a = regime_mask(MaskRegime::kRandom, 128, 56, 3, i);
    REQUIRE(a == regime_mask(MaskRegime::kRandom, 128, 56, 3, i));
    REQUIRE(a.count() == 56u * 56u);
  }
  CHECK_FALSE(regime_mask(MaskRegime::kRandom, 128, 56, 3, 0) == regime_mask(MaskRegime::kRandom, 128, 56, 4, 0));
  CHECK(regime_mask(MaskRegime::kCenter, 128, 56, 3, 7) == center_mask(128, 128, 56));
  CHECK_THROWS_AS(regime_mask(MaskRegime::kCenter, 32, 56, 0, 0), ConfigError);

  const DatasetSplits d = synthetic_splits(64, 3);
  EvalOptions o;
  o.mask_size = 24;
  o.seed = 17;
  const Completer half = [](const CompletionBatch& b) {
    Tensor t(b.gt.shape());
    t.fill(0.0);
    return t;
  };
  CHECK(evaluate(half, d.test, o) == evaluate(half, d.test, o));
}

TEST_CASE("reports render as text, CSV and JSON") {
  MetricsReport r;
  r.mask_size = 56;
  r.n_images = 100;
  r.rows = {{MaskRegime::kCenter, 0.123456789012345, 0.0436, psnr(0.0436)},
            {MaskRegime::kRandom, 0.0, 0.0, psnr(0.0)}};

  const std::string text = emit_report(r, ReportFormat::kText);
  CHECK(text.find("Mean L1") != std::string::npos);
  CHECK(text.find("Mean L2") != std::string::npos);
  CHECK(text.find("PSNR") != std::string::npos);
  CHECK(text.find("masked-only") != std::string::npos);
  CHECK(text.find("inf") != std::string::npos);

  const std::string csv = emit_report(r, ReportFormat::kCsv);
  CHECK(parse_report_csv(csv) == r);
  CHECK_THROWS_AS(parse_report_csv("nope\n"), ValidationError);

  const nlohmann::json j = nlohmann::json::parse(emit_report(r, ReportFormat::kJson));
  CHECK(j["region"] == "masked-only");
  CHECK(j["pixel_scale"] == "unit");
  CHECK(j["rows"][1]["psnr"] == "inf");
  CHECK(j.get<MetricsReport>() == r);
  CHECK(emit_report(r, ReportFormat::kJson) == emit_report(r, ReportFormat::kJson));

  CHECK(parse_report_format("csv") == ReportFormat::kCsv);
  CHECK_THROWS_AS(parse_report_format("xml"), ConfigError);
}

TEST_CASE("generator completer runs the network in inference mode") {
  const DatasetSplits d = synthetic_splits(32, 2);
  GeneratorSpec spec;
  spec.levels = 2;
  spec.encoder_channels = {4, 8};
  spec.dilation_rates = {1, 2};
  const Generator g(spec, 3);
  EvalOptions o;
  o.mask_size = 12;
  const MetricsReport a = evaluate(generator_completer(g), d.test, o);
  const MetricsReport b = evaluate(generator_completer(g), d.test, o);
  CHECK(a == b);
  for (const auto& row : a.rows) {
    CHECK(row.mean_l1 > 0);
    CHECK(std::isfinite(row.psnr));
  }
}
