#include "inpaint/losses.hpp"

#include <algorithm>
#include <cmath>

#include "inpaint/errors.hpp"
#include "inpaint/ops.hpp"
#include "json_fields.hpp"

namespace inpaint {

namespace {

namespace jf = json_fields;

void check_range(const std::array<Scalar, 2>& r, const char* field) {
  if (!(r[0] >= 0 && r[0] <= r[1] && r[1] <= 1)) {
    throw ConfigError(std::string("/") + field + ": range must satisfy 0 <= lo <= hi <= 1");
  }
}

Scalar bce(Scalar p, Scalar label) {
  const Scalar q = std::clamp(p, kProbabilityEpsilon, 1 - kProbabilityEpsilon);
  return -(label * std::log(q) + (1 - label) * std::log1p(-q));
}

void check_probabilities(std::span<const Scalar> p, const char* what) {
  if (p.empty()) throw ValidationError(std::string(what) + ": empty batch");
  for (Scalar v : p) {
    if (std::isnan(v)) throw NumericError(std::string(what) + ": NaN probability");
    if (v < 0 || v > 1) throw ValidationError(std::string(what) + ": probability outside [0,1]");
  }
}

Scalar mean_bce(std::span<const Scalar> p, std::span<const Scalar> labels) {
  if (p.size() != labels.size()) throw ValidationError("label count does not match batch");
  Scalar s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += bce(p[i], labels[i]);
  return s / static_cast<Scalar>(p.size());
}

}  // namespace

void LossWeights::validate() const {
  if (!(lambda1 >= 0) || !std::isfinite(lambda1)) throw ConfigError("/lambda1: must be finite and >= 0");
  if (!(lambda2 >= 0) || !std::isfinite(lambda2)) throw ConfigError("/lambda2: must be finite and >= 0");
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (!(alpha[i] >= 0) || !std::isfinite(alpha[i])) {
      throw ConfigError("/alpha/" + std::to_string(i) + ": must be finite and >= 0");
    }
  }
  check_range(real_label_range, "real_label_range");
  check_range(fake_label_range, "fake_label_range");
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"lambda1", w.lambda1},
       {"lambda2", w.lambda2},
       {"alpha", w.alpha},
       {"real_label_range", w.real_label_range},
       {"fake_label_range", w.fake_label_range},
       {"label_smoothing", w.label_smoothing}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  jf::read(j, "lambda1", w.lambda1);
  jf::read(j, "lambda2", w.lambda2);
  jf::read(j, "alpha", w.alpha);
  jf::read(j, "real_label_range", w.real_label_range);
  jf::read(j, "fake_label_range", w.fake_label_range);
  jf::read(j, "label_smoothing", w.label_smoothing);
  w.validate();
}

Scalar smooth_l1(Scalar x) {
  if (std::isnan(x)) throw NumericError("smooth_l1: NaN input");
  const Scalar a = std::abs(x);
  return a < 1 ? 0.5 * x * x : a - 0.5;
}

Tensor smooth_l1(const Tensor& residual) {
  Tensor out(residual.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = smooth_l1(residual[i]);
  return out;
}

Var reconstruction_loss(const Var& generated, const Tensor& gt, const Tensor& mask) {
  const Shape s = generated.shape();
  if (gt.shape() != s) {
    throw ValidationError("reconstruction_loss: generated " + s.str() + " vs gt " + gt.shape().str());
  }
  const Scalar masked_pixels = mask.sum();
  if (masked_pixels <= 0) {
    throw DegenerateMaskError("reconstruction_loss: mask is empty, loss undefined");
  }
  const Scalar per_pixel = mask.shape().c == 1 ? static_cast<Scalar>(s.c) : Scalar(1);
  // Outside the mask generated is zeroed; zero gt there too so the residual
  // vanishes exactly.
  Tensor gt_masked = gt;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x)
          if (mask.at(n, mask.shape().c == 1 ? 0 : c, y, x) == 0) gt_masked.at(n, c, y, x) = 0;
  const Var r = sub(apply_mask(generated, mask), Var(gt_masked));
  return scale(sum(smooth_l1(r)), 1 / (masked_pixels * per_pixel));
}

Scalar reconstruction_loss(const ImageTensor& generated, const ImageTensor& gt, const Mask& mask) {
  if (generated.range() != gt.range()) {
    throw ValidationError("reconstruction_loss: range tags differ");
  }
  NoGradGuard ng;
  const Mask masks[] = {mask};
  return reconstruction_loss(Var(to_nchw(generated)), to_nchw(gt), masks_to_nchw(masks)).item();
}

std::vector<Scalar> smooth_labels(LabelKind kind, int n, Rng& rng, const LossWeights& weights) {
  if (n < 1) throw ValidationError("smooth_labels: n must be >= 1");
  const auto& r = kind == LabelKind::kReal ? weights.real_label_range : weights.fake_label_range;
  std::uniform_real_distribution<Scalar> dist(r[0], r[1]);
  std::vector<Scalar> out(n);
  for (auto& v : out) v = r[0] == r[1] ? r[0] : dist(rng);
  return out;
}

Scalar adversarial_d_loss(std::span<const Scalar> d_real, std::span<const Scalar> d_fake,
                          const LossWeights& weights, Rng& rng) {
  check_probabilities(d_real, "adversarial_d_loss(real)");
  check_probabilities(d_fake, "adversarial_d_loss(fake)");
  std::vector<Scalar> yr(d_real.size(), 1), yf(d_fake.size(), 0);
  if (weights.label_smoothing) {
    yr = smooth_labels(LabelKind::kReal, static_cast<int>(d_real.size()), rng, weights);
    yf = smooth_labels(LabelKind::kFake, static_cast<int>(d_fake.size()), rng, weights);
  }
  return mean_bce(d_real, yr) + mean_bce(d_fake, yf);
}

Scalar adversarial_d_loss(std::span<const Scalar> d_real, std::span<const Scalar> d_fake,
                          std::span<const Scalar> real_labels,
                          std::span<const Scalar> fake_labels) {
  check_probabilities(d_real, "adversarial_d_loss(real)");
  check_probabilities(d_fake, "adversarial_d_loss(fake)");
  return mean_bce(d_real, real_labels) + mean_bce(d_fake, fake_labels);
}

Var adversarial_d_loss(const Var& real_logits, const Var& fake_logits,
                       std::span<const Scalar> real_labels,
                       std::span<const Scalar> fake_labels) {
  return add(bce_with_logits(real_logits, real_labels, kProbabilityEpsilon),
             bce_with_logits(fake_logits, fake_labels, kProbabilityEpsilon));
}

Scalar adversarial_g_loss(std::span<const Scalar> d_fake) {
  check_probabilities(d_fake, "adversarial_g_loss");
  const std::vector<Scalar> ones(d_fake.size(), 1);
  return mean_bce(d_fake, ones);
}

Var adversarial_g_loss(const Var& fake_logits) {
  const std::vector<Scalar> ones(fake_logits.value().size(), 1);
  return bce_with_logits(fake_logits, ones, kProbabilityEpsilon);
}

Var perceptual_loss(const FeatureExtractor& extractor, const Var& generated, const Tensor& gt,
                    const Tensor& mask, const LossWeights& weights) {
  if (extractor.taps().empty()) throw ConfigError("perceptual_loss: no layer taps");
  if (weights.alpha.size() != extractor.taps().size()) {
    throw ConfigError("/alpha: expected " + std::to_string(extractor.taps().size()) +
                      " layer weights, got " + std::to_string(weights.alpha.size()));
  }
  if (gt.shape() != generated.shape()) {
    throw ValidationError("perceptual_loss: generated " + generated.shape().str() + " vs gt " +
                          gt.shape().str());
  }
  std::vector<Var> target;
  {
    NoGradGuard ng;
    target = extractor.extract(apply_mask(Var(gt), mask));
  }
  const std::vector<Var> feats = extractor.extract(apply_mask(generated, mask));
  Var total;
  for (std::size_t l = 0; l < feats.size(); ++l) {
    const Var term = scale(mean(smooth_l1(sub(target[l], feats[l]))), weights.alpha[l]);
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

Scalar hybrid_loss(const LossParts& parts, const LossWeights& weights) {
  if (std::isnan(parts.reconstruction)) throw NumericError("hybrid_loss: reconstruction term is NaN");
  if (std::isnan(parts.adversarial)) throw NumericError("hybrid_loss: adversarial term is NaN");
  if (std::isnan(parts.perceptual)) throw NumericError("hybrid_loss: perceptual term is NaN");
  return parts.reconstruction + weights.lambda1 * parts.adversarial +
         weights.lambda2 * parts.perceptual;
}

Var hybrid_loss(const Var& reconstruction, const Var& adversarial, const Var& perceptual,
                const LossWeights& weights) {
  LossParts parts;
  if (reconstruction.defined()) parts.reconstruction = reconstruction.item();
  if (adversarial.defined()) parts.adversarial = adversarial.item();
  if (perceptual.defined()) parts.perceptual = perceptual.item();
  hybrid_loss(parts, weights);  // NaN checks

  Var total;
  auto accumulate = [&](const Var& term, Scalar w) {
    if (!term.defined()) return;
    const Var t = w == 1 ? term : scale(term, w);
    total = total.defined() ? add(total, t) : t;
  };
  accumulate(reconstruction, 1);
  accumulate(adversarial, weights.lambda1);
  accumulate(perceptual, weights.lambda2);
  if (!total.defined()) total = Var(Tensor(Shape{1, 1, 1, 1}, 0));
  return total;
}

}  // namespace inpaint
