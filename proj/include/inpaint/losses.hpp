#pragma once

#include <array>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "inpaint/autograd.hpp"
#include "inpaint/imaging.hpp"
#include "inpaint/nn.hpp"
#include "inpaint/perceptual.hpp"

namespace inpaint {

// Probabilities are clamped to [eps, 1 - eps] inside every log.
inline constexpr Scalar kProbabilityEpsilon = 1e-7;

struct LossWeights {
  Scalar lambda1 = 1.0;  // adversarial
  Scalar lambda2 = 1.0;  // perceptual
  std::vector<Scalar> alpha{1.0, 1.0, 1.0};
  std::array<Scalar, 2> real_label_range{0.8, 1.0};
  std::array<Scalar, 2> fake_label_range{0.0, 0.2};
  bool label_smoothing = true;

  void validate() const;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

// Scalar form of the smooth (Huber, delta 1) penalty. NaN -> NumericError.
Scalar smooth_l1(Scalar x);
Tensor smooth_l1(const Tensor& residual);

// Mean smooth-L1 of (generated - gt) over masked pixels x channels. mask is
// (N,1,H,W). The gradient at unmasked generated pixels is exactly +0.0.
// Throws DegenerateMaskError for an all-zero mask.
Var reconstruction_loss(const Var& generated, const Tensor& gt, const Tensor& mask);
Scalar reconstruction_loss(const ImageTensor& generated, const ImageTensor& gt,
                           const Mask& mask);

enum class LabelKind { kReal, kFake };

// n uniform draws from the real or fake label range.
std::vector<Scalar> smooth_labels(LabelKind kind, int n, Rng& rng,
                                  const LossWeights& weights = {});

// Discriminator loss on probabilities: BCE of real against real labels plus
// BCE of fake against fake labels. With smoothing off (weights) the labels
// are 1 and 0; otherwise fresh smoothed labels are drawn from rng.
Scalar adversarial_d_loss(std::span<const Scalar> d_real, std::span<const Scalar> d_fake,
                          const LossWeights& weights, Rng& rng);
Scalar adversarial_d_loss(std::span<const Scalar> d_real, std::span<const Scalar> d_fake,
                          std::span<const Scalar> real_labels,
                          std::span<const Scalar> fake_labels);
// Same, on discriminator logits, differentiable.
Var adversarial_d_loss(const Var& real_logits, const Var& fake_logits,
                       std::span<const Scalar> real_labels,
                       std::span<const Scalar> fake_labels);

// -mean(log D(completion)), hard target 1.
Scalar adversarial_g_loss(std::span<const Scalar> d_fake);
Var adversarial_g_loss(const Var& fake_logits);

// sum_l alpha_l * mean smooth_l1(phi_l(gt * M) - phi_l(generated * M)).
Var perceptual_loss(const FeatureExtractor& extractor, const Var& generated,
                    const Tensor& gt, const Tensor& mask, const LossWeights& weights);

struct LossParts {
  Scalar reconstruction = 0;
  Scalar adversarial = 0;
  Scalar perceptual = 0;
};

// L_r + lambda1 * L_a + lambda2 * L_p. NaN part -> NumericError naming it.
Scalar hybrid_loss(const LossParts& parts, const LossWeights& weights);
// Undefined parts are inactive and contribute nothing.
Var hybrid_loss(const Var& reconstruction, const Var& adversarial, const Var& perceptual,
                const LossWeights& weights);

}  // namespace inpaint
