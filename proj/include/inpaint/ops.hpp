#pragma once

#include <span>

#include "inpaint/autograd.hpp"

namespace inpaint {

// Elementwise arithmetic on equal shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, Scalar factor);

// Reductions to a (1,1,1,1) scalar.
Var sum(const Var& a);
Var mean(const Var& a);

Var relu(const Var& x);
Var leaky_relu(const Var& x, Scalar slope);
Var tanh(const Var& x);
Var sigmoid(const Var& x);

// 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise.
Var smooth_l1(const Var& x);

// x * mask with the mask broadcast over channels. mask is (N,1,H,W) or the
// full shape of x and must be binary. The input gradient is written as +0.0
// wherever the mask is 0.
Var apply_mask(const Var& x, const Tensor& mask);

// mask * generated + (1 - mask) * gt, elementwise with channel broadcast.
Var compose(const Var& generated, const Tensor& gt, const Tensor& mask);

struct ConvGeometry {
  int stride = 1;
  int pad = 0;
  int dilation = 1;
};

// weight (Cout, Cin, k, k); bias (1, Cout, 1, 1) or undefined.
Var conv2d(const Var& x, const Var& weight, const Var& bias, ConvGeometry g);

// weight (Cin, Cout, k, k); output side (H - 1) * stride - 2 * pad + k.
Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias,
                     int stride, int pad);

enum class BatchNormMode {
  kTrain,        // batch statistics, running statistics updated
  kTrainFrozen,  // batch statistics, running statistics untouched
  kEval,         // running statistics
};

// gamma/beta/running_* are (1, C, 1, 1). Running statistics are updated in
// place in kTrain mode.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta,
               Var& running_mean, Var& running_var, BatchNormMode mode,
               Scalar momentum, Scalar eps);

Var max_pool2x2(const Var& x);

// (N, C, H, W) -> (N, C*H*W, 1, 1).
Var flatten(const Var& x);

// x (N, F, 1, 1), weight (O, F, 1, 1), bias (1, O, 1, 1) -> (N, O, 1, 1).
Var linear(const Var& x, const Var& weight, const Var& bias);

// Fixed per-channel y = x * scale[c] + shift[c].
Var channel_affine(const Var& x, std::span<const Scalar> scale,
                   std::span<const Scalar> shift);

// Mean binary cross-entropy of sigmoid(logits) against targets in [0, 1].
// Probabilities are clamped to [eps, 1 - eps] inside the logs; the gradient
// is zero where the clamp is active.
Var bce_with_logits(const Var& logits, std::span<const Scalar> targets,
                    Scalar eps);

}  // namespace inpaint
