#pragma once

// Two brute-force receptive-field measurements, both independent of the
// closed-form accumulation in compute_receptive_field():
//
//  * naive_impulse_rf: 1-D one-hot impulses pushed through a ones-weight
//    conv stack written with plain loops; counts the input positions that
//    reach the centre output unit.
//  * network_impulse_rf: the built 2-D generator with ones weights; the
//    non-zero extent of d(centre bottleneck unit)/d(input).

#include <algorithm>
#include <vector>

#include "inpaint/networks.hpp"
#include "inpaint/ops.hpp"

namespace inpaint::testing {

struct Layer1d {
  int kernel;
  int stride;
  int pad;
  int dilation;
};

inline std::vector<Layer1d> encoder_layers(const GeneratorSpec& spec) {
  std::vector<Layer1d> layers;
  const int k = spec.conv_kernel;
  for (int l = 0; l < spec.levels; ++l) {
    for (int j = 0; j < spec.convs_per_level; ++j) {
      layers.push_back({k, (l > 0 && j == 0) ? 2 : 1, k / 2, 1});
    }
  }
  for (int d : spec.dilation_rates) layers.push_back({k, 1, (k / 2) * d, d});
  return layers;
}

inline std::vector<double> conv1d_ones(const std::vector<double>& in, const Layer1d& l) {
  const int n = static_cast<int>(in.size());
  const int out_n = (n + 2 * l.pad - l.dilation * (l.kernel - 1) - 1) / l.stride + 1;
  std::vector<double> out(std::max(out_n, 0), 0.0);
  for (int o = 0; o < out_n; ++o) {
    for (int t = 0; t < l.kernel; ++t) {
      const int i = o * l.stride - l.pad + t * l.dilation;
      if (i >= 0 && i < n) out[o] += in[i];
    }
  }
  return out;
}

inline int naive_impulse_rf(const GeneratorSpec& spec, int length) {
  const auto layers = encoder_layers(spec);
  int out_len = length;
  for (const auto& l : layers) {
    out_len = (out_len + 2 * l.pad - l.dilation * (l.kernel - 1) - 1) / l.stride + 1;
  }
  const int target = out_len / 2;
  int lo = length, hi = -1;
  for (int i = 0; i < length; ++i) {
    std::vector<double> x(length, 0.0);
    x[i] = 1.0;
    for (const auto& l : layers) x = conv1d_ones(x, l);
    if (x[target] != 0.0) {
      lo = std::min(lo, i);
      hi = std::max(hi, i);
    }
  }
  return hi < lo ? 0 : hi - lo + 1;
}

// Generator conv weights set to one, biases to zero, BN to identity scale.
inline int network_impulse_rf(const GeneratorSpec& spec, int side) {
  Generator g(spec, 1);
  for (auto& nv : g.named_parameters()) {
    Var v = nv.var;
    const bool is_bias = nv.name.ends_with(".bias") || nv.name.ends_with(".beta");
    v.mutable_value().fill(is_bias ? 0.0 : 1.0);
  }
  Var input(Tensor(Shape{1, 4, side, side}, 1.0), true);
  const Var features = g.encode(input, BatchNormMode::kEval);
  const Shape fs = features.shape();
  Tensor pick(fs, 0.0);
  pick.at(0, 0, fs.h / 2, fs.w / 2) = 1.0;
  sum(mul(features, Var(pick))).backward();
  int top = side, bottom = -1, left = side, right = -1;
  const Tensor& grad = input.grad();
  for (int c = 0; c < 4; ++c) {
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        if (grad.at(0, c, y, x) != 0.0) {
          top = std::min(top, y);
          bottom = std::max(bottom, y);
          left = std::min(left, x);
          right = std::max(right, x);
        }
      }
    }
  }
  const int height = bottom - top + 1;
  const int width = right - left + 1;
  return height == width ? height : -1;
}

}  // namespace inpaint::testing
