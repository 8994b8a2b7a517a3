#pragma once

// Finite-difference oracle shared by the unit and acceptance suites. It only
// evaluates forward values, never the tape, so it stays independent of the
// backward implementations it checks.

#include <cmath>
#include <functional>
#include <random>

#include "inpaint/tensor.hpp"

namespace inpaint::testing {

// Central differences of f at x, one coordinate at a time.
inline Tensor numeric_gradient(const std::function<Scalar(const Tensor&)>& f, Tensor x,
                               Scalar h = 1e-6) {
  Tensor g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Scalar orig = x[i];
    x[i] = orig + h;
    const Scalar up = f(x);
    x[i] = orig - h;
    const Scalar down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||); 0 when both are zero.
inline Scalar relative_error(const Tensor& a, const Tensor& b) {
  Scalar diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const Scalar denom = std::sqrt(std::max(na, nb));
  return denom == 0 ? 0 : std::sqrt(diff) / denom;
}

inline Tensor random_tensor(Shape s, std::uint64_t seed, Scalar lo = -1, Scalar hi = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Scalar> d(lo, hi);
  Tensor t(s);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

}  // namespace inpaint::testing
