#include "inpaint/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "inpaint/errors.hpp"

namespace inpaint {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
         std::to_string(h) + "," + std::to_string(w) + ")";
}

Tensor::Tensor(Shape shape, Scalar fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor::Tensor(Shape shape, std::vector<Scalar> values)
    : shape_(shape), data_(std::move(values)) {
  if (data_.size() != shape_.size()) {
    throw ValidationError("tensor of shape " + shape_.str() + " needs " +
                          std::to_string(shape_.size()) + " values, got " +
                          std::to_string(data_.size()));
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.size() != size()) {
    throw ValidationError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return Tensor(shape, data_);
}

Tensor Tensor::slice_batch(int first, int count) const {
  if (first < 0 || count < 0 || first + count > shape_.n) {
    throw ValidationError("batch slice out of range for " + shape_.str());
  }
  Shape s = shape_;
  s.n = count;
  const auto item = shape_.item();
  std::vector<Scalar> v(data_.begin() + static_cast<std::ptrdiff_t>(first * item),
                        data_.begin() + static_cast<std::ptrdiff_t>((first + count) * item));
  return Tensor(s, std::move(v));
}

void Tensor::fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

Scalar Tensor::sum() const {
  Scalar s = 0;
  for (Scalar v : data_) s += v;
  return s;
}

Scalar Tensor::max_abs() const {
  Scalar m = 0;
  for (Scalar v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](Scalar v) { return std::isfinite(v); });
}

Tensor concat_batch(std::span<const Tensor> parts) {
  if (parts.empty()) return Tensor();
  Shape s = parts.front().shape();
  s.n = 0;
  for (const auto& p : parts) {
    const Shape& ps = p.shape();
    if (ps.c != s.c || ps.h != s.h || ps.w != s.w) {
      throw ValidationError("concat_batch: mismatched item shapes " +
                            parts.front().shape().str() + " vs " + ps.str());
    }
    s.n += ps.n;
  }
  std::vector<Scalar> v;
  v.reserve(s.size());
  for (const auto& p : parts) v.insert(v.end(), p.values().begin(), p.values().end());
  return Tensor(s, std::move(v));
}

}  // namespace inpaint
