#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace inpaint {

using Scalar = double;

// NCHW extent. Dense layers use (N, F, 1, 1).
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t item() const { return static_cast<std::size_t>(c) * h * w; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = 0);
  Tensor(Shape shape, std::vector<Scalar> values);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::span<Scalar> values() { return data_; }
  std::span<const Scalar> values() const { return data_; }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  Scalar operator[](std::size_t i) const { return data_[i]; }

  Scalar& at(int n, int c, int h, int w) {
    return data_[index(n, c, h, w)];
  }
  Scalar at(int n, int c, int h, int w) const {
    return data_[index(n, c, h, w)];
  }

  std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) *
               shape_.w +
           w;
  }

  // Same data viewed with another shape of equal element count.
  Tensor reshaped(Shape shape) const;
  // Copy of items [first, first + count) along the batch axis.
  Tensor slice_batch(int first, int count) const;

  void fill(Scalar v);
  Scalar sum() const;
  Scalar max_abs() const;
  bool all_finite() const;

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<Scalar> data_;
};

// Concatenates tensors of equal (c, h, w) along the batch axis.
Tensor concat_batch(std::span<const Tensor> parts);

}  // namespace inpaint
