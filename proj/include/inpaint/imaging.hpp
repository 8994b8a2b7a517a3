#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "inpaint/nn.hpp"
#include "inpaint/tensor.hpp"

namespace inpaint {

enum class RangeTag {
  kUnit,    // [0, 1]
  kSigned,  // [-1, 1]
  kRaw,     // [0, 255]
};

std::string to_string(RangeTag tag);
std::pair<Scalar, Scalar> range_bounds(RangeTag tag);

// Interleaved H x W x C image with a declared value range.
class ImageTensor {
 public:
  ImageTensor() = default;
  // Validates dimensions, channel count and that every value is in range.
  ImageTensor(int height, int width, int channels, RangeTag range,
              std::vector<Scalar> values);
  static ImageTensor filled(int height, int width, int channels, RangeTag range,
                            Scalar value);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  RangeTag range() const { return range_; }

  Scalar at(int y, int x, int c) const { return values_[offset(y, x, c)]; }
  // Unchecked write; callers keep values inside range().
  void set(int y, int x, int c, Scalar v) { values_[offset(y, x, c)] = v; }
  std::span<const Scalar> values() const { return values_; }

  std::size_t offset(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  RangeTag range_ = RangeTag::kRaw;
  std::vector<Scalar> values_;
};

// Binary H x W map; 1 marks a missing pixel.
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width, std::vector<std::uint8_t> values);
  static Mask zeros(int height, int width);
  static Mask ones(int height, int width);
  // Axis-aligned square of ones with top-left corner (top, left).
  static Mask square(int height, int width, int top, int left, int side);

  int height() const { return height_; }
  int width() const { return width_; }
  std::uint8_t at(int y, int x) const {
    return values_[static_cast<std::size_t>(y) * width_ + x];
  }
  void set(int y, int x, bool missing) {
    values_[static_cast<std::size_t>(y) * width_ + x] = missing ? 1 : 0;
  }
  std::span<const std::uint8_t> values() const { return values_; }
  std::size_t count() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> values_;
};

struct MaskSpec {
  int min_size = 48;
  int max_size = 80;

  // Throws ConfigError unless 0 < min_size <= max_size <= min(h, w).
  void validate(int height, int width) const;
};

// raw [0,255] -> signed [-1,1].
ImageTensor normalize(const ImageTensor& raw);
// signed [-1,1] -> raw [0,255], clamping drift outside the range.
ImageTensor denormalize(const ImageTensor& img);
// Any range -> unit [0,1].
ImageTensor to_unit(const ImageTensor& img);

// Square mask, side uniform in [min_size, max_size], placed uniformly so it
// lies fully inside the image.
Mask sample_mask(const MaskSpec& spec, int height, int width, Rng& rng);
// Centered square of the given side.
Mask center_mask(int height, int width, int side);

struct Corrupted {
  ImageTensor corrupted;  // RGB with masked pixels set to 0
  ImageTensor input4;     // corrupted RGB + mask channel
};

Corrupted corrupt(const ImageTensor& gt, const Mask& mask);

// mask * generated + (1 - mask) * gt.
ImageTensor compose_completion(const ImageTensor& generated, const ImageTensor& gt,
                               const Mask& mask);

// Packs images into an NCHW tensor (values copied unchanged).
Tensor to_nchw(std::span<const ImageTensor> images);
Tensor to_nchw(const ImageTensor& image);
// Item n of an NCHW tensor as an image; values are clamped to the range.
ImageTensor from_nchw(const Tensor& t, int n, RangeTag range);
// (N, 1, H, W) tensor of 0/1.
Tensor masks_to_nchw(std::span<const Mask> masks);
Mask mask_from_nchw(const Tensor& t, int n);

}  // namespace inpaint
