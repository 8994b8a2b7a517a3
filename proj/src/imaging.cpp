#include "inpaint/imaging.hpp"

#include <algorithm>
#include <cmath>

#include "inpaint/errors.hpp"

namespace inpaint {

namespace {

std::string dims(int h, int w) { return std::to_string(h) + "x" + std::to_string(w); }

void require_same_dims(const ImageTensor& img, const Mask& mask, const char* op) {
  if (img.height() != mask.height() || img.width() != mask.width()) {
    throw ValidationError(std::string(op) + ": image " + dims(img.height(), img.width()) +
                          " vs mask " + dims(mask.height(), mask.width()));
  }
}

}  // namespace

std::string to_string(RangeTag tag) {
  switch (tag) {
    case RangeTag::kUnit: return "unit";
    case RangeTag::kSigned: return "signed";
    case RangeTag::kRaw: return "raw";
  }
  return "?";
}

std::pair<Scalar, Scalar> range_bounds(RangeTag tag) {
  switch (tag) {
    case RangeTag::kUnit: return {0, 1};
    case RangeTag::kSigned: return {-1, 1};
    case RangeTag::kRaw: return {0, 255};
  }
  return {0, 0};
}

ImageTensor::ImageTensor(int height, int width, int channels, RangeTag range,
                         std::vector<Scalar> values)
    : height_(height),
      width_(width),
      channels_(channels),
      range_(range),
      values_(std::move(values)) {
  if (height < 1 || width < 1) {
    throw ValidationError("image dimensions must be positive, got " + dims(height, width));
  }
  if (channels != 1 && channels != 3 && channels != 4) {
    throw ValidationError("image channels must be 1, 3 or 4, got " +
                          std::to_string(channels));
  }
  if (values_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw ValidationError("image value count does not match " + dims(height, width) + "x" +
                          std::to_string(channels));
  }
  const auto [lo, hi] = range_bounds(range);
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const Scalar v = values_[i];
    if (!(v >= lo && v <= hi)) {
      throw ValidationError("image value " + std::to_string(v) + " at index " +
                            std::to_string(i) + " outside " + to_string(range) + " range");
    }
  }
}

ImageTensor ImageTensor::filled(int height, int width, int channels, RangeTag range,
                                Scalar value) {
  return ImageTensor(height, width, channels, range,
                     std::vector<Scalar>(static_cast<std::size_t>(height) * width * channels,
                                         value));
}

Mask::Mask(int height, int width, std::vector<std::uint8_t> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height < 1 || width < 1) {
    throw ValidationError("mask dimensions must be positive, got " + dims(height, width));
  }
  if (values_.size() != static_cast<std::size_t>(height) * width) {
    throw ValidationError("mask value count does not match " + dims(height, width));
  }
  for (auto v : values_) {
    if (v > 1) throw ValidationError("mask values must be 0 or 1");
  }
}

Mask Mask::zeros(int height, int width) {
  return Mask(height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 0));
}

Mask Mask::ones(int height, int width) {
  return Mask(height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 1));
}

Mask Mask::square(int height, int width, int top, int left, int side) {
  if (top < 0 || left < 0 || side < 0 || top + side > height || left + side > width) {
    throw ValidationError("square mask exceeds image bounds");
  }
  Mask m = zeros(height, width);
  for (int y = top; y < top + side; ++y) {
    for (int x = left; x < left + side; ++x) m.set(y, x, true);
  }
  return m;
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), 1));
}

void MaskSpec::validate(int height, int width) const {
  if (min_size <= 0 || min_size > max_size || max_size > std::min(height, width)) {
    throw ConfigError("mask spec [" + std::to_string(min_size) + ", " +
                      std::to_string(max_size) + "] invalid for image " + dims(height, width));
  }
}

ImageTensor normalize(const ImageTensor& raw) {
  if (raw.range() != RangeTag::kRaw) {
    throw ValidationError("normalize expects a raw [0,255] image, got " + to_string(raw.range()));
  }
  std::vector<Scalar> v(raw.values().begin(), raw.values().end());
  for (auto& x : v) x = (x - 127.5) / 127.5;
  return ImageTensor(raw.height(), raw.width(), raw.channels(), RangeTag::kSigned, std::move(v));
}

ImageTensor denormalize(const ImageTensor& img) {
  if (img.range() != RangeTag::kSigned) {
    throw ValidationError("denormalize expects a signed [-1,1] image, got " +
                          to_string(img.range()));
  }
  std::vector<Scalar> v(img.values().begin(), img.values().end());
  for (auto& x : v) x = std::clamp(x * 127.5 + 127.5, 0.0, 255.0);
  return ImageTensor(img.height(), img.width(), img.channels(), RangeTag::kRaw, std::move(v));
}

ImageTensor to_unit(const ImageTensor& img) {
  std::vector<Scalar> v(img.values().begin(), img.values().end());
  switch (img.range()) {
    case RangeTag::kUnit: break;
    case RangeTag::kSigned:
      for (auto& x : v) x = (x + 1) / 2;
      break;
    case RangeTag::kRaw:
      for (auto& x : v) x /= 255;
      break;
  }
  return ImageTensor(img.height(), img.width(), img.channels(), RangeTag::kUnit, std::move(v));
}

Mask sample_mask(const MaskSpec& spec, int height, int width, Rng& rng) {
  spec.validate(height, width);
  const int side = std::uniform_int_distribution<int>(spec.min_size, spec.max_size)(rng);
  const int top = std::uniform_int_distribution<int>(0, height - side)(rng);
  const int left = std::uniform_int_distribution<int>(0, width - side)(rng);
  return Mask::square(height, width, top, left, side);
}

Mask center_mask(int height, int width, int side) {
  if (side < 1 || side > std::min(height, width)) {
    throw ConfigError("center mask side " + std::to_string(side) + " invalid for image " +
                      dims(height, width));
  }
  return Mask::square(height, width, (height - side) / 2, (width - side) / 2, side);
}

Corrupted corrupt(const ImageTensor& gt, const Mask& mask) {
  require_same_dims(gt, mask, "corrupt");
  if (gt.channels() != 3) throw ValidationError("corrupt expects an RGB image");
  const int h = gt.height(), w = gt.width();
  std::vector<Scalar> rgb(static_cast<std::size_t>(h) * w * 3);
  std::vector<Scalar> four(static_cast<std::size_t>(h) * w * 4);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool missing = mask.at(y, x) != 0;
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      for (int c = 0; c < 3; ++c) {
        const Scalar v = missing ? Scalar(0) : gt.at(y, x, c);
        rgb[p * 3 + c] = v;
        four[p * 4 + c] = v;
      }
      four[p * 4 + 3] = missing ? 1 : 0;
    }
  }
  return {ImageTensor(h, w, 3, gt.range(), std::move(rgb)),
          ImageTensor(h, w, 4, gt.range(), std::move(four))};
}

ImageTensor compose_completion(const ImageTensor& generated, const ImageTensor& gt,
                               const Mask& mask) {
  if (generated.height() != gt.height() || generated.width() != gt.width() ||
      generated.channels() != gt.channels()) {
    throw ValidationError("compose_completion: generated and gt shapes differ");
  }
  if (generated.range() != gt.range()) {
    throw ValidationError("compose_completion: range tags differ");
  }
  require_same_dims(gt, mask, "compose_completion");
  std::vector<Scalar> v(gt.values().begin(), gt.values().end());
  const int c = gt.channels();
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!mask.at(y, x)) continue;
      for (int k = 0; k < c; ++k) v[gt.offset(y, x, k)] = generated.at(y, x, k);
    }
  }
  return ImageTensor(gt.height(), gt.width(), c, gt.range(), std::move(v));
}

Tensor to_nchw(std::span<const ImageTensor> images) {
  if (images.empty()) return Tensor();
  const ImageTensor& first = images.front();
  const Shape s{static_cast<int>(images.size()), first.channels(), first.height(), first.width()};
  Tensor t(s);
  for (int n = 0; n < s.n; ++n) {
    const ImageTensor& img = images[n];
    if (img.channels() != s.c || img.height() != s.h || img.width() != s.w) {
      throw ValidationError("to_nchw: images in a batch must share a shape");
    }
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) t.at(n, c, y, x) = img.at(y, x, c);
      }
    }
  }
  return t;
}

Tensor to_nchw(const ImageTensor& image) { return to_nchw(std::span(&image, 1)); }

ImageTensor from_nchw(const Tensor& t, int n, RangeTag range) {
  const Shape s = t.shape();
  const auto [lo, hi] = range_bounds(range);
  std::vector<Scalar> v(static_cast<std::size_t>(s.h) * s.w * s.c);
  for (int c = 0; c < s.c; ++c) {
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        v[(static_cast<std::size_t>(y) * s.w + x) * s.c + c] = std::clamp(t.at(n, c, y, x), lo, hi);
      }
    }
  }
  return ImageTensor(s.h, s.w, s.c, range, std::move(v));
}

Tensor masks_to_nchw(std::span<const Mask> masks) {
  if (masks.empty()) return Tensor();
  const int h = masks.front().height(), w = masks.front().width();
  Tensor t(Shape{static_cast<int>(masks.size()), 1, h, w});
  for (std::size_t n = 0; n < masks.size(); ++n) {
    if (masks[n].height() != h || masks[n].width() != w) {
      throw ValidationError("masks_to_nchw: masks in a batch must share a shape");
    }
    for (std::size_t i = 0; i < masks[n].values().size(); ++i) {
      t[n * t.shape().item() + i] = masks[n].values()[i];
    }
  }
  return t;
}

Mask mask_from_nchw(const Tensor& t, int n) {
  const Shape s = t.shape();
  std::vector<std::uint8_t> v(s.plane());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = t[n * s.item() + i] != 0 ? 1 : 0;
  return Mask(s.h, s.w, std::move(v));
}

}  // namespace inpaint
