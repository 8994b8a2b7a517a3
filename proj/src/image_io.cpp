#include "inpaint/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "inpaint/errors.hpp"

namespace inpaint {

namespace {

ImageTensor from_bgr(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  std::vector<Scalar> v(static_cast<std::size_t>(rgb.rows) * rgb.cols * 3);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* row = rgb.ptr<std::uint8_t>(y);
    for (int i = 0; i < rgb.cols * 3; ++i) v[static_cast<std::size_t>(y) * rgb.cols * 3 + i] = row[i];
  }
  return ImageTensor(rgb.rows, rgb.cols, 3, RangeTag::kRaw, std::move(v));
}

cv::Mat to_bgr(const ImageTensor& raw) {
  if (raw.range() != RangeTag::kRaw || raw.channels() != 3) {
    throw ValidationError("PNG encoding expects a raw RGB image");
  }
  cv::Mat rgb(raw.height(), raw.width(), CV_8UC3);
  for (int y = 0; y < raw.height(); ++y) {
    auto* row = rgb.ptr<std::uint8_t>(y);
    for (int x = 0; x < raw.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        row[x * 3 + c] = static_cast<std::uint8_t>(std::lround(std::clamp(raw.at(y, x, c), 0.0, 255.0)));
      }
    }
  }
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

Mask from_gray(const cv::Mat& gray) {
  std::vector<std::uint8_t> v(static_cast<std::size_t>(gray.rows) * gray.cols);
  for (int y = 0; y < gray.rows; ++y) {
    const auto* row = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < gray.cols; ++x) v[static_cast<std::size_t>(y) * gray.cols + x] = row[x] >= 128 ? 1 : 0;
  }
  return Mask(gray.rows, gray.cols, std::move(v));
}

cv::Mat to_gray(const Mask& mask) {
  cv::Mat gray(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y) {
    auto* row = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width(); ++x) row[x] = mask.at(y, x) ? 255 : 0;
  }
  return gray;
}

std::vector<std::uint8_t> encode(const cv::Mat& m) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", m, out)) throw Error("PNG encoding failed");
  return out;
}

cv::Mat decode(std::span<const std::uint8_t> bytes, int flags) {
  if (bytes.empty()) throw LoadError("empty image payload");
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1,
                    const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat m;
  try {
    m = cv::imdecode(buf, flags);
  } catch (const cv::Exception&) {
    m.release();
  }
  if (m.empty()) throw LoadError("payload is not a decodable PNG/JPEG image");
  return m;
}

cv::Mat read(const std::filesystem::path& path, int flags) {
  if (!std::filesystem::exists(path)) throw LoadError("image file not found: " + path.string());
  cv::Mat m = cv::imread(path.string(), flags);
  if (m.empty()) throw LoadError("cannot decode image file: " + path.string());
  return m;
}

}  // namespace

ImageTensor read_image(const std::filesystem::path& path) {
  return from_bgr(read(path, cv::IMREAD_COLOR));
}

ImageTensor decode_image(std::span<const std::uint8_t> bytes) {
  return from_bgr(decode(bytes, cv::IMREAD_COLOR));
}

void write_png(const std::filesystem::path& path, const ImageTensor& raw) {
  if (!cv::imwrite(path.string(), to_bgr(raw))) {
    throw Error("cannot write image file: " + path.string());
  }
}

std::vector<std::uint8_t> encode_png(const ImageTensor& raw) { return encode(to_bgr(raw)); }

Mask read_mask(const std::filesystem::path& path) {
  return from_gray(read(path, cv::IMREAD_GRAYSCALE));
}

Mask decode_mask(std::span<const std::uint8_t> bytes) {
  return from_gray(decode(bytes, cv::IMREAD_GRAYSCALE));
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  if (!cv::imwrite(path.string(), to_gray(mask))) {
    throw Error("cannot write mask file: " + path.string());
  }
}

std::vector<std::uint8_t> encode_mask_png(const Mask& mask) { return encode(to_gray(mask)); }

ImageTensor resize(const ImageTensor& raw, int height, int width) {
  if (raw.height() == height && raw.width() == width) return raw;
  const int c = raw.channels();
  cv::Mat src(raw.height(), raw.width(), CV_64FC(c),
              const_cast<Scalar*>(raw.values().data()));
  cv::Mat dst;
  const bool shrinking = height < raw.height() && width < raw.width();
  cv::resize(src, dst, cv::Size(width, height), 0, 0,
             shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
  const auto [lo, hi] = range_bounds(raw.range());
  std::vector<Scalar> v(static_cast<std::size_t>(height) * width * c);
  for (int y = 0; y < height; ++y) {
    const auto* row = dst.ptr<Scalar>(y);
    for (int i = 0; i < width * c; ++i) {
      v[static_cast<std::size_t>(y) * width * c + i] = std::clamp(row[i], lo, hi);
    }
  }
  return ImageTensor(height, width, c, raw.range(), std::move(v));
}

bool is_decodable_image(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return false;
  try {
    return cv::haveImageReader(path.string());
  } catch (const cv::Exception&) {
    return false;
  }
}

}  // namespace inpaint
