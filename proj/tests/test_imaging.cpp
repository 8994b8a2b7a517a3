#include <filesystem>
#include <set>

#include "doctest.h"
#include "inpaint/errors.hpp"
#include "inpaint/image_io.hpp"
#include "inpaint/imaging.hpp"

using namespace inpaint;

namespace {

ImageTensor random_image(int h, int w, RangeTag range, std::uint64_t seed) {
  Rng rng(seed);
  const auto [lo, hi] = range_bounds(range);
  std::uniform_real_distribution<Scalar> d(lo, hi);
  std::vector<Scalar> v(static_cast<std::size_t>(h) * w * 3);
  for (auto& x : v) x = d(rng);
  return ImageTensor(h, w, 3, range, std::move(v));
}

ImageTensor random_raw8(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> d(0, 255);
  std::vector<Scalar> v(static_cast<std::size_t>(h) * w * 3);
  for (auto& x : v) x = d(rng);
  return ImageTensor(h, w, 3, RangeTag::kRaw, std::move(v));
}

Mask random_mask(int h, int w, Rng& rng) {
  std::bernoulli_distribution d(0.4);
  std::vector<std::uint8_t> v(static_cast<std::size_t>(h) * w);
  for (auto& x : v) x = d(rng) ? 1 : 0;
  return Mask(h, w, std::move(v));
}

}  // namespace

TEST_CASE("normalize endpoints and midpoint") {
  const ImageTensor raw(1, 3, 1, RangeTag::kRaw, {0, 255, 127.5});
  const ImageTensor s = normalize(raw);
  CHECK(s.range() == RangeTag::kSigned);
  CHECK(s.at(0, 0, 0) == -1.0);
  CHECK(s.at(0, 1, 0) == 1.0);
  CHECK(s.at(0, 2, 0) == 0.0);
  CHECK_THROWS_AS(normalize(s), ValidationError);
}

TEST_CASE("denormalize inverts normalize on every 8-bit value and clamps") {
  std::vector<Scalar> all(256);
  for (int i = 0; i < 256; ++i) all[i] = i;
  const ImageTensor raw(16, 16, 1, RangeTag::kRaw, all);
  CHECK(denormalize(normalize(raw)) == raw);
  const ImageTensor s(1, 1, 1, RangeTag::kSigned, {-1.0});
  CHECK(denormalize(s).at(0, 0, 0) == 0.0);
}

TEST_CASE("image tensor invariants") {
  CHECK_THROWS_AS(ImageTensor(2, 2, 1, RangeTag::kUnit, {0, 0.5, 1.2, 0}), ValidationError);
  CHECK_THROWS_AS(ImageTensor(2, 2, 2, RangeTag::kUnit, std::vector<Scalar>(8, 0)), ValidationError);
  CHECK_THROWS_AS(ImageTensor(0, 2, 1, RangeTag::kUnit, {}), ValidationError);
  CHECK_THROWS_AS(ImageTensor(2, 2, 3, RangeTag::kUnit, std::vector<Scalar>(5, 0)), ValidationError);
  CHECK_THROWS_AS(Mask(1, 2, {0, 2}), ValidationError);
  const ImageTensor u = to_unit(ImageTensor(1, 2, 1, RangeTag::kSigned, {-1, 0}));
  CHECK(u.at(0, 0, 0) == 0.0);
  CHECK(u.at(0, 1, 0) == 0.5);
}

TEST_CASE("sample_mask covers every side length in [48, 80] and stays inside") {
  const MaskSpec spec;
  Rng rng(2024);
  std::set<int> sides;
  for (int draw = 0; draw < 10000; ++draw) {
    const Mask m = sample_mask(spec, 128, 128, rng);
    int top = 128, left = 128, bottom = -1, right = -1;
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x)
        if (m.at(y, x)) {
          top = std::min(top, y);
          left = std::min(left, x);
          bottom = std::max(bottom, y);
          right = std::max(right, x);
        }
    const int side = bottom - top + 1;
    REQUIRE(side == right - left + 1);
    REQUIRE(m.count() == static_cast<std::size_t>(side) * side);
    REQUIRE(side >= 48);
    REQUIRE(side <= 80);
    sides.insert(side);
  }
  CHECK(sides.size() == 33);
}

TEST_CASE("sample_mask forced placement and determinism") {
  Rng rng(1);
  CHECK(sample_mask({128, 128}, 128, 128, rng) == Mask::ones(128, 128));
  Rng a(77), b(77);
  CHECK(sample_mask({}, 128, 128, a) == sample_mask({}, 128, 128, b));
  CHECK_THROWS_AS(sample_mask({48, 80}, 64, 64, a), ConfigError);
  CHECK_THROWS_AS(sample_mask({0, 8}, 64, 64, a), ConfigError);
  CHECK_THROWS_AS(sample_mask({9, 8}, 64, 64, a), ConfigError);
}

TEST_CASE("corrupt examples") {
  const ImageTensor gt = random_image(6, 5, RangeTag::kSigned, 3);
  const auto none = corrupt(gt, Mask::zeros(6, 5));
  CHECK(none.corrupted == gt);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 5; ++x) CHECK(none.input4.at(y, x, 3) == 0.0);

  const auto all = corrupt(gt, Mask::ones(6, 5));
  for (Scalar v : all.corrupted.values()) CHECK(v == 0.0);

  const auto one = corrupt(gt, Mask::square(6, 5, 2, 3, 1));
  CHECK(one.input4.channels() == 4);
  for (int c = 0; c < 3; ++c) CHECK(one.input4.at(2, 3, c) == 0.0);
  CHECK(one.input4.at(2, 3, 3) == 1.0);
  CHECK(one.input4.at(0, 0, 0) == gt.at(0, 0, 0));
  CHECK_THROWS_AS(corrupt(gt, Mask::zeros(5, 5)), ValidationError);
}

TEST_CASE("composition is exact per pixel on 100 random 16x16 masks") {
  Rng rng(9);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const ImageTensor gen = random_image(16, 16, RangeTag::kSigned, 100 + trial);
    const ImageTensor gt = random_image(16, 16, RangeTag::kSigned, 200 + trial);
    const Mask m = random_mask(16, 16, rng);
    const ImageTensor out = compose_completion(gen, gt, m);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        for (int c = 0; c < 3; ++c) {
          const Scalar want = m.at(y, x) ? gen.at(y, x, c) : gt.at(y, x, c);
          if (out.at(y, x, c) != want) ++mismatches;
        }
    CHECK(compose_completion(out, gt, m) == out);
    CHECK(compose_completion(gt, corrupt(gt, m).corrupted, m) == gt);
  }
  CHECK(mismatches == 0);
}

TEST_CASE("composition degenerate masks and validation") {
  const ImageTensor gen = random_image(4, 4, RangeTag::kSigned, 1);
  const ImageTensor gt = random_image(4, 4, RangeTag::kSigned, 2);
  CHECK(compose_completion(gen, gt, Mask::ones(4, 4)) == gen);
  CHECK(compose_completion(gen, gt, Mask::zeros(4, 4)) == gt);
  CHECK_THROWS_AS(compose_completion(gen, to_unit(gt), Mask::zeros(4, 4)), ValidationError);
  CHECK_THROWS_AS(compose_completion(gen, gt, Mask::zeros(4, 3)), ValidationError);
}

TEST_CASE("NCHW packing round trip") {
  const std::vector<ImageTensor> imgs{random_image(3, 4, RangeTag::kSigned, 1),
                                      random_image(3, 4, RangeTag::kSigned, 2)};
  const Tensor t = to_nchw(imgs);
  CHECK(t.shape() == Shape{2, 3, 3, 4});
  CHECK(t.at(1, 2, 1, 3) == imgs[1].at(1, 3, 2));
  CHECK(from_nchw(t, 1, RangeTag::kSigned) == imgs[1]);
  const std::vector<Mask> masks{Mask::square(3, 4, 0, 1, 2)};
  CHECK(mask_from_nchw(masks_to_nchw(masks), 0) == masks[0]);
}

TEST_CASE("PNG round trips for images and masks") {
  const ImageTensor raw = random_raw8(9, 7, 5);
  CHECK(decode_image(encode_png(raw)) == raw);
  const auto dir = std::filesystem::temp_directory_path();
  write_png(dir / "inpaint_io_test.png", raw);
  CHECK(read_image(dir / "inpaint_io_test.png") == raw);
  CHECK(is_decodable_image(dir / "inpaint_io_test.png"));

  Rng rng(4);
  const Mask m = random_mask(9, 7, rng);
  CHECK(decode_mask(encode_mask_png(m)) == m);
  write_mask(dir / "inpaint_mask_test.png", m);
  CHECK(read_mask(dir / "inpaint_mask_test.png") == m);

  const std::vector<std::uint8_t> junk{1, 2, 3, 4};
  CHECK_THROWS_AS(decode_image(junk), LoadError);
  CHECK_THROWS_AS(read_image(dir / "inpaint_missing.png"), LoadError);
  std::filesystem::remove(dir / "inpaint_io_test.png");
  std::filesystem::remove(dir / "inpaint_mask_test.png");
}

TEST_CASE("mask thresholding at 128") {
  // Gray levels 0, 127, 128, 255 read back as a mask.
  const auto bytes = encode_png(ImageTensor(1, 4, 3, RangeTag::kRaw,
                                            {0, 0, 0, 127, 127, 127, 128, 128, 128, 255, 255, 255}));
  const Mask m = decode_mask(bytes);
  CHECK(m == Mask(1, 4, {0, 0, 1, 1}));
}

TEST_CASE("resize preserves range and hits the requested size") {
  const ImageTensor raw = random_raw8(40, 30, 8);
  const ImageTensor small = resize(raw, 20, 15);
  CHECK(small.height() == 20);
  CHECK(small.width() == 15);
  const ImageTensor big = resize(raw, 80, 64);
  CHECK(big.height() == 80);
  for (Scalar v : big.values()) {
    REQUIRE(v >= 0);
    REQUIRE(v <= 255);
  }
}
