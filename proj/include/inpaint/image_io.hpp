#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "inpaint/imaging.hpp"

namespace inpaint {

// 8-bit PNG/JPEG decode to a raw RGB image. Throws LoadError on failure.
ImageTensor read_image(const std::filesystem::path& path);
ImageTensor decode_image(std::span<const std::uint8_t> bytes);

// Values are rounded to the nearest integer (raw) and written as 8-bit RGB.
void write_png(const std::filesystem::path& path, const ImageTensor& raw);
std::vector<std::uint8_t> encode_png(const ImageTensor& raw);

// Single-channel masks: pixel >= 128 means missing. Written as 0/255.
Mask read_mask(const std::filesystem::path& path);
Mask decode_mask(std::span<const std::uint8_t> bytes);
void write_mask(const std::filesystem::path& path, const Mask& mask);
std::vector<std::uint8_t> encode_mask_png(const Mask& mask);

// Bilinear (upscale) or area (downscale) resampling of a raw image.
ImageTensor resize(const ImageTensor& raw, int height, int width);

// True when OpenCV recognises the file signature as a decodable image.
bool is_decodable_image(const std::filesystem::path& path);

}  // namespace inpaint
