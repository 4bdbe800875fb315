#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "quarc/tensor.hpp"

namespace quarc {

inline constexpr std::size_t kImageSide = 32;

// Row-major H×W×3, values in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> rgb;

  bool operator==(const Image&) const = default;
};

// Binary PPM (P6) or PGM (P5, grey replicated to three channels), maxval
// at most 255. Sample values become v/maxval.
Image decode_pnm(std::span<const std::uint8_t> bytes);

// Nearest neighbour: destination pixel (y, x) samples source
// (floor(y·src_h/dst_h), floor(x·src_w/dst_w)).
Image resize_nearest(const Image& img, std::size_t height, std::size_t width);

// Decodes and resizes to 32×32.
Image load_image(const std::filesystem::path& path);

// P6 with maxval 255; values are rounded to the nearest level.
std::vector<std::uint8_t> encode_ppm(const Image& img);

// [H, W, 1] pure quaternions (0, R, G, B), or real [H, W, 4] with a zero
// first channel.
Tensor image_tensor(const Image& img, Algebra algebra);

}  // namespace quarc
