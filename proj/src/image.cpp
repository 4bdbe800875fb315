#include "quarc/image.hpp"

#include <algorithm>
#include <cmath>

#include "quarc/error.hpp"
#include "quarc/io.hpp"

namespace quarc {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  // Skips whitespace and '#' comments, then reads a decimal field.
  std::uint64_t number(const char* what) {
    skip_blank();
    const std::size_t start = pos_;
    std::uint64_t v = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (1u << 24)) throw IngestionError(std::string("pnm: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw IngestionError(std::string("pnm: expected ") + what, start);
    last_start_ = start;
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void single_space() {
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) throw IngestionError("pnm: expected whitespace before raster", pos_);
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  // Offset where the most recent field began.
  std::size_t last_start() const { return last_start_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  static bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

  void skip_blank() {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::size_t last_start_ = 0;
};

}  // namespace

Image decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw IngestionError("pnm: expected P5 or P6 magic", 0);
  const bool grey = bytes[1] == '5';
  HeaderReader rd(bytes);
  rd.advance(2);
  const std::uint64_t width = rd.number("width");
  const std::size_t width_at = rd.last_start();
  const std::uint64_t height = rd.number("height");
  const std::uint64_t maxval = rd.number("maxval");
  const std::size_t maxval_at = rd.last_start();
  if (width == 0 || height == 0) throw IngestionError("pnm: zero image extent", width_at);
  if (maxval == 0 || maxval > 255) throw IngestionError("pnm: maxval must be in 1..255", maxval_at);
  rd.single_space();

  const std::size_t per_pixel = grey ? 1 : 3;
  const std::size_t need = static_cast<std::size_t>(width * height) * per_pixel;
  if (bytes.size() - rd.pos() < need)
    throw IngestionError("pnm: raster truncated, need " + std::to_string(need) + " bytes", bytes.size());

  Image img;
  img.width = width;
  img.height = height;
  img.rgb.resize(static_cast<std::size_t>(width * height) * 3);
  const auto* raster = bytes.data() + rd.pos();
  const double max_level = static_cast<double>(maxval);
  for (std::size_t p = 0; p < width * height; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t src = grey ? p : 3 * p + c;
      if (raster[src] > maxval) throw IngestionError("pnm: sample exceeds maxval", rd.pos() + src);
      img.rgb[3 * p + c] = raster[src] / max_level;
    }
  }
  return img;
}

Image resize_nearest(const Image& img, std::size_t height, std::size_t width) {
  if (img.height == 0 || img.width == 0) throw DimensionError("resize_nearest: empty image");
  Image out;
  out.height = height;
  out.width = width;
  out.rgb.resize(height * width * 3);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = y * img.height / height;
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = x * img.width / width;
      for (std::size_t c = 0; c < 3; ++c) out.rgb[(y * width + x) * 3 + c] = img.rgb[(sy * img.width + sx) * 3 + c];
    }
  }
  return out;
}

Image load_image(const std::filesystem::path& path) {
  const auto bytes = read_binary_file(path);
  try {
    return resize_nearest(decode_pnm(bytes), kImageSide, kImageSide);
  } catch (const IngestionError& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.rgb.size());
  for (double v : img.rgb) {
    const double level = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    out.push_back(static_cast<std::uint8_t>(level));
  }
  return out;
}

Tensor image_tensor(const Image& img, Algebra algebra) {
  if (img.rgb.size() != img.height * img.width * 3) throw DimensionError("image_tensor: pixel buffer size mismatch");
  if (algebra == Algebra::quaternion) return rgb_to_quaternion(img.rgb, img.height, img.width, 3);
  Tensor t = Tensor::real({img.height, img.width, 4});
  for (std::size_t p = 0; p < img.height * img.width; ++p)
    for (std::size_t c = 0; c < 3; ++c) t[4 * p + 1 + c] = img.rgb[3 * p + c];
  return t;
}

}  // namespace quarc
