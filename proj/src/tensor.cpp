#include "quarc/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "quarc/error.hpp"

namespace quarc {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t a = 0; a < shape.size(); ++a) os << (a ? "," : "") << shape[a];
  os << ']';
  return os.str();
}

const char* algebra_name(Algebra a) { return a == Algebra::quaternion ? "quaternion" : "real"; }

Tensor::Tensor(Algebra algebra, Shape shape)
    : algebra_(algebra), shape_(std::move(shape)), numel_(shape_numel(shape_)) {
  data_.assign(numel_ * channels(), 0.0);
}

void Tensor::reshape(Shape shape) {
  if (shape_numel(shape) != numel_)
    throw DimensionError("reshape: cannot view " + shape_string(shape_) + " as " + shape_string(shape));
  shape_ = std::move(shape);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::describe() const { return std::string(algebra_name(algebra_)) + shape_string(shape_); }

Tensor pack_reals(std::span<const double> values) {
  if (values.size() % 4 != 0)
    throw PackingError("pack_reals: length " + std::to_string(values.size()) + " is not divisible by 4");
  const std::size_t n = values.size() / 4;
  Tensor q = Tensor::quaternion({n});
  for (std::size_t e = 0; e < n; ++e)
    for (std::size_t c = 0; c < 4; ++c) q.channel(c)[e] = values[4 * e + c];
  return q;
}

std::vector<double> unpack_reals(const Tensor& q) {
  if (!q.is_quaternion()) throw PackingError("unpack_reals: tensor is not quaternion-valued");
  std::vector<double> out(q.real_dim());
  for (std::size_t e = 0; e < q.numel(); ++e)
    for (std::size_t c = 0; c < 4; ++c) out[4 * e + c] = q.channel(c)[e];
  return out;
}

Tensor rgb_to_quaternion(std::span<const double> img, std::size_t height, std::size_t width,
                         std::size_t channels) {
  if (channels != 3)
    throw IngestionError("rgb_to_quaternion: expected 3 channels, got " + std::to_string(channels));
  if (img.size() != height * width * 3)
    throw DimensionError("rgb_to_quaternion: buffer of " + std::to_string(img.size()) + " values for " +
                         std::to_string(height) + "x" + std::to_string(width) + "x3 image");
  Tensor q = Tensor::quaternion({height, width, 1});
  for (std::size_t p = 0; p < height * width; ++p) q.set_q(p, {0.0, img[3 * p], img[3 * p + 1], img[3 * p + 2]});
  return q;
}

Tensor qmatvec(const Tensor& w, const Tensor& x) {
  if (!w.is_quaternion() || !x.is_quaternion() || w.rank() != 2 || x.rank() != 1 || w.extent(1) != x.extent(0))
    throw DimensionError("qmatvec: weight " + w.describe() + " incompatible with input " + x.describe());
  const std::size_t m = w.extent(0), n = w.extent(1);
  Tensor y = Tensor::quaternion({m});
  for (std::size_t o = 0; o < m; ++o) {
    Quaternion acc;
    for (std::size_t i = 0; i < n; ++i) acc += hamilton(w.q(o * n + i), x.q(i));
    y.set_q(o, acc);
  }
  return y;
}

}  // namespace quarc
