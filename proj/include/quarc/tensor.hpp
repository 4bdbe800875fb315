#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "quarc/quaternion.hpp"

namespace quarc {

enum class Algebra : std::uint8_t { real, quaternion };

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);
const char* algebra_name(Algebra a);

// Dense array of real scalars or quaternions. Quaternion tensors are stored
// structure-of-channels: four contiguous planes (r, i, j, k), each holding
// numel() reals in row-major order of shape().
class Tensor {
 public:
  Tensor() = default;
  Tensor(Algebra algebra, Shape shape);

  static Tensor real(Shape shape) { return Tensor(Algebra::real, std::move(shape)); }
  static Tensor quaternion(Shape shape) { return Tensor(Algebra::quaternion, std::move(shape)); }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.algebra_, t.shape_); }

  Algebra algebra() const noexcept { return algebra_; }
  bool is_quaternion() const noexcept { return algebra_ == Algebra::quaternion; }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  // Number of elements (quaternions or reals).
  std::size_t numel() const noexcept { return numel_; }
  std::size_t channels() const noexcept { return is_quaternion() ? 4 : 1; }
  // Number of real scalars, 4·numel() for quaternion tensors.
  std::size_t real_dim() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> channel(std::size_t c) { return {data_.data() + c * numel_, numel_}; }
  std::span<const double> channel(std::size_t c) const { return {data_.data() + c * numel_, numel_}; }

  double& operator[](std::size_t idx) { return data_[idx]; }
  double operator[](std::size_t idx) const { return data_[idx]; }

  Quaternion q(std::size_t idx) const {
    return {data_[idx], data_[numel_ + idx], data_[2 * numel_ + idx], data_[3 * numel_ + idx]};
  }
  void set_q(std::size_t idx, const Quaternion& v) {
    data_[idx] = v.r;
    data_[numel_ + idx] = v.i;
    data_[2 * numel_ + idx] = v.j;
    data_[3 * numel_ + idx] = v.k;
  }

  // Element count must be preserved.
  void reshape(Shape shape);
  void fill(double v);

  bool same_layout(const Tensor& o) const { return algebra_ == o.algebra_ && shape_ == o.shape_; }
  std::string describe() const;

  bool operator==(const Tensor& o) const = default;

 private:
  Algebra algebra_ = Algebra::real;
  Shape shape_;
  std::size_t numel_ = 0;
  std::vector<double> data_;
};

using QTensor = Tensor;

// Consecutive quadruples (v0..v3), (v4..v7), ... become quaternions.
Tensor pack_reals(std::span<const double> values);
std::vector<double> unpack_reals(const Tensor& q);

// img is H×W×3 row-major, values in [0,1]. Each pixel (R,G,B) maps to the
// pure quaternion (0,R,G,B); output shape [H, W, 1].
Tensor rgb_to_quaternion(std::span<const double> img, std::size_t height, std::size_t width,
                         std::size_t channels = 3);

// y_o = Σ_i W_{o,i} ⊗ x_i for W of shape [m, n] and x of shape [n].
Tensor qmatvec(const Tensor& w, const Tensor& x);

}  // namespace quarc
