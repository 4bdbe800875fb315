#pragma once

// Shape validation shared by the serial and OpenMP kernels.

#include "quarc/error.hpp"
#include "quarc/kernels.hpp"

namespace quarc::kernels {

struct DenseDims {
  std::size_t n_out, n_in;
};

struct Conv1DDims {
  std::size_t len, n_in, n_out, width, pad_left;
};

struct Conv2DDims {
  std::size_t h, w, n_in, n_out, kh, kw, out_h, out_w;
};

inline void check_algebra(const char* op, const Tensor& a, const Tensor& b) {
  if (a.algebra() != b.algebra())
    throw DimensionError(std::string(op) + ": algebra mismatch between " + a.describe() + " and " + b.describe());
}

inline void check_bias(const char* op, const Tensor& w, const Tensor* b, std::size_t n_out) {
  if (!b) return;
  check_algebra(op, w, *b);
  if (b->rank() != 1 || b->extent(0) != n_out)
    throw DimensionError(std::string(op) + ": bias " + b->describe() + " does not match " +
                         std::to_string(n_out) + " outputs");
}

inline DenseDims check_dense(const Tensor& w, const Tensor* b, const Tensor& x, const Tensor& y) {
  check_algebra("dense", w, x);
  if (w.rank() != 2 || x.rank() != 1 || w.extent(1) != x.extent(0))
    throw DimensionError("dense: weight " + w.describe() + " incompatible with input " + x.describe());
  DenseDims d{w.extent(0), w.extent(1)};
  check_bias("dense", w, b, d.n_out);
  if (y.algebra() != w.algebra() || y.shape() != Shape{d.n_out})
    throw DimensionError("dense: output " + y.describe() + " expected " + std::to_string(d.n_out) + " entries");
  return d;
}

inline Conv1DDims check_conv1d(const Tensor& k, const Tensor* b, const Tensor& x, const Tensor& y) {
  check_algebra("conv1d", k, x);
  if (k.rank() != 3 || x.rank() != 2 || k.extent(1) != x.extent(1) || x.extent(0) < 1)
    throw DimensionError("conv1d: kernel " + k.describe() + " incompatible with input " + x.describe());
  Conv1DDims d{x.extent(0), x.extent(1), k.extent(2), k.extent(0), (k.extent(0) - 1) / 2};
  check_bias("conv1d", k, b, d.n_out);
  if (y.algebra() != k.algebra() || y.shape() != Shape{d.len, d.n_out})
    throw DimensionError("conv1d: output " + y.describe() + " does not match input length " + std::to_string(d.len));
  return d;
}

inline Conv2DDims check_conv2d(const Tensor& k, const Tensor* b, const Tensor& x, const Tensor& y) {
  check_algebra("conv2d", k, x);
  if (k.rank() != 4 || x.rank() != 3 || k.extent(2) != x.extent(2))
    throw DimensionError("conv2d: kernel " + k.describe() + " incompatible with input " + x.describe());
  if (k.extent(0) > x.extent(0) || k.extent(1) > x.extent(1))
    throw DimensionError("conv2d: kernel " + k.describe() + " larger than input " + x.describe());
  Conv2DDims d{x.extent(0), x.extent(1), x.extent(2), k.extent(3), k.extent(0), k.extent(1),
               x.extent(0) - k.extent(0) + 1, x.extent(1) - k.extent(1) + 1};
  check_bias("conv2d", k, b, d.n_out);
  if (y.algebra() != k.algebra() || y.shape() != Shape{d.out_h, d.out_w, d.n_out})
    throw DimensionError("conv2d: output " + y.describe() + " has wrong shape");
  return d;
}

}  // namespace quarc::kernels
