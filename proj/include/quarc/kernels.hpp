#pragma once

#include <cstddef>

#include "quarc/tensor.hpp"

// Compute kernels for the dense and convolution layers. Every kernel works
// on both algebras: quaternion tensors use Hamilton-product taps, real
// tensors ordinary multiply-accumulate.
//
// `serial` holds the straightforward reference loops, kept for testing and
// benchmarking. `omp` holds the OpenMP versions used by the layers; they
// partition work by output element so results do not depend on the thread
// count.
//
// Layouts:
//   dense   w [n_out, n_in], b [n_out], x [n_in] -> y [n_out]
//   conv1d  k [width, n_in, n_out], b [n_out], x [len, n_in] -> y [len, n_out]
//           zero "same" padding, (width-1)/2 on the left
//   conv2d  k [kh, kw, n_in, n_out], b [n_out], x [h, w, n_in] -> y [h-kh+1, w-kw+1, n_out]
//
// Backward kernels accumulate (+=) into whichever gradient outputs are
// non-null.
namespace quarc::kernels {

struct DenseGrads {
  Tensor* w = nullptr;
  Tensor* b = nullptr;
  Tensor* x = nullptr;
};

using ConvGrads = DenseGrads;

// Number of leading rows (axis 0) of x that contain a non-zero value. Rows
// past this are zero and convolution windows lying entirely inside them
// produce only the bias.
std::size_t leading_nonzero_rows(const Tensor& x);

namespace serial {

void dense_forward(const Tensor& w, const Tensor* b, const Tensor& x, Tensor& y);
void dense_backward(const Tensor& w, const Tensor& x, const Tensor& gy, DenseGrads grads);

void conv1d_forward(const Tensor& k, const Tensor* b, const Tensor& x, Tensor& y);
void conv1d_backward(const Tensor& k, const Tensor& x, const Tensor& gy, ConvGrads grads);

void conv2d_forward(const Tensor& k, const Tensor* b, const Tensor& x, Tensor& y);
void conv2d_backward(const Tensor& k, const Tensor& x, const Tensor& gy, ConvGrads grads);

}  // namespace serial

namespace omp {

void dense_forward(const Tensor& w, const Tensor* b, const Tensor& x, Tensor& y);
void dense_backward(const Tensor& w, const Tensor& x, const Tensor& gy, DenseGrads grads);

// active_rows: rows of x past this index are known to be zero (see
// leading_nonzero_rows). Pass x.extent(0) when unknown.
void conv1d_forward(const Tensor& k, const Tensor* b, const Tensor& x, Tensor& y, std::size_t active_rows);
void conv1d_backward(const Tensor& k, const Tensor& x, const Tensor& gy, ConvGrads grads, std::size_t active_rows);

void conv2d_forward(const Tensor& k, const Tensor* b, const Tensor& x, Tensor& y);
void conv2d_backward(const Tensor& k, const Tensor& x, const Tensor& gy, ConvGrads grads);

}  // namespace omp

}  // namespace quarc::kernels
