#include "kernels_common.hpp"

namespace quarc::kernels {

std::size_t leading_nonzero_rows(const Tensor& x) {
  if (x.rank() == 0) return 0;
  const std::size_t rows = x.extent(0);
  const std::size_t row_len = rows ? x.numel() / rows : 0;
  std::size_t active = 0;
  for (std::size_t c = 0; c < x.channels(); ++c) {
    auto plane = x.channel(c);
    for (std::size_t r = rows; r > active; --r) {
      bool nonzero = false;
      for (std::size_t e = (r - 1) * row_len; e < r * row_len; ++e)
        if (plane[e] != 0.0) {
          nonzero = true;
          break;
        }
      if (nonzero) {
        active = r;
        break;
      }
    }
  }
  return active;
}

namespace serial {
namespace {

// Real scalars embed as real quaternions, under which the Hamilton product
// is ordinary multiplication, so one loop nest serves both algebras.
Quaternion get(const Tensor& t, std::size_t idx) {
  if (t.is_quaternion()) return t.q(idx);
  return {t[idx], 0.0, 0.0, 0.0};
}

void put(Tensor& t, std::size_t idx, const Quaternion& v) {
  if (t.is_quaternion())
    t.set_q(idx, v);
  else
    t[idx] = v.r;
}

void add(Tensor& t, std::size_t idx, const Quaternion& v) { put(t, idx, get(t, idx) + v); }

}  // namespace

void dense_forward(const Tensor& w, const Tensor* b, const Tensor& x, Tensor& y) {
  const auto d = check_dense(w, b, x, y);
  for (std::size_t o = 0; o < d.n_out; ++o) {
    Quaternion acc = b ? get(*b, o) : Quaternion{};
    for (std::size_t i = 0; i < d.n_in; ++i) acc += hamilton(get(w, o * d.n_in + i), get(x, i));
    put(y, o, acc);
  }
}

void dense_backward(const Tensor& w, const Tensor& x, const Tensor& gy, DenseGrads g) {
  const auto d = check_dense(w, nullptr, x, gy);
  for (std::size_t o = 0; o < d.n_out; ++o) {
    const Quaternion go = get(gy, o);
    if (g.b) add(*g.b, o, go);
    for (std::size_t i = 0; i < d.n_in; ++i) {
      if (g.w) add(*g.w, o * d.n_in + i, hamilton(go, conjugate(get(x, i))));
      if (g.x) add(*g.x, i, hamilton(conjugate(get(w, o * d.n_in + i)), go));
    }
  }
}

void conv1d_forward(const Tensor& k, const Tensor* b, const Tensor& x, Tensor& y) {
  const auto d = check_conv1d(k, b, x, y);
  for (std::size_t t = 0; t < d.len; ++t)
    for (std::size_t o = 0; o < d.n_out; ++o) {
      Quaternion acc = b ? get(*b, o) : Quaternion{};
      for (std::size_t tap = 0; tap < d.width; ++tap) {
        const auto s = static_cast<std::ptrdiff_t>(t + tap) - static_cast<std::ptrdiff_t>(d.pad_left);
        if (s < 0 || s >= static_cast<std::ptrdiff_t>(d.len)) continue;
        for (std::size_t i = 0; i < d.n_in; ++i)
          acc += hamilton(get(k, (tap * d.n_in + i) * d.n_out + o), get(x, static_cast<std::size_t>(s) * d.n_in + i));
      }
      put(y, t * d.n_out + o, acc);
    }
}

void conv1d_backward(const Tensor& k, const Tensor& x, const Tensor& gy, ConvGrads g) {
  const auto d = check_conv1d(k, nullptr, x, gy);
  for (std::size_t t = 0; t < d.len; ++t)
    for (std::size_t o = 0; o < d.n_out; ++o) {
      const Quaternion go = get(gy, t * d.n_out + o);
      if (g.b) add(*g.b, o, go);
      for (std::size_t tap = 0; tap < d.width; ++tap) {
        const auto s = static_cast<std::ptrdiff_t>(t + tap) - static_cast<std::ptrdiff_t>(d.pad_left);
        if (s < 0 || s >= static_cast<std::ptrdiff_t>(d.len)) continue;
        for (std::size_t i = 0; i < d.n_in; ++i) {
          const std::size_t ki = (tap * d.n_in + i) * d.n_out + o;
          const std::size_t xi = static_cast<std::size_t>(s) * d.n_in + i;
          if (g.w) add(*g.w, ki, hamilton(go, conjugate(get(x, xi))));
          if (g.x) add(*g.x, xi, hamilton(conjugate(get(k, ki)), go));
        }
      }
    }
}

void conv2d_forward(const Tensor& k, const Tensor* b, const Tensor& x, Tensor& y) {
  const auto d = check_conv2d(k, b, x, y);
  for (std::size_t a = 0; a < d.out_h; ++a)
    for (std::size_t c = 0; c < d.out_w; ++c)
      for (std::size_t o = 0; o < d.n_out; ++o) {
        Quaternion acc = b ? get(*b, o) : Quaternion{};
        for (std::size_t u = 0; u < d.kh; ++u)
          for (std::size_t v = 0; v < d.kw; ++v)
            for (std::size_t i = 0; i < d.n_in; ++i)
              acc += hamilton(get(k, ((u * d.kw + v) * d.n_in + i) * d.n_out + o),
                              get(x, ((a + u) * d.w + (c + v)) * d.n_in + i));
        put(y, (a * d.out_w + c) * d.n_out + o, acc);
      }
}

void conv2d_backward(const Tensor& k, const Tensor& x, const Tensor& gy, ConvGrads g) {
  const auto d = check_conv2d(k, nullptr, x, gy);
  for (std::size_t a = 0; a < d.out_h; ++a)
    for (std::size_t c = 0; c < d.out_w; ++c)
      for (std::size_t o = 0; o < d.n_out; ++o) {
        const Quaternion go = get(gy, (a * d.out_w + c) * d.n_out + o);
        if (g.b) add(*g.b, o, go);
        for (std::size_t u = 0; u < d.kh; ++u)
          for (std::size_t v = 0; v < d.kw; ++v)
            for (std::size_t i = 0; i < d.n_in; ++i) {
              const std::size_t ki = ((u * d.kw + v) * d.n_in + i) * d.n_out + o;
              const std::size_t xi = ((a + u) * d.w + (c + v)) * d.n_in + i;
              if (g.w) add(*g.w, ki, hamilton(go, conjugate(get(x, xi))));
              if (g.x) add(*g.x, xi, hamilton(conjugate(get(k, ki)), go));
            }
      }
}

}  // namespace serial
}  // namespace quarc::kernels
