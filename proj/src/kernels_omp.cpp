#include <algorithm>

#include "kernels_common.hpp"

namespace quarc::kernels::omp {
namespace {

// Work (multiply-accumulate count) below which a parallel region costs more
// than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

struct CPlanes {
  const double* __restrict r;
  const double* __restrict i;
  const double* __restrict j;
  const double* __restrict k;
  CPlanes offset(std::size_t off) const { return {r + off, i + off, j + off, k + off}; }
};

struct Planes {
  double* __restrict r;
  double* __restrict i;
  double* __restrict j;
  double* __restrict k;
  Planes offset(std::size_t off) const { return {r + off, i + off, j + off, k + off}; }
};

CPlanes planes(const Tensor& t) {
  auto d = t.data().data();
  const std::size_t n = t.numel();
  return {d, d + n, d + 2 * n, d + 3 * n};
}

Planes planes(Tensor& t) {
  auto d = t.data().data();
  const std::size_t n = t.numel();
  return {d, d + n, d + 2 * n, d + 3 * n};
}

// y[o] += w[o] ⊗ x for o < n
inline void axpy_left(Planes y, CPlanes w, const Quaternion& x, std::size_t n) {
  const double xr = x.r, xi = x.i, xj = x.j, xk = x.k;
  double* __restrict yr = y.r;
  double* __restrict yi = y.i;
  double* __restrict yj = y.j;
  double* __restrict yk = y.k;
  const double* __restrict wr = w.r;
  const double* __restrict wi = w.i;
  const double* __restrict wj = w.j;
  const double* __restrict wk = w.k;
#pragma omp simd
  for (std::size_t o = 0; o < n; ++o) {
    yr[o] += wr[o] * xr - wi[o] * xi - wj[o] * xj - wk[o] * xk;
    yi[o] += wr[o] * xi + wi[o] * xr + wj[o] * xk - wk[o] * xj;
    yj[o] += wr[o] * xj - wi[o] * xk + wj[o] * xr + wk[o] * xi;
    yk[o] += wr[o] * xk + wi[o] * xj - wj[o] * xi + wk[o] * xr;
  }
}

// y[o] += g[o] ⊗ conj(x) for o < n
inline void axpy_grad_weight(Planes y, CPlanes g, const Quaternion& x, std::size_t n) {
  const double xr = x.r, xi = x.i, xj = x.j, xk = x.k;
  double* __restrict yr = y.r;
  double* __restrict yi = y.i;
  double* __restrict yj = y.j;
  double* __restrict yk = y.k;
  const double* __restrict gr = g.r;
  const double* __restrict gi = g.i;
  const double* __restrict gj = g.j;
  const double* __restrict gk = g.k;
#pragma omp simd
  for (std::size_t o = 0; o < n; ++o) {
    yr[o] += gr[o] * xr + gi[o] * xi + gj[o] * xj + gk[o] * xk;
    yi[o] += -gr[o] * xi + gi[o] * xr - gj[o] * xk + gk[o] * xj;
    yj[o] += -gr[o] * xj + gi[o] * xk + gj[o] * xr - gk[o] * xi;
    yk[o] += -gr[o] * xk - gi[o] * xj + gj[o] * xi + gk[o] * xr;
  }
}

// y[i] += g ⊗ conj(x[i]) for i < n
inline void axpy_grad_weight_row(Planes y, const Quaternion& g, CPlanes x, std::size_t n) {
  const double gr = g.r, gi = g.i, gj = g.j, gk = g.k;
  double* __restrict yr = y.r;
  double* __restrict yi = y.i;
  double* __restrict yj = y.j;
  double* __restrict yk = y.k;
  const double* __restrict xr = x.r;
  const double* __restrict xi = x.i;
  const double* __restrict xj = x.j;
  const double* __restrict xk = x.k;
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) {
    yr[i] += gr * xr[i] + gi * xi[i] + gj * xj[i] + gk * xk[i];
    yi[i] += -gr * xi[i] + gi * xr[i] - gj * xk[i] + gk * xj[i];
    yj[i] += -gr * xj[i] + gi * xk[i] + gj * xr[i] - gk * xi[i];
    yk[i] += -gr * xk[i] - gi * xj[i] + gj * xi[i] + gk * xr[i];
  }
}

// y[i] += conj(w[i]) ⊗ g for i < n
inline void axpy_grad_input(Planes y, CPlanes w, const Quaternion& g, std::size_t n) {
  const double gr = g.r, gi = g.i, gj = g.j, gk = g.k;
  double* __restrict yr = y.r;
  double* __restrict yi = y.i;
  double* __restrict yj = y.j;
  double* __restrict yk = y.k;
  const double* __restrict wr = w.r;
  const double* __restrict wi = w.i;
  const double* __restrict wj = w.j;
  const double* __restrict wk = w.k;
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) {
    yr[i] += wr[i] * gr + wi[i] * gi + wj[i] * gj + wk[i] * gk;
    yi[i] += wr[i] * gi - wi[i] * gr - wj[i] * gk + wk[i] * gj;
    yj[i] += wr[i] * gj + wi[i] * gk - wj[i] * gr - wk[i] * gi;
    yk[i] += wr[i] * gk - wi[i] * gj + wj[i] * gi - wk[i] * gr;
  }
}

// Σ_i w[i] ⊗ x[i]
inline Quaternion dot_left(CPlanes w, CPlanes x, std::size_t n) {
  double ar = 0, ai = 0, aj = 0, ak = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ar += w.r[i] * x.r[i] - w.i[i] * x.i[i] - w.j[i] * x.j[i] - w.k[i] * x.k[i];
    ai += w.r[i] * x.i[i] + w.i[i] * x.r[i] + w.j[i] * x.k[i] - w.k[i] * x.j[i];
    aj += w.r[i] * x.j[i] - w.i[i] * x.k[i] + w.j[i] * x.r[i] + w.k[i] * x.i[i];
    ak += w.r[i] * x.k[i] + w.i[i] * x.j[i] - w.j[i] * x.i[i] + w.k[i] * x.r[i];
  }
  return {ar, ai, aj, ak};
}

// Σ_o conj(w[o]) ⊗ g[o]
inline Quaternion dot_grad_input(CPlanes w, CPlanes g, std::size_t n) {
  double ar = 0, ai = 0, aj = 0, ak = 0;
  for (std::size_t o = 0; o < n; ++o) {
    ar += w.r[o] * g.r[o] + w.i[o] * g.i[o] + w.j[o] * g.j[o] + w.k[o] * g.k[o];
    ai += w.r[o] * g.i[o] - w.i[o] * g.r[o] - w.j[o] * g.k[o] + w.k[o] * g.j[o];
    aj += w.r[o] * g.j[o] + w.i[o] * g.k[o] - w.j[o] * g.r[o] - w.k[o] * g.i[o];
    ak += w.r[o] * g.k[o] - w.i[o] * g.j[o] + w.j[o] * g.i[o] - w.k[o] * g.r[o];
  }
  return {ar, ai, aj, ak};
}

inline Quaternion load(CPlanes p, std::size_t idx) { return {p.r[idx], p.i[idx], p.j[idx], p.k[idx]}; }

inline void add_to(Planes p, std::size_t idx, const Quaternion& v) {
  p.r[idx] += v.r;
  p.i[idx] += v.i;
  p.j[idx] += v.j;
  p.k[idx] += v.k;
}

inline void axpy_real(double* __restrict y, const double* __restrict w, double x, std::size_t n) {
#pragma omp simd
  for (std::size_t o = 0; o < n; ++o) y[o] += w[o] * x;
}

inline double dot_real(const double* w, const double* x, std::size_t n) {
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += w[i] * x[i];
  return acc;
}

// Broadcast the bias into every row of y (or zero it).
void init_rows(Tensor& y, const Tensor* b, std::size_t row_begin, std::size_t row_end, std::size_t row_len) {
  for (std::size_t c = 0; c < y.channels(); ++c) {
    auto plane = y.channel(c);
    for (std::size_t t = row_begin; t < row_end; ++t)
      for (std::size_t o = 0; o < row_len; ++o) plane[t * row_len + o] = b ? b->channel(c)[o] : 0.0;
  }
}

void accumulate_bias_grad(Tensor& gb, const Tensor& gy, std::size_t rows, std::size_t row_len) {
  for (std::size_t c = 0; c < gy.channels(); ++c) {
    auto g = gy.channel(c);
    auto dst = gb.channel(c);
    for (std::size_t t = 0; t < rows; ++t)
      for (std::size_t o = 0; o < row_len; ++o) dst[o] += g[t * row_len + o];
  }
}

}  // namespace

void dense_forward(const Tensor& w, const Tensor* b, const Tensor& x, Tensor& y) {
  const auto d = check_dense(w, b, x, y);
  const long n_out = static_cast<long>(d.n_out);
  if (w.is_quaternion()) {
    const auto wp = planes(w);
    const auto xp = planes(x);
    auto yp = planes(y);
#pragma omp parallel for schedule(static) if (d.n_out * d.n_in > kParallelWork)
    for (long o = 0; o < n_out; ++o) {
      Quaternion acc = b ? b->q(static_cast<std::size_t>(o)) : Quaternion{};
      acc += dot_left(wp.offset(static_cast<std::size_t>(o) * d.n_in), xp, d.n_in);
      yp.r[o] = acc.r;
      yp.i[o] = acc.i;
      yp.j[o] = acc.j;
      yp.k[o] = acc.k;
    }
  } else {
#pragma omp parallel for schedule(static) if (d.n_out * d.n_in > kParallelWork)
    for (long o = 0; o < n_out; ++o) {
      const auto uo = static_cast<std::size_t>(o);
      y[uo] = (b ? (*b)[uo] : 0.0) + dot_real(w.data().data() + uo * d.n_in, x.data().data(), d.n_in);
    }
  }
}

void dense_backward(const Tensor& w, const Tensor& x, const Tensor& gy, DenseGrads g) {
  const auto d = check_dense(w, nullptr, x, gy);
  const long n_out = static_cast<long>(d.n_out);
  if (g.b) accumulate_bias_grad(*g.b, gy, 1, d.n_out);
  if (w.is_quaternion()) {
    const auto gp = planes(gy);
    if (g.w) {
      auto gwp = planes(*g.w);
      const auto xp = planes(x);
#pragma omp parallel for schedule(static) if (d.n_out * d.n_in > kParallelWork)
      for (long o = 0; o < n_out; ++o)
        axpy_grad_weight_row(gwp.offset(static_cast<std::size_t>(o) * d.n_in), load(gp, static_cast<std::size_t>(o)),
                             xp, d.n_in);
    }
    if (g.x) {
      auto gxp = planes(*g.x);
      const auto wp = planes(w);
      for (std::size_t o = 0; o < d.n_out; ++o) axpy_grad_input(gxp, wp.offset(o * d.n_in), load(gp, o), d.n_in);
    }
  } else {
    if (g.w) {
#pragma omp parallel for schedule(static) if (d.n_out * d.n_in > kParallelWork)
      for (long o = 0; o < n_out; ++o) {
        const auto uo = static_cast<std::size_t>(o);
        axpy_real(g.w->data().data() + uo * d.n_in, x.data().data(), gy[uo], d.n_in);
      }
    }
    if (g.x)
      for (std::size_t o = 0; o < d.n_out; ++o) axpy_real(g.x->data().data(), w.data().data() + o * d.n_in, gy[o], d.n_in);
  }
}

void conv1d_forward(const Tensor& k, const Tensor* b, const Tensor& x, Tensor& y, std::size_t active_rows) {
  const auto d = check_conv1d(k, b, x, y);
  active_rows = std::min(active_rows, d.len);
  const std::size_t compute_len = std::min(d.len, active_rows + d.pad_left);
  init_rows(y, b, 0, d.len, d.n_out);
  const bool quat = k.is_quaternion();
  const std::size_t work = compute_len * d.width * d.n_in * d.n_out;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (long tl = 0; tl < static_cast<long>(compute_len); ++tl) {
    const auto t = static_cast<std::size_t>(tl);
    for (std::size_t tap = 0; tap < d.width; ++tap) {
      if (t + tap < d.pad_left) continue;
      const std::size_t s = t + tap - d.pad_left;
      if (s >= active_rows) continue;
      for (std::size_t i = 0; i < d.n_in; ++i) {
        const std::size_t kofs = (tap * d.n_in + i) * d.n_out;
        if (quat)
          axpy_left(planes(y).offset(t * d.n_out), planes(k).offset(kofs), x.q(s * d.n_in + i), d.n_out);
        else
          axpy_real(y.data().data() + t * d.n_out, k.data().data() + kofs, x[s * d.n_in + i], d.n_out);
      }
    }
  }
}

void conv1d_backward(const Tensor& k, const Tensor& x, const Tensor& gy, ConvGrads g, std::size_t active_rows) {
  const auto d = check_conv1d(k, nullptr, x, gy);
  active_rows = std::min(active_rows, d.len);
  const std::size_t compute_len = std::min(d.len, active_rows + d.pad_left);
  const bool quat = k.is_quaternion();
  if (g.b) accumulate_bias_grad(*g.b, gy, d.len, d.n_out);
  if (g.w) {
    const long taps = static_cast<long>(d.width * d.n_in);
#pragma omp parallel for schedule(static) if (compute_len * d.width * d.n_in * d.n_out > kParallelWork)
    for (long ti = 0; ti < taps; ++ti) {
      const auto tap = static_cast<std::size_t>(ti) / d.n_in;
      const auto i = static_cast<std::size_t>(ti) % d.n_in;
      const std::size_t kofs = static_cast<std::size_t>(ti) * d.n_out;
      for (std::size_t t = 0; t < compute_len; ++t) {
        if (t + tap < d.pad_left) continue;
        const std::size_t s = t + tap - d.pad_left;
        if (s >= active_rows) continue;
        if (quat)
          axpy_grad_weight(planes(*g.w).offset(kofs), planes(gy).offset(t * d.n_out), x.q(s * d.n_in + i), d.n_out);
        else
          axpy_real(g.w->data().data() + kofs, gy.data().data() + t * d.n_out, x[s * d.n_in + i], d.n_out);
      }
    }
  }
  if (g.x) {
#pragma omp parallel for schedule(static) if (d.len * d.width * d.n_in * d.n_out > kParallelWork)
    for (long sl = 0; sl < static_cast<long>(d.len); ++sl) {
      const auto s = static_cast<std::size_t>(sl);
      for (std::size_t tap = 0; tap < d.width; ++tap) {
        if (s + d.pad_left < tap) continue;
        const std::size_t t = s + d.pad_left - tap;
        if (t >= d.len) continue;
        for (std::size_t i = 0; i < d.n_in; ++i) {
          const std::size_t kofs = (tap * d.n_in + i) * d.n_out;
          if (quat)
            add_to(planes(*g.x), s * d.n_in + i,
                   dot_grad_input(planes(k).offset(kofs), planes(gy).offset(t * d.n_out), d.n_out));
          else
            (*g.x)[s * d.n_in + i] += dot_real(k.data().data() + kofs, gy.data().data() + t * d.n_out, d.n_out);
        }
      }
    }
  }
}

void conv2d_forward(const Tensor& k, const Tensor* b, const Tensor& x, Tensor& y) {
  const auto d = check_conv2d(k, b, x, y);
  init_rows(y, b, 0, d.out_h * d.out_w, d.n_out);
  const bool quat = k.is_quaternion();
  const std::size_t work = d.out_h * d.out_w * d.kh * d.kw * d.n_in * d.n_out;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (long al = 0; al < static_cast<long>(d.out_h); ++al) {
    const auto a = static_cast<std::size_t>(al);
    for (std::size_t c = 0; c < d.out_w; ++c) {
      const std::size_t yofs = (a * d.out_w + c) * d.n_out;
      for (std::size_t u = 0; u < d.kh; ++u)
        for (std::size_t v = 0; v < d.kw; ++v)
          for (std::size_t i = 0; i < d.n_in; ++i) {
            const std::size_t kofs = ((u * d.kw + v) * d.n_in + i) * d.n_out;
            const std::size_t xi = ((a + u) * d.w + (c + v)) * d.n_in + i;
            if (quat)
              axpy_left(planes(y).offset(yofs), planes(k).offset(kofs), x.q(xi), d.n_out);
            else
              axpy_real(y.data().data() + yofs, k.data().data() + kofs, x[xi], d.n_out);
          }
    }
  }
}

void conv2d_backward(const Tensor& k, const Tensor& x, const Tensor& gy, ConvGrads g) {
  const auto d = check_conv2d(k, nullptr, x, gy);
  const bool quat = k.is_quaternion();
  const std::size_t work = d.out_h * d.out_w * d.kh * d.kw * d.n_in * d.n_out;
  if (g.b) accumulate_bias_grad(*g.b, gy, d.out_h * d.out_w, d.n_out);
  if (g.w) {
    const long taps = static_cast<long>(d.kh * d.kw * d.n_in);
#pragma omp parallel for schedule(static) if (work > kParallelWork)
    for (long tl = 0; tl < taps; ++tl) {
      const auto tap = static_cast<std::size_t>(tl);
      const std::size_t i = tap % d.n_in;
      const std::size_t v = (tap / d.n_in) % d.kw;
      const std::size_t u = tap / (d.n_in * d.kw);
      const std::size_t kofs = tap * d.n_out;
      for (std::size_t a = 0; a < d.out_h; ++a)
        for (std::size_t c = 0; c < d.out_w; ++c) {
          const std::size_t xi = ((a + u) * d.w + (c + v)) * d.n_in + i;
          const std::size_t gofs = (a * d.out_w + c) * d.n_out;
          if (quat)
            axpy_grad_weight(planes(*g.w).offset(kofs), planes(gy).offset(gofs), x.q(xi), d.n_out);
          else
            axpy_real(g.w->data().data() + kofs, gy.data().data() + gofs, x[xi], d.n_out);
        }
    }
  }
  if (g.x) {
#pragma omp parallel for schedule(static) if (work > kParallelWork)
    for (long sl = 0; sl < static_cast<long>(d.h); ++sl) {
      const auto sa = static_cast<std::size_t>(sl);
      for (std::size_t sc = 0; sc < d.w; ++sc)
        for (std::size_t u = 0; u < d.kh; ++u) {
          if (sa < u || sa - u >= d.out_h) continue;
          const std::size_t a = sa - u;
          for (std::size_t v = 0; v < d.kw; ++v) {
            if (sc < v || sc - v >= d.out_w) continue;
            const std::size_t c = sc - v;
            const std::size_t gofs = (a * d.out_w + c) * d.n_out;
            for (std::size_t i = 0; i < d.n_in; ++i) {
              const std::size_t kofs = ((u * d.kw + v) * d.n_in + i) * d.n_out;
              const std::size_t xi = (sa * d.w + sc) * d.n_in + i;
              if (quat)
                add_to(planes(*g.x), xi, dot_grad_input(planes(k).offset(kofs), planes(gy).offset(gofs), d.n_out));
              else
                (*g.x)[xi] += dot_real(k.data().data() + kofs, gy.data().data() + gofs, d.n_out);
            }
          }
        }
    }
  }
}

}  // namespace quarc::kernels::omp
