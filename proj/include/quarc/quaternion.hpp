#pragma once

#include <array>
#include <cmath>

namespace quarc {

// q = r + i·𝐢 + j·𝐣 + k·𝐤, right-handed basis (𝐢𝐣 = 𝐤).
struct Quaternion {
  double r = 0.0;
  double i = 0.0;
  double j = 0.0;
  double k = 0.0;

  constexpr bool operator==(const Quaternion&) const = default;

  constexpr Quaternion operator+(const Quaternion& o) const { return {r + o.r, i + o.i, j + o.j, k + o.k}; }
  constexpr Quaternion operator-(const Quaternion& o) const { return {r - o.r, i - o.i, j - o.j, k - o.k}; }
  constexpr Quaternion operator-() const { return {-r, -i, -j, -k}; }
  constexpr Quaternion operator*(double s) const { return {r * s, i * s, j * s, k * s}; }
  constexpr Quaternion& operator+=(const Quaternion& o) {
    r += o.r;
    i += o.i;
    j += o.j;
    k += o.k;
    return *this;
  }

  constexpr double norm_sq() const { return r * r + i * i + j * j + k * k; }
  double norm() const { return std::sqrt(norm_sq()); }
};

constexpr Quaternion hamilton(const Quaternion& a, const Quaternion& b) {
  return {a.r * b.r - a.i * b.i - a.j * b.j - a.k * b.k,
          a.r * b.i + a.i * b.r + a.j * b.k - a.k * b.j,
          a.r * b.j - a.i * b.k + a.j * b.r + a.k * b.i,
          a.r * b.k + a.i * b.j - a.j * b.i + a.k * b.r};
}

constexpr Quaternion conjugate(const Quaternion& q) { return {q.r, -q.i, -q.j, -q.k}; }

inline double norm(const Quaternion& q) { return q.norm(); }

using Mat4 = std::array<std::array<double, 4>, 4>;

// Real 4×4 matrix L(w) with hamilton(w, x) = L(w)·x in (r,i,j,k) coordinates.
constexpr Mat4 left_matrix(const Quaternion& w) {
  return {{{w.r, -w.i, -w.j, -w.k},
           {w.i, w.r, -w.k, w.j},
           {w.j, w.k, w.r, -w.i},
           {w.k, -w.j, w.i, w.r}}};
}

// Real 4×4 matrix R(x) with hamilton(w, x) = R(x)·w.
constexpr Mat4 right_matrix(const Quaternion& x) {
  return {{{x.r, -x.i, -x.j, -x.k},
           {x.i, x.r, x.k, -x.j},
           {x.j, -x.k, x.r, x.i},
           {x.k, x.j, -x.i, x.r}}};
}

}  // namespace quarc
