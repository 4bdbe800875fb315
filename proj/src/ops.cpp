#include "quarc/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "quarc/error.hpp"
#include "quarc/kernels.hpp"
#include "quarc/rng.hpp"

namespace quarc::ops {

namespace debug {
namespace {
std::atomic<bool> g_backward_fault{false};
}
void set_backward_fault(bool enabled) { g_backward_fault = enabled; }
bool backward_fault() { return g_backward_fault; }
}  // namespace debug

namespace {

void accumulate(Tape& tape, NodeId id, const Tensor& g) {
  if (!tape.requires_grad(id)) return;
  auto dst = tape.grad(id).data();
  auto src = g.data();
  for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += src[e];
}

Tensor* grad_if(Tape& tape, NodeId id) { return id != kNoNode && tape.requires_grad(id) ? &tape.grad(id) : nullptr; }

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_layout(b)) throw DimensionError(std::string(op) + ": operands " + a.describe() + " and " + b.describe() + " differ");
}

template <class F, class DF>
NodeId split_unary(Tape& tape, NodeId x, F f, DF df_from_y) {
  Tensor y = tape.value(x);
  for (auto& v : y.data()) v = f(v);
  return tape.record(std::move(y), {x}, [x, df_from_y](Tape& t, NodeId self) {
    if (!t.requires_grad(x)) return;
    const auto yv = t.value(self).data();
    const auto gy = t.grad(self).data();
    auto gx = t.grad(x).data();
    for (std::size_t e = 0; e < gx.size(); ++e) gx[e] += gy[e] * df_from_y(yv[e]);
  });
}

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// Index of the winning position among `count` candidates at positions
// base + p·stride, following the selection rule of global_max_pool.
std::size_t select_max(const Tensor& x, std::size_t base, std::size_t stride, std::size_t count) {
  std::size_t best = base;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < count; ++p) {
    const std::size_t idx = base + p * stride;
    const double v = x.is_quaternion() ? x.q(idx).norm_sq() : x[idx];
    if (v > best_val) {
      best_val = v;
      best = idx;
    }
  }
  return best;
}

NodeId gather(Tape& tape, NodeId x, Shape out_shape, std::vector<std::size_t> src) {
  const Tensor& xv = tape.value(x);
  Tensor y(xv.algebra(), std::move(out_shape));
  for (std::size_t c = 0; c < y.channels(); ++c) {
    auto dst = y.channel(c);
    auto s = xv.channel(c);
    for (std::size_t e = 0; e < src.size(); ++e) dst[e] = s[src[e]];
  }
  return tape.record(std::move(y), {x}, [x, src = std::move(src)](Tape& t, NodeId self) {
    Tensor& gx = t.grad(x);
    const Tensor& gy = t.grad(self);
    for (std::size_t c = 0; c < gy.channels(); ++c) {
      auto dst = gx.channel(c);
      auto g = gy.channel(c);
      for (std::size_t e = 0; e < src.size(); ++e) dst[src[e]] += g[e];
    }
  });
}

}  // namespace

NodeId dense(Tape& tape, NodeId w, NodeId b, NodeId x) {
  const Tensor& wv = tape.value(w);
  const Tensor& xv = tape.value(x);
  if (wv.rank() != 2)
    throw DimensionError("dense: weight " + wv.describe() + " must be rank 2 (input " + xv.describe() + ")");
  Tensor y(wv.algebra(), {wv.extent(0)});
  kernels::omp::dense_forward(wv, b == kNoNode ? nullptr : &tape.value(b), xv, y);
  std::vector<NodeId> inputs{w, x};
  if (b != kNoNode) inputs.push_back(b);
  return tape.record(std::move(y), inputs, [w, b, x](Tape& t, NodeId self) {
    Tensor* gw = grad_if(t, w);
    kernels::omp::dense_backward(t.value(w), t.value(x), t.grad(self), {gw, grad_if(t, b), grad_if(t, x)});
    if (gw && debug::backward_fault())
      for (auto& v : gw->data()) v *= 1.01;
  });
}

NodeId conv1d(Tape& tape, NodeId k, NodeId b, NodeId x) {
  const Tensor& kv = tape.value(k);
  const Tensor& xv = tape.value(x);
  if (kv.rank() != 3 || xv.rank() != 2)
    throw DimensionError("conv1d: kernel " + kv.describe() + " incompatible with input " + xv.describe());
  const std::size_t active = kernels::leading_nonzero_rows(xv);
  Tensor y(kv.algebra(), {xv.extent(0), kv.extent(2)});
  kernels::omp::conv1d_forward(kv, b == kNoNode ? nullptr : &tape.value(b), xv, y, active);
  std::vector<NodeId> inputs{k, x};
  if (b != kNoNode) inputs.push_back(b);
  return tape.record(std::move(y), inputs, [k, b, x, active](Tape& t, NodeId self) {
    Tensor* gx = grad_if(t, x);
    // Input gradients reach every row, so the zero-row shortcut only
    // applies when the input is a constant.
    const std::size_t rows = gx ? t.value(x).extent(0) : active;
    kernels::omp::conv1d_backward(t.value(k), t.value(x), t.grad(self), {grad_if(t, k), grad_if(t, b), gx}, rows);
  });
}

NodeId conv2d(Tape& tape, NodeId k, NodeId b, NodeId x) {
  const Tensor& kv = tape.value(k);
  const Tensor& xv = tape.value(x);
  if (kv.rank() != 4 || xv.rank() != 3)
    throw DimensionError("conv2d: kernel " + kv.describe() + " incompatible with input " + xv.describe());
  if (kv.extent(0) > xv.extent(0) || kv.extent(1) > xv.extent(1))
    throw DimensionError("conv2d: kernel " + kv.describe() + " larger than input " + xv.describe());
  Tensor y(kv.algebra(), {xv.extent(0) - kv.extent(0) + 1, xv.extent(1) - kv.extent(1) + 1, kv.extent(3)});
  kernels::omp::conv2d_forward(kv, b == kNoNode ? nullptr : &tape.value(b), xv, y);
  std::vector<NodeId> inputs{k, x};
  if (b != kNoNode) inputs.push_back(b);
  return tape.record(std::move(y), inputs, [k, b, x](Tape& t, NodeId self) {
    kernels::omp::conv2d_backward(t.value(k), t.value(x), t.grad(self), {grad_if(t, k), grad_if(t, b), grad_if(t, x)});
  });
}

NodeId relu(Tape& tape, NodeId x) {
  return split_unary(
      tape, x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

NodeId sigmoid(Tape& tape, NodeId x) {
  return split_unary(tape, x, stable_sigmoid, [](double y) { return y * (1.0 - y); });
}

NodeId tanh(Tape& tape, NodeId x) {
  return split_unary(
      tape, x, [](double v) { return std::tanh(v); }, [](double y) { return 1.0 - y * y; });
}

NodeId add(Tape& tape, NodeId a, NodeId b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require_same("add", av, bv);
  Tensor y = av;
  auto yd = y.data();
  auto bd = bv.data();
  for (std::size_t e = 0; e < yd.size(); ++e) yd[e] += bd[e];
  return tape.record(std::move(y), {a, b}, [a, b](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    accumulate(t, a, g);
    accumulate(t, b, g);
  });
}

NodeId mul(Tape& tape, NodeId a, NodeId b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require_same("mul", av, bv);
  Tensor y = Tensor::zeros_like(av);
  if (av.is_quaternion()) {
    for (std::size_t e = 0; e < y.numel(); ++e) y.set_q(e, hamilton(av.q(e), bv.q(e)));
  } else {
    for (std::size_t e = 0; e < y.numel(); ++e) y[e] = av[e] * bv[e];
  }
  return tape.record(std::move(y), {a, b}, [a, b](Tape& t, NodeId self) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    const Tensor& gy = t.grad(self);
    if (av.is_quaternion()) {
      if (t.requires_grad(a)) {
        Tensor& ga = t.grad(a);
        for (std::size_t e = 0; e < gy.numel(); ++e) ga.set_q(e, ga.q(e) + hamilton(gy.q(e), conjugate(bv.q(e))));
      }
      if (t.requires_grad(b)) {
        Tensor& gb = t.grad(b);
        for (std::size_t e = 0; e < gy.numel(); ++e) gb.set_q(e, gb.q(e) + hamilton(conjugate(av.q(e)), gy.q(e)));
      }
    } else {
      if (t.requires_grad(a)) {
        Tensor& ga = t.grad(a);
        for (std::size_t e = 0; e < gy.numel(); ++e) ga[e] += gy[e] * bv[e];
      }
      if (t.requires_grad(b)) {
        Tensor& gb = t.grad(b);
        for (std::size_t e = 0; e < gy.numel(); ++e) gb[e] += gy[e] * av[e];
      }
    }
  });
}

NodeId hadamard(Tape& tape, NodeId a, NodeId b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require_same("hadamard", av, bv);
  Tensor y = av;
  auto yd = y.data();
  auto bd = bv.data();
  for (std::size_t e = 0; e < yd.size(); ++e) yd[e] *= bd[e];
  return tape.record(std::move(y), {a, b}, [a, b](Tape& t, NodeId self) {
    auto gy = t.grad(self).data();
    if (t.requires_grad(a)) {
      auto ga = t.grad(a).data();
      auto bd = t.value(b).data();
      for (std::size_t e = 0; e < gy.size(); ++e) ga[e] += gy[e] * bd[e];
    }
    if (t.requires_grad(b)) {
      auto gb = t.grad(b).data();
      auto ad = t.value(a).data();
      for (std::size_t e = 0; e < gy.size(); ++e) gb[e] += gy[e] * ad[e];
    }
  });
}

NodeId scale(Tape& tape, NodeId x, double s) {
  Tensor y = tape.value(x);
  for (auto& v : y.data()) v *= s;
  return tape.record(std::move(y), {x}, [x, s](Tape& t, NodeId self) {
    auto gx = t.grad(x).data();
    auto gy = t.grad(self).data();
    for (std::size_t e = 0; e < gx.size(); ++e) gx[e] += s * gy[e];
  });
}

NodeId concat(Tape& tape, const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ContractError("concat: empty part list");
  const Algebra alg = tape.value(parts.front()).algebra();
  std::size_t total = 0;
  for (auto p : parts) {
    const Tensor& v = tape.value(p);
    if (v.rank() != 1 || v.algebra() != alg)
      throw DimensionError("concat: part " + v.describe() + " is not a " + algebra_name(alg) + " vector");
    total += v.numel();
  }
  Tensor y(alg, {total});
  std::size_t off = 0;
  for (auto p : parts) {
    const Tensor& v = tape.value(p);
    for (std::size_t c = 0; c < y.channels(); ++c) std::copy_n(v.channel(c).begin(), v.numel(), y.channel(c).begin() + off);
    off += v.numel();
  }
  return tape.record(std::move(y), parts, [parts](Tape& t, NodeId self) {
    const Tensor& gy = t.grad(self);
    std::size_t off = 0;
    for (auto p : parts) {
      const std::size_t n = t.value(p).numel();
      if (t.requires_grad(p)) {
        Tensor& gp = t.grad(p);
        for (std::size_t c = 0; c < gy.channels(); ++c)
          for (std::size_t e = 0; e < n; ++e) gp.channel(c)[e] += gy.channel(c)[off + e];
      }
      off += n;
    }
  });
}

NodeId reshape(Tape& tape, NodeId x, Shape shape) {
  Tensor y = tape.value(x);
  y.reshape(std::move(shape));
  return tape.record(std::move(y), {x}, [x](Tape& t, NodeId self) {
    auto gx = t.grad(x).data();
    auto gy = t.grad(self).data();
    for (std::size_t e = 0; e < gx.size(); ++e) gx[e] += gy[e];
  });
}

NodeId stack(Tape& tape, const std::vector<NodeId>& rows) {
  if (rows.empty()) throw ContractError("stack: no rows");
  const Tensor& first = tape.value(rows.front());
  for (auto r : rows) require_same("stack", first, tape.value(r));
  const std::size_t n = first.numel();
  Shape shape{rows.size()};
  shape.insert(shape.end(), first.shape().begin(), first.shape().end());
  Tensor y(first.algebra(), shape);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const Tensor& v = tape.value(rows[b]);
    for (std::size_t c = 0; c < y.channels(); ++c) std::copy_n(v.channel(c).begin(), n, y.channel(c).begin() + b * n);
  }
  return tape.record(std::move(y), rows, [rows, n](Tape& t, NodeId self) {
    const Tensor& gy = t.grad(self);
    for (std::size_t b = 0; b < rows.size(); ++b) {
      if (!t.requires_grad(rows[b])) continue;
      Tensor& g = t.grad(rows[b]);
      for (std::size_t c = 0; c < gy.channels(); ++c)
        for (std::size_t e = 0; e < n; ++e) g.channel(c)[e] += gy.channel(c)[b * n + e];
    }
  });
}

NodeId row(Tape& tape, NodeId x, std::size_t index) {
  const Tensor& xv = tape.value(x);
  if (xv.rank() < 1 || index >= xv.extent(0))
    throw DimensionError("row: index " + std::to_string(index) + " out of range for " + xv.describe());
  const std::size_t n = xv.numel() / xv.extent(0);
  Shape shape(xv.shape().begin() + 1, xv.shape().end());
  if (shape.empty()) shape = {1};
  std::vector<std::size_t> src(n);
  for (std::size_t e = 0; e < n; ++e) src[e] = index * n + e;
  return gather(tape, x, std::move(shape), std::move(src));
}

NodeId global_max_pool(Tape& tape, NodeId x) {
  const Tensor& xv = tape.value(x);
  if (xv.rank() != 2) throw DimensionError("global_max_pool: expected [len, n], got " + xv.describe());
  const std::size_t len = xv.extent(0), n = xv.extent(1);
  if (len == 0) throw ContractError("global_max_pool: empty sequence");
  std::vector<std::size_t> src(n);
  for (std::size_t ch = 0; ch < n; ++ch) src[ch] = select_max(xv, ch, n, len);
  return gather(tape, x, {n}, std::move(src));
}

NodeId max_pool2d(Tape& tape, NodeId x, std::size_t window) {
  const Tensor& xv = tape.value(x);
  if (xv.rank() != 3) throw DimensionError("max_pool2d: expected [h, w, n], got " + xv.describe());
  const std::size_t h = xv.extent(0), w = xv.extent(1), n = xv.extent(2);
  if (window == 0 || h < window || w < window)
    throw DimensionError("max_pool2d: window " + std::to_string(window) + " does not fit " + xv.describe());
  const std::size_t oh = h / window, ow = w / window;
  std::vector<std::size_t> src(oh * ow * n);
  for (std::size_t a = 0; a < oh; ++a)
    for (std::size_t b = 0; b < ow; ++b)
      for (std::size_t ch = 0; ch < n; ++ch) {
        std::size_t best = 0;
        double best_val = -std::numeric_limits<double>::infinity();
        for (std::size_t u = 0; u < window; ++u)
          for (std::size_t v = 0; v < window; ++v) {
            const std::size_t idx = ((a * window + u) * w + (b * window + v)) * n + ch;
            const double val = xv.is_quaternion() ? xv.q(idx).norm_sq() : xv[idx];
            if (val > best_val) {
              best_val = val;
              best = idx;
            }
          }
        src[(a * ow + b) * n + ch] = best;
      }
  return gather(tape, x, {oh, ow, n}, std::move(src));
}

NodeId dropout(Tape& tape, NodeId x, double rate, Mode mode, std::uint64_t key) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  if (mode == Mode::eval || rate == 0.0) return x;
  const Tensor& xv = tape.value(x);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> factor(xv.numel());
  for (std::size_t e = 0; e < factor.size(); ++e) factor[e] = counter_uniform(key, e) < rate ? 0.0 : keep_scale;
  Tensor y = xv;
  for (std::size_t c = 0; c < y.channels(); ++c) {
    auto plane = y.channel(c);
    for (std::size_t e = 0; e < factor.size(); ++e) plane[e] *= factor[e];
  }
  return tape.record(std::move(y), {x}, [x, factor = std::move(factor)](Tape& t, NodeId self) {
    Tensor& gx = t.grad(x);
    const Tensor& gy = t.grad(self);
    for (std::size_t c = 0; c < gy.channels(); ++c)
      for (std::size_t e = 0; e < factor.size(); ++e) gx.channel(c)[e] += factor[e] * gy.channel(c)[e];
  });
}

std::vector<double> attention_weights(const Tensor& c, const Tensor& u, const std::vector<bool>& mask) {
  if (c.rank() != 2 || u.rank() != 1 || c.extent(1) != u.extent(0) || c.algebra() != u.algebra())
    throw DimensionError("attention: context " + c.describe() + " incompatible with query " + u.describe());
  const std::size_t n = c.extent(0), d = c.extent(1);
  if (n == 0) throw ContractError("attention: empty context");
  if (mask.size() != n)
    throw DimensionError("attention: mask of " + std::to_string(mask.size()) + " for " + std::to_string(n) + " positions");
  if (std::none_of(mask.begin(), mask.end(), [](bool m) { return m; }))
    throw ContractError("attention: every position is masked");
  std::vector<double> score(n, -std::numeric_limits<double>::infinity());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    double s = 0.0;
    for (std::size_t ch = 0; ch < c.channels(); ++ch) {
      auto cp = c.channel(ch);
      auto up = u.channel(ch);
      for (std::size_t e = 0; e < d; ++e) s += cp[i * d + e] * up[e];
    }
    score[i] = s;
    top = std::max(top, s);
  }
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    score[i] = mask[i] ? std::exp(score[i] - top) : 0.0;
    z += score[i];
  }
  for (auto& s : score) s /= z;
  return score;
}

NodeId attention(Tape& tape, NodeId c, NodeId u, const std::vector<bool>& mask) {
  const Tensor& cv = tape.value(c);
  auto weights = attention_weights(cv, tape.value(u), mask);
  const std::size_t n = cv.extent(0), d = cv.extent(1);
  Tensor y(cv.algebra(), {d});
  for (std::size_t ch = 0; ch < y.channels(); ++ch) {
    auto cp = cv.channel(ch);
    auto yp = y.channel(ch);
    for (std::size_t i = 0; i < n; ++i) {
      if (weights[i] == 0.0) continue;
      for (std::size_t e = 0; e < d; ++e) yp[e] += weights[i] * cp[i * d + e];
    }
  }
  return tape.record(std::move(y), {c, u}, [c, u, n, d, weights = std::move(weights)](Tape& t, NodeId self) {
    const Tensor& cv = t.value(c);
    const Tensor& uv = t.value(u);
    const Tensor& gy = t.grad(self);
    // d loss / d weight_i = <gy, c_i>; softmax Jacobian gives the score gradient.
    std::vector<double> gw(n, 0.0);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (weights[i] == 0.0) continue;
      for (std::size_t ch = 0; ch < gy.channels(); ++ch)
        for (std::size_t e = 0; e < d; ++e) gw[i] += gy.channel(ch)[e] * cv.channel(ch)[i * d + e];
      mean += weights[i] * gw[i];
    }
    std::vector<double> gs(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) gs[i] = weights[i] * (gw[i] - mean);
    if (t.requires_grad(c)) {
      Tensor& gc = t.grad(c);
      for (std::size_t ch = 0; ch < gy.channels(); ++ch)
        for (std::size_t i = 0; i < n; ++i) {
          if (weights[i] == 0.0) continue;
          for (std::size_t e = 0; e < d; ++e)
            gc.channel(ch)[i * d + e] += weights[i] * gy.channel(ch)[e] + gs[i] * uv.channel(ch)[e];
        }
    }
    if (t.requires_grad(u)) {
      Tensor& gu = t.grad(u);
      for (std::size_t ch = 0; ch < gy.channels(); ++ch)
        for (std::size_t i = 0; i < n; ++i) {
          if (gs[i] == 0.0) continue;
          for (std::size_t e = 0; e < d; ++e) gu.channel(ch)[e] += gs[i] * cv.channel(ch)[i * d + e];
        }
    }
  });
}

NodeId readout_logits(Tape& tape, NodeId x) {
  const Tensor& xv = tape.value(x);
  if (xv.rank() != 1) throw DimensionError("readout_logits: expected a vector, got " + xv.describe());
  const bool quat = xv.is_quaternion();
  if (!quat && xv.numel() % 4 != 0)
    throw DimensionError("readout_logits: real input " + xv.describe() + " is not a multiple of 4");
  const std::size_t m = quat ? xv.numel() : xv.numel() / 4;
  Tensor y = Tensor::real({m});
  for (std::size_t o = 0; o < m; ++o) {
    if (quat) {
      const Quaternion q = xv.q(o);
      y[o] = q.r + q.i + q.j + q.k;
    } else {
      y[o] = xv[4 * o] + xv[4 * o + 1] + xv[4 * o + 2] + xv[4 * o + 3];
    }
  }
  return tape.record(std::move(y), {x}, [x, quat, m](Tape& t, NodeId self) {
    Tensor& gx = t.grad(x);
    const Tensor& gy = t.grad(self);
    for (std::size_t o = 0; o < m; ++o)
      for (std::size_t c = 0; c < 4; ++c) gx[quat ? c * m + o : 4 * o + c] += gy[o];
  });
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double top = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (auto& v : p) {
    v = std::exp(v - top);
    z += v;
  }
  for (auto& v : p) v /= z;
  return p;
}

NodeId softmax_cross_entropy(Tape& tape, NodeId logits, int label) {
  const Tensor& lv = tape.value(logits);
  if (lv.is_quaternion() || lv.rank() != 1)
    throw DimensionError("softmax_cross_entropy: logits must be a real vector, got " + lv.describe());
  if (label < 0 || static_cast<std::size_t>(label) >= lv.numel())
    throw DataError("softmax_cross_entropy: label " + std::to_string(label) + " outside {0.." +
                    std::to_string(lv.numel() - 1) + "}");
  auto p = softmax(lv.data());
  const double pt = p[static_cast<std::size_t>(label)];
  const bool clamped = pt < 1e-12;
  Tensor loss = Tensor::real({1});
  loss[0] = -std::log(clamped ? 1e-12 : pt);
  return tape.record(std::move(loss), {logits}, [logits, label, clamped, p = std::move(p)](Tape& t, NodeId self) {
    if (clamped) return;
    Tensor& g = t.grad(logits);
    const double gl = t.grad(self)[0];
    for (std::size_t k = 0; k < p.size(); ++k)
      g[k] += gl * (p[k] - (static_cast<int>(k) == label ? 1.0 : 0.0));
  });
}

NodeId sum(Tape& tape, NodeId x) {
  Tensor y = Tensor::real({1});
  for (double v : tape.value(x).data()) y[0] += v;
  return tape.record(std::move(y), {x}, [x](Tape& t, NodeId self) {
    const double g = t.grad(self)[0];
    for (auto& v : t.grad(x).data()) v += g;
  });
}

NodeId norm_sq(Tape& tape, NodeId x) {
  Tensor y = Tensor::real({1});
  for (double v : tape.value(x).data()) y[0] += v * v;
  return tape.record(std::move(y), {x}, [x](Tape& t, NodeId self) {
    const double g = t.grad(self)[0];
    auto xv = t.value(x).data();
    auto gx = t.grad(x).data();
    for (std::size_t e = 0; e < gx.size(); ++e) gx[e] += 2.0 * g * xv[e];
  });
}

NodeId batch_norm(Tape& tape, NodeId x, NodeId gamma, NodeId beta, Mode mode, const BatchNormStats& running,
                  double eps, BatchNormStats* batch_stats) {
  const Tensor& xv = tape.value(x);
  const Tensor& gv = tape.value(gamma);
  const Tensor& bv = tape.value(beta);
  if (xv.rank() != 2) throw DimensionError("batch_norm: expected [batch, n], got " + xv.describe());
  const std::size_t batch = xv.extent(0), n = xv.extent(1), chans = xv.channels();
  if (gv.is_quaternion() || gv.shape() != Shape{n} || bv.algebra() != xv.algebra() || bv.shape() != Shape{n})
    throw DimensionError("batch_norm: scale " + gv.describe() + " / shift " + bv.describe() + " do not match " +
                         xv.describe());
  if (mode == Mode::train && batch < 2)
    throw ContractError("batch_norm: train mode needs a batch of at least 2, got " + std::to_string(batch));

  BatchNormStats stats{Tensor(xv.algebra(), {n}), Tensor::real({n})};
  if (mode == Mode::train) {
    for (std::size_t c = 0; c < chans; ++c)
      for (std::size_t f = 0; f < n; ++f) {
        double m = 0.0;
        for (std::size_t b = 0; b < batch; ++b) m += xv.channel(c)[b * n + f];
        stats.mean.channel(c)[f] = m / static_cast<double>(batch);
      }
    for (std::size_t f = 0; f < n; ++f) {
      double v = 0.0;
      for (std::size_t c = 0; c < chans; ++c)
        for (std::size_t b = 0; b < batch; ++b) {
          const double dlt = xv.channel(c)[b * n + f] - stats.mean.channel(c)[f];
          v += dlt * dlt;
        }
      stats.variance[f] = v / static_cast<double>(batch * chans);
    }
    if (batch_stats) *batch_stats = stats;
  } else {
    if (!running.mean.same_layout(stats.mean) || !running.variance.same_layout(stats.variance))
      throw DimensionError("batch_norm: running statistics do not match " + xv.describe());
    stats = running;
  }

  std::vector<double> inv_std(n);
  for (std::size_t f = 0; f < n; ++f) inv_std[f] = 1.0 / std::sqrt(stats.variance[f] + eps);
  Tensor xhat = Tensor::zeros_like(xv);
  Tensor y = Tensor::zeros_like(xv);
  for (std::size_t c = 0; c < chans; ++c)
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t f = 0; f < n; ++f) {
        const std::size_t idx = b * n + f;
        xhat.channel(c)[idx] = (xv.channel(c)[idx] - stats.mean.channel(c)[f]) * inv_std[f];
        y.channel(c)[idx] = gv[f] * xhat.channel(c)[idx] + bv.channel(c)[f];
      }

  const bool train = mode == Mode::train;
  return tape.record(std::move(y), {x, gamma, beta},
                     [x, gamma, beta, batch, n, chans, train, inv_std = std::move(inv_std),
                      xhat = std::move(xhat)](Tape& t, NodeId self) {
                       const Tensor& gy = t.grad(self);
                       const Tensor& gv = t.value(gamma);
                       if (t.requires_grad(beta)) {
                         Tensor& gb = t.grad(beta);
                         for (std::size_t c = 0; c < chans; ++c)
                           for (std::size_t b = 0; b < batch; ++b)
                             for (std::size_t f = 0; f < n; ++f) gb.channel(c)[f] += gy.channel(c)[b * n + f];
                       }
                       if (t.requires_grad(gamma)) {
                         Tensor& gg = t.grad(gamma);
                         for (std::size_t c = 0; c < chans; ++c)
                           for (std::size_t b = 0; b < batch; ++b)
                             for (std::size_t f = 0; f < n; ++f)
                               gg[f] += gy.channel(c)[b * n + f] * xhat.channel(c)[b * n + f];
                       }
                       if (!t.requires_grad(x)) return;
                       Tensor& gx = t.grad(x);
                       for (std::size_t f = 0; f < n; ++f) {
                         if (!train) {
                           for (std::size_t c = 0; c < chans; ++c)
                             for (std::size_t b = 0; b < batch; ++b)
                               gx.channel(c)[b * n + f] += gv[f] * inv_std[f] * gy.channel(c)[b * n + f];
                           continue;
                         }
                         // Batch statistics depend on x: subtract the mean
                         // path and the shared-variance path.
                         double proj = 0.0;
                         for (std::size_t c = 0; c < chans; ++c)
                           for (std::size_t b = 0; b < batch; ++b)
                             proj += gy.channel(c)[b * n + f] * xhat.channel(c)[b * n + f];
                         proj *= gv[f] / static_cast<double>(batch * chans);
                         for (std::size_t c = 0; c < chans; ++c) {
                           double mean_g = 0.0;
                           for (std::size_t b = 0; b < batch; ++b) mean_g += gy.channel(c)[b * n + f];
                           mean_g *= gv[f] / static_cast<double>(batch);
                           for (std::size_t b = 0; b < batch; ++b) {
                             const std::size_t idx = b * n + f;
                             gx.channel(c)[idx] +=
                                 inv_std[f] * (gv[f] * gy.channel(c)[idx] - mean_g - xhat.channel(c)[idx] * proj);
                           }
                         }
                       }
                     });
}

}  // namespace quarc::ops
