#include "quarc/layers.hpp"

#include <cmath>
#include <numbers>

#include "quarc/error.hpp"
#include "quarc/rng.hpp"

namespace quarc {

namespace {

std::size_t channels_of(Algebra a) { return a == Algebra::quaternion ? 4 : 1; }

std::pair<std::size_t, std::size_t> fans(const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::dense:
      return {s.n_in, s.n_out};
    case LayerKind::conv1d:
      return {s.n_in * s.kw, s.n_out * s.kw};
    case LayerKind::conv2d:
      return {s.n_in * s.kh * s.kw, s.n_out * s.kh * s.kw};
    default:
      return {1, 1};
  }
}

}  // namespace

std::size_t scalar_count(const LayerSpec& s) {
  const std::size_t ch = channels_of(s.algebra);
  const std::size_t bias = s.bias ? ch * s.n_out : 0;
  switch (s.kind) {
    case LayerKind::dense:
      return ch * s.n_out * s.n_in + bias;
    case LayerKind::conv1d:
      return ch * s.n_out * s.n_in * s.kw + bias;
    case LayerKind::conv2d:
      return ch * s.n_out * s.n_in * s.kh * s.kw + bias;
    case LayerKind::elementwise:
      return ch * s.n_out + bias;
    case LayerKind::batch_norm:
      // real γ per feature, β in the layer algebra
      return s.n_out + ch * s.n_out;
  }
  return 0;
}

LayerSpec real_mirror(const LayerSpec& s) {
  if (s.algebra == Algebra::real) return s;
  LayerSpec m = s;
  m.algebra = Algebra::real;
  m.n_in = 4 * s.n_in;
  m.n_out = 4 * s.n_out;
  return m;
}

Tensor quaternion_glorot_init(std::size_t fan_in, std::size_t fan_out, Shape shape, std::uint64_t seed) {
  if (fan_in < 1 || fan_out < 1) throw ConfigError("quaternion_glorot_init: fans must be at least 1");
  const double sigma = 1.0 / std::sqrt(2.0 * static_cast<double>(fan_in + fan_out));
  Rng rng(seed);
  Tensor w = Tensor::quaternion(std::move(shape));
  for (std::size_t e = 0; e < w.numel(); ++e) {
    const double modulus = sigma * std::sqrt(-2.0 * std::log(1.0 - rng.uniform()));
    double ux, uy, uz, len;
    do {
      ux = rng.normal();
      uy = rng.normal();
      uz = rng.normal();
      len = std::sqrt(ux * ux + uy * uy + uz * uz);
    } while (len < 1e-12);
    const double theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double s = modulus * std::sin(theta) / len;
    w.set_q(e, {modulus * std::cos(theta), s * ux, s * uy, s * uz});
  }
  return w;
}

Tensor real_glorot_init(std::size_t fan_in, std::size_t fan_out, Shape shape, std::uint64_t seed) {
  if (fan_in < 1 || fan_out < 1) throw ConfigError("real_glorot_init: fans must be at least 1");
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Rng rng(seed);
  Tensor w = Tensor::real(std::move(shape));
  for (auto& v : w.data()) v = rng.uniform(-a, a);
  return w;
}

Shape Layer::weight_shape(const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::dense:
      return {s.n_out, s.n_in};
    case LayerKind::conv1d:
      return {s.kw, s.n_in, s.n_out};
    case LayerKind::conv2d:
      return {s.kh, s.kw, s.n_in, s.n_out};
    case LayerKind::elementwise:
      return {s.n_out};
    case LayerKind::batch_norm:
      break;
  }
  throw ConfigError("Layer: batch_norm specs are built with BatchNormLayer");
}

Layer Layer::create(ParameterSet& params, const std::string& name, const LayerSpec& spec, std::uint64_t seed) {
  if (spec.n_in == 0 || spec.n_out == 0 || spec.kh == 0 || spec.kw == 0)
    throw ConfigError("layer '" + name + "': zero-sized dimension");
  if (spec.kind == LayerKind::elementwise && spec.n_in != spec.n_out)
    throw ConfigError("layer '" + name + "': elementwise layers need n_in == n_out");
  Layer layer;
  layer.name_ = name;
  layer.spec_ = spec;
  const auto [fan_in, fan_out] = fans(spec);
  const std::string wname = name + ".w";
  const std::uint64_t wseed = mix_keys(seed, fnv1a(wname));
  Tensor w = spec.algebra == Algebra::quaternion ? quaternion_glorot_init(fan_in, fan_out, weight_shape(spec), wseed)
                                                 : real_glorot_init(fan_in, fan_out, weight_shape(spec), wseed);
  layer.weight_ = params.add(wname, std::move(w));
  if (spec.bias) layer.bias_ = params.add(name + ".b", Tensor(spec.algebra, {spec.n_out}));
  return layer;
}

NodeId Layer::forward(Tape& tape, NodeId x) const {
  const NodeId w = tape.param(weight_);
  const NodeId b = spec_.bias ? tape.param(bias_) : kNoNode;
  switch (spec_.kind) {
    case LayerKind::dense:
      return ops::dense(tape, w, b, x);
    case LayerKind::conv1d:
      return ops::conv1d(tape, w, b, x);
    case LayerKind::conv2d:
      return ops::conv2d(tape, w, b, x);
    case LayerKind::elementwise: {
      const NodeId y = ops::mul(tape, w, x);
      return b == kNoNode ? y : ops::add(tape, y, b);
    }
    case LayerKind::batch_norm:
      break;
  }
  throw ContractError("layer '" + name_ + "': unsupported kind");
}

DropoutSite::DropoutSite(const std::string& name, double rate) : site_(fnv1a(name)), rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout '" + name + "': rate must lie in [0, 1)");
}

NodeId DropoutSite::apply(Tape& tape, NodeId x, Mode mode, std::uint64_t sample_key) const {
  return ops::dropout(tape, x, rate_, mode, mix_keys(sample_key, site_));
}

BatchNormLayer BatchNormLayer::create(ParameterSet& params, const std::string& name, Algebra algebra, std::size_t n,
                                      double momentum, double eps) {
  BatchNormLayer bn;
  bn.name_ = name;
  bn.algebra_ = algebra;
  bn.n_ = n;
  bn.momentum_ = momentum;
  bn.eps_ = eps;
  Tensor gamma = Tensor::real({n});
  gamma.fill(1.0);
  bn.gamma_ = params.add(name + ".gamma", std::move(gamma));
  bn.beta_ = params.add(name + ".beta", Tensor(algebra, {n}));
  bn.running_.mean = Tensor(algebra, {n});
  bn.running_.variance = Tensor::real({n});
  bn.running_.variance.fill(1.0);
  return bn;
}

std::vector<NodeId> BatchNormLayer::forward(Tape& tape, const std::vector<NodeId>& xs, Mode mode) {
  const NodeId stacked = ops::stack(tape, xs);
  ops::BatchNormStats batch;
  const NodeId y =
      ops::batch_norm(tape, stacked, tape.param(gamma_), tape.param(beta_), mode, running_, eps_, &batch);
  if (mode == Mode::train) {
    auto rm = running_.mean.data();
    auto bm = batch.mean.data();
    for (std::size_t e = 0; e < rm.size(); ++e) rm[e] = (1.0 - momentum_) * rm[e] + momentum_ * bm[e];
    auto rv = running_.variance.data();
    auto bv = batch.variance.data();
    for (std::size_t e = 0; e < rv.size(); ++e) rv[e] = (1.0 - momentum_) * rv[e] + momentum_ * bv[e];
  }
  std::vector<NodeId> out;
  out.reserve(xs.size());
  for (std::size_t b = 0; b < xs.size(); ++b) out.push_back(ops::row(tape, y, b));
  return out;
}

LayerSpec BatchNormLayer::spec() const {
  LayerSpec s;
  s.kind = LayerKind::batch_norm;
  s.algebra = algebra_;
  s.n_in = s.n_out = n_;
  return s;
}

}  // namespace quarc
