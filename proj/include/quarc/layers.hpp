#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quarc/autodiff.hpp"
#include "quarc/ops.hpp"

namespace quarc {

using ops::Mode;

enum class LayerKind { dense, conv1d, conv2d, elementwise, batch_norm };

// Declarative description of one parameterised layer. Unit counts are in
// the layer's own algebra: quaternions for quaternion layers, reals for
// real ones. conv1d uses kw as its window width.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  Algebra algebra = Algebra::quaternion;
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  std::size_t kh = 1;
  std::size_t kw = 1;
  bool bias = true;

  bool operator==(const LayerSpec&) const = default;
};

// Trainable real scalars the layer owns.
std::size_t scalar_count(const LayerSpec& spec);

// Real-valued counterpart with identical topology: every quaternion unit
// becomes four real units. Real specs are returned unchanged.
LayerSpec real_mirror(const LayerSpec& spec);

// Polar-form quaternion initialisation: |w| ~ Rayleigh(σ) with
// σ = 1/sqrt(2(fan_in+fan_out)), a uniformly random pure unit axis u and a
// phase θ ~ U(−π, π); w = |w|(cos θ + u sin θ).
Tensor quaternion_glorot_init(std::size_t fan_in, std::size_t fan_out, Shape shape, std::uint64_t seed);

// Glorot-uniform real initialisation, U(−a, a) with a = sqrt(6/(fan_in+fan_out)).
Tensor real_glorot_init(std::size_t fan_in, std::size_t fan_out, Shape shape, std::uint64_t seed);

// A dense, convolution or elementwise layer registered in a ParameterSet.
// Weights are stored as "<name>.w" and biases as "<name>.b".
class Layer {
 public:
  static Layer create(ParameterSet& params, const std::string& name, const LayerSpec& spec, std::uint64_t seed);

  NodeId forward(Tape& tape, NodeId x) const;

  const LayerSpec& spec() const noexcept { return spec_; }
  const std::string& name() const noexcept { return name_; }
  std::size_t weight_index() const noexcept { return weight_; }
  bool has_bias() const noexcept { return spec_.bias; }
  std::size_t bias_index() const noexcept { return bias_; }

  static Shape weight_shape(const LayerSpec& spec);

 private:
  std::string name_;
  LayerSpec spec_;
  std::size_t weight_ = 0;
  std::size_t bias_ = 0;
};

// Dropout with a stable per-site key; the mask for one sample is a pure
// function of (sample key, site).
class DropoutSite {
 public:
  DropoutSite() = default;
  DropoutSite(const std::string& name, double rate);

  NodeId apply(Tape& tape, NodeId x, Mode mode, std::uint64_t sample_key) const;
  double rate() const noexcept { return rate_; }

 private:
  std::uint64_t site_ = 0;
  double rate_ = 0.0;
};

// Batch normalisation over a [batch, n] stack: real scale γ (trainable,
// "<name>.gamma"), shift β in the layer algebra ("<name>.beta") and running
// statistics kept in the layer.
class BatchNormLayer {
 public:
  static BatchNormLayer create(ParameterSet& params, const std::string& name, Algebra algebra, std::size_t n,
                               double momentum = 0.1, double eps = 1e-5);

  // Normalises a batch of rank-1 inputs; updates the running statistics in
  // train mode.
  std::vector<NodeId> forward(Tape& tape, const std::vector<NodeId>& xs, Mode mode);

  const ops::BatchNormStats& running() const noexcept { return running_; }
  ops::BatchNormStats& running() noexcept { return running_; }
  LayerSpec spec() const;

 private:
  std::string name_;
  Algebra algebra_ = Algebra::quaternion;
  std::size_t n_ = 0;
  std::size_t gamma_ = 0;
  std::size_t beta_ = 0;
  double momentum_ = 0.1;
  double eps_ = 1e-5;
  ops::BatchNormStats running_;
};

}  // namespace quarc
