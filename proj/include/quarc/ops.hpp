#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "quarc/autodiff.hpp"

// Differentiable operations recorded on a Tape. Each works on real and
// quaternion tensors alike; where the algebras differ (products, pooling,
// dropout granularity, logit readout) the quaternion rule is noted.
namespace quarc::ops {

enum class Mode { train, eval };

// Layouts as in kernels.hpp. b may be kNoNode.
NodeId dense(Tape& tape, NodeId w, NodeId b, NodeId x);
NodeId conv1d(Tape& tape, NodeId k, NodeId b, NodeId x);
NodeId conv2d(Tape& tape, NodeId k, NodeId b, NodeId x);

// Split activations: the real function applied to every component.
NodeId relu(Tape& tape, NodeId x);
NodeId sigmoid(Tape& tape, NodeId x);
NodeId tanh(Tape& tape, NodeId x);

NodeId add(Tape& tape, NodeId a, NodeId b);
// Elementwise product; per-element Hamilton product for quaternions.
NodeId mul(Tape& tape, NodeId a, NodeId b);
// Product of every real component (quaternions are multiplied
// component by component, not by the Hamilton rule).
NodeId hadamard(Tape& tape, NodeId a, NodeId b);
NodeId scale(Tape& tape, NodeId x, double s);
NodeId concat(Tape& tape, const std::vector<NodeId>& parts);
NodeId reshape(Tape& tape, NodeId x, Shape shape);
NodeId stack(Tape& tape, const std::vector<NodeId>& rows);
NodeId row(Tape& tape, NodeId x, std::size_t index);

// [len, n] -> [n]. Quaternion: per channel, the whole quaternion of largest
// norm (lowest position on ties). Real: per element maximum.
NodeId global_max_pool(Tape& tape, NodeId x);
// [h, w, n] -> [h/window, w/window, n], non-overlapping windows, same
// selection rule as global_max_pool.
NodeId max_pool2d(Tape& tape, NodeId x, std::size_t window);

// Inverted dropout. Quaternion entries are kept or dropped whole. The mask
// is a pure function of (key, element index).
NodeId dropout(Tape& tape, NodeId x, double rate, Mode mode, std::uint64_t key);

// c [n, d], u [d] -> Σ_i softmax(score)_i · c_i with score_i the real inner
// product of c_i and u over all components. Masked-out positions (mask[i]
// false) get zero weight.
NodeId attention(Tape& tape, NodeId c, NodeId u, const std::vector<bool>& mask);
std::vector<double> attention_weights(const Tensor& c, const Tensor& u, const std::vector<bool>& mask);

// Quaternion [m] -> real [m] by summing the four components; real [4m] ->
// real [m] by summing consecutive groups of four.
NodeId readout_logits(Tape& tape, NodeId x);

std::vector<double> softmax(std::span<const double> logits);
// −log(max(softmax(logits)[label], 1e-12)).
NodeId softmax_cross_entropy(Tape& tape, NodeId logits, int label);

NodeId sum(Tape& tape, NodeId x);
NodeId norm_sq(Tape& tape, NodeId x);

struct BatchNormStats {
  Tensor mean;      // same algebra as x, shape [n]
  Tensor variance;  // real [n]
};

// x [B, n]. Per feature: μ = component-wise batch mean, v = mean over the
// batch of ‖x−μ‖² / channels, y = γ·(x−μ)/sqrt(v+ε) + β. Train mode uses
// batch statistics (reported through `batch_stats`); eval mode uses
// `running`.
NodeId batch_norm(Tape& tape, NodeId x, NodeId gamma, NodeId beta, Mode mode, const BatchNormStats& running,
                  double eps, BatchNormStats* batch_stats);

namespace debug {
// Fault injection for the gradient checker's self-test: when set, dense
// weight gradients are scaled by 1.01.
void set_backward_fault(bool enabled);
bool backward_fault();
}  // namespace debug

}  // namespace quarc::ops
