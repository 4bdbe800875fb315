#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quarc/layers.hpp"

namespace quarc {

// Quaternion layer spec, mirrored to reals when `algebra` is real. All
// fusion dimensions are given in quaternion units.
LayerSpec spec_in(Algebra algebra, LayerSpec quaternion_spec);

// Image-conditioned attention over text positions: u = W_att ⊗ p′ and
// a_c = Σ_i softmax_i(<c_i, u>) · c_i.
class AttentionBlock {
 public:
  static AttentionBlock create(ParameterSet& params, const std::string& name, Algebra algebra, std::size_t context_dim,
                               std::size_t query_dim, std::uint64_t seed);

  // c [n, context_dim], p_prime [query_dim]; mask[i] false excludes position i.
  NodeId forward(Tape& tape, NodeId c, NodeId p_prime, const std::vector<bool>& mask) const;
  std::vector<LayerSpec> specs() const { return {query_.spec()}; }

 private:
  Layer query_;
};

// Symmetric gated summation of a text vector a and an image vector p:
//   a′ = L_a⊗a + l_a            p′ = L_p⊗p + l_p
//   β_a = σ(G_aa⊗a′ + G_ap⊗p′ + g_a)
//   β_p = σ(G_pa⊗a′ + G_pp⊗p′ + g_p)
//   m = tanh(M_a∗a′ + M_p∗p′ + m_b)        (∗ per-feature product)
//   f = β_a∗a′ + β_p∗m
// σ and tanh act per component, and the gates scale per component.
class GatedSumBlock {
 public:
  static GatedSumBlock create(ParameterSet& params, const std::string& name, Algebra algebra, std::size_t text_dim,
                              std::size_t image_dim, std::size_t common_dim, std::uint64_t seed);

  NodeId forward(Tape& tape, NodeId a, NodeId p) const;
  std::vector<LayerSpec> specs() const;

  Layer la, lp, gaa, gap, gpa, gpp, ma, mp;

 private:
  // Component-wise gate: real product of every component (not Hamilton).
  static NodeId gate(Tape& tape, NodeId beta, NodeId v);
};

// concat(parts) → dropout → dense to two class outputs → logits. Quaternion
// outputs are read out as the sum of their four components.
class ConcatHead {
 public:
  static ConcatHead create(ParameterSet& params, const std::string& name, Algebra algebra, std::size_t input_dim,
                           double dropout, std::uint64_t seed);

  // Real logits [2].
  NodeId logits(Tape& tape, const std::vector<NodeId>& parts, Mode mode, std::uint64_t sample_key) const;
  std::vector<LayerSpec> specs() const { return {out_.spec()}; }

 private:
  Layer out_;
  DropoutSite drop_;
};

}  // namespace quarc
