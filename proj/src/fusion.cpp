#include "quarc/fusion.hpp"

#include "quarc/error.hpp"

namespace quarc {

LayerSpec spec_in(Algebra algebra, LayerSpec s) {
  s.algebra = Algebra::quaternion;
  return algebra == Algebra::real ? real_mirror(s) : s;
}

namespace {

LayerSpec dense_spec(std::size_t n_in, std::size_t n_out, bool bias) {
  return {LayerKind::dense, Algebra::quaternion, n_in, n_out, 1, 1, bias};
}

LayerSpec elementwise_spec(std::size_t n, bool bias) {
  return {LayerKind::elementwise, Algebra::quaternion, n, n, 1, 1, bias};
}

}  // namespace

AttentionBlock AttentionBlock::create(ParameterSet& params, const std::string& name, Algebra algebra,
                                      std::size_t context_dim, std::size_t query_dim, std::uint64_t seed) {
  AttentionBlock block;
  block.query_ = Layer::create(params, name + ".W_att", spec_in(algebra, dense_spec(query_dim, context_dim, false)), seed);
  return block;
}

NodeId AttentionBlock::forward(Tape& tape, NodeId c, NodeId p_prime, const std::vector<bool>& mask) const {
  const NodeId u = query_.forward(tape, p_prime);
  return ops::attention(tape, c, u, mask);
}

GatedSumBlock GatedSumBlock::create(ParameterSet& params, const std::string& name, Algebra algebra,
                                    std::size_t text_dim, std::size_t image_dim, std::size_t common_dim,
                                    std::uint64_t seed) {
  GatedSumBlock g;
  auto make = [&](const char* part, const LayerSpec& s) {
    return Layer::create(params, name + "." + part, spec_in(algebra, s), seed);
  };
  g.la = make("L_a", dense_spec(text_dim, common_dim, true));
  g.lp = make("L_p", dense_spec(image_dim, common_dim, true));
  g.gaa = make("G_aa", dense_spec(common_dim, common_dim, true));
  g.gap = make("G_ap", dense_spec(common_dim, common_dim, false));
  g.gpa = make("G_pa", dense_spec(common_dim, common_dim, true));
  g.gpp = make("G_pp", dense_spec(common_dim, common_dim, false));
  g.ma = make("M_a", elementwise_spec(common_dim, true));
  g.mp = make("M_p", elementwise_spec(common_dim, false));
  return g;
}

NodeId GatedSumBlock::gate(Tape& tape, NodeId beta, NodeId v) { return ops::hadamard(tape, beta, v); }

NodeId GatedSumBlock::forward(Tape& tape, NodeId a, NodeId p) const {
  const NodeId a1 = la.forward(tape, a);
  const NodeId p1 = lp.forward(tape, p);
  const NodeId beta_a = ops::sigmoid(tape, ops::add(tape, gaa.forward(tape, a1), gap.forward(tape, p1)));
  const NodeId beta_p = ops::sigmoid(tape, ops::add(tape, gpa.forward(tape, a1), gpp.forward(tape, p1)));
  const NodeId m = ops::tanh(tape, ops::add(tape, ma.forward(tape, a1), mp.forward(tape, p1)));
  return ops::add(tape, gate(tape, beta_a, a1), gate(tape, beta_p, m));
}

std::vector<LayerSpec> GatedSumBlock::specs() const {
  return {la.spec(), lp.spec(), gaa.spec(), gap.spec(), gpa.spec(), gpp.spec(), ma.spec(), mp.spec()};
}

ConcatHead ConcatHead::create(ParameterSet& params, const std::string& name, Algebra algebra, std::size_t input_dim,
                              double dropout, std::uint64_t seed) {
  ConcatHead head;
  head.drop_ = DropoutSite(name + ".dropout", dropout);
  head.out_ = Layer::create(params, name + ".out", spec_in(algebra, dense_spec(input_dim, 2, true)), seed);
  return head;
}

NodeId ConcatHead::logits(Tape& tape, const std::vector<NodeId>& parts, Mode mode, std::uint64_t sample_key) const {
  if (parts.empty()) throw ContractError("concat_head: no parts to classify");
  NodeId x = parts.size() == 1 ? parts.front() : ops::concat(tape, parts);
  x = drop_.apply(tape, x, mode, sample_key);
  return ops::readout_logits(tape, out_.forward(tape, x));
}

}  // namespace quarc
