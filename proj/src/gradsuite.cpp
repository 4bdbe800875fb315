#include "quarc/gradsuite.hpp"

#include "quarc/error.hpp"
#include "quarc/rng.hpp"

namespace quarc {

namespace {

// Inputs are registered as parameters so the checker perturbs them too.
Tensor random_tensor(Algebra a, Shape shape, Rng& rng) {
  Tensor t(a, std::move(shape));
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

// Values bounded away from zero keep the ReLU kink out of reach of h.
Tensor off_kink_tensor(Algebra a, Shape shape, Rng& rng) {
  Tensor t(a, std::move(shape));
  for (auto& v : t.data()) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
  return t;
}

// Σ r ⊙ y with a fixed random r of y's layout.
NodeId projection_loss(Tape& tape, NodeId y, std::uint64_t seed) {
  Rng rng(seed);
  const NodeId r = tape.constant(random_tensor(tape.value(y).algebra(), tape.value(y).shape(), rng));
  return ops::sum(tape, ops::hadamard(tape, y, r));
}

LayerSpec small(LayerKind kind, Algebra a, std::size_t n_in, std::size_t n_out, std::size_t kh = 1, std::size_t kw = 1,
                bool bias = true) {
  return {kind, a, n_in, n_out, kh, kw, bias};
}

class Suite {
 public:
  Suite(Algebra a, std::uint64_t seed) : a_(a), seed_(seed) {}

  template <typename Build>
  void run(const std::string& name, Build&& build) {
    ParameterSet params;
    LossFn loss = build(params, mix_keys(seed_, fnv1a(name)));
    const GradCheckReport r = finite_diff_check(params, loss);
    for (auto b : r.blocks) {
      b.name = name + "/" + b.name;
      report_.blocks.push_back(std::move(b));
    }
  }

  Algebra algebra() const { return a_; }
  GradCheckReport take() { return std::move(report_); }

 private:
  Algebra a_;
  std::uint64_t seed_;
  GradCheckReport report_;
};

}  // namespace

GradCheckReport layer_grad_checks(Algebra a, std::uint64_t seed) {
  Suite suite(a, seed);
  const std::size_t read = a == Algebra::quaternion ? 2 : 8;  // head output width

  auto layer_case = [&](const std::string& name, LayerSpec spec, Shape x_shape, bool x_trainable,
                        std::size_t zero_rows = 0) {
    suite.run(name, [=](ParameterSet& ps, std::uint64_t key) -> LossFn {
      Rng rng(key);
      Layer layer = Layer::create(ps, "layer", spec, key);
      if (spec.bias) {
        for (auto& v : ps[layer.bias_index()].value.data()) v = rng.normal();
      }
      Tensor x = random_tensor(a, x_shape, rng);
      // trailing zero rows exercise the padded-sequence shortcut
      for (std::size_t r = x_shape[0] - zero_rows; r < x_shape[0]; ++r)
        for (std::size_t c = 0; c < x.channels(); ++c)
          for (std::size_t e = 0; e < x_shape[1]; ++e) x.channel(c)[r * x_shape[1] + e] = 0.0;
      const std::size_t xi = ps.add("x", std::move(x), x_trainable);
      return [layer, xi, key](Tape& t) { return projection_loss(t, layer.forward(t, t.param(xi)), key); };
    });
  };
  layer_case("dense", small(LayerKind::dense, a, 3, 2), {3}, true);
  layer_case("dense_nobias", small(LayerKind::dense, a, 2, 3, 1, 1, false), {2}, true);
  layer_case("conv1d", small(LayerKind::conv1d, a, 2, 3, 1, 5), {6, 2}, true);
  layer_case("conv1d_padded", small(LayerKind::conv1d, a, 2, 3, 1, 5), {7, 2}, false, 3);
  layer_case("conv2d_2x2", small(LayerKind::conv2d, a, 2, 3, 2, 2), {4, 5, 2}, true);
  layer_case("conv2d_3x3", small(LayerKind::conv2d, a, 2, 2, 3, 3), {4, 4, 2}, true);
  layer_case("elementwise", small(LayerKind::elementwise, a, 3, 3), {3}, true);

  auto unary_case = [&](const std::string& name, Shape shape, auto op) {
    suite.run(name, [=](ParameterSet& ps, std::uint64_t key) -> LossFn {
      Rng rng(key);
      const std::size_t xi = ps.add("x", off_kink_tensor(a, shape, rng));
      return [=](Tape& t) { return projection_loss(t, op(t, t.param(xi)), key); };
    });
  };
  unary_case("relu", {5}, [](Tape& t, NodeId x) { return ops::relu(t, x); });
  unary_case("sigmoid", {5}, [](Tape& t, NodeId x) { return ops::sigmoid(t, x); });
  unary_case("tanh", {5}, [](Tape& t, NodeId x) { return ops::tanh(t, x); });
  unary_case("global_max_pool", {4, 3}, [](Tape& t, NodeId x) { return ops::global_max_pool(t, x); });
  unary_case("max_pool2d", {4, 5, 2}, [](Tape& t, NodeId x) { return ops::max_pool2d(t, x, 2); });
  unary_case("dropout", {6}, [](Tape& t, NodeId x) { return ops::dropout(t, x, 0.35, Mode::train, 7); });
  unary_case("norm_sq", {3}, [](Tape& t, NodeId x) { return ops::norm_sq(t, x); });

  suite.run("softmax_cross_entropy", [=](ParameterSet& ps, std::uint64_t key) -> LossFn {
    Rng rng(key);
    const std::size_t xi = ps.add("x", random_tensor(a, {read}, rng));
    return [=](Tape& t) { return ops::softmax_cross_entropy(t, ops::readout_logits(t, t.param(xi)), 1); };
  });

  suite.run("attention_op", [=](ParameterSet& ps, std::uint64_t key) -> LossFn {
    Rng rng(key);
    const std::size_t ci = ps.add("c", random_tensor(a, {3, 2}, rng));
    const std::size_t ui = ps.add("u", random_tensor(a, {2}, rng));
    return [=](Tape& t) {
      return projection_loss(t, ops::attention(t, t.param(ci), t.param(ui), {true, true, false}), key);
    };
  });

  suite.run("batch_norm", [=](ParameterSet& ps, std::uint64_t key) -> LossFn {
    Rng rng(key);
    BatchNormLayer bn = BatchNormLayer::create(ps, "bn", a, 2);
    for (auto& v : ps[ps.index_of("bn.gamma")].value.data()) v = rng.uniform(0.5, 1.5);
    for (auto& v : ps[ps.index_of("bn.beta")].value.data()) v = rng.normal();
    std::vector<std::size_t> xs;
    for (int b = 0; b < 3; ++b) xs.push_back(ps.add("x" + std::to_string(b), random_tensor(a, {2}, rng)));
    return [=](Tape& t) mutable {
      std::vector<NodeId> in;
      for (auto i : xs) in.push_back(t.param(i));
      const auto out = bn.forward(t, in, Mode::train);
      return projection_loss(t, ops::stack(t, out), key);
    };
  });

  suite.run("attention", [=](ParameterSet& ps, std::uint64_t key) -> LossFn {
    Rng rng(key);
    AttentionBlock att = AttentionBlock::create(ps, "att", a, 3, 2, key);
    const std::size_t cn = a == Algebra::quaternion ? 3 : 12;
    const std::size_t pn = a == Algebra::quaternion ? 2 : 8;
    const std::size_t ci = ps.add("c", random_tensor(a, {4, cn}, rng));
    const std::size_t pi = ps.add("p", random_tensor(a, {pn}, rng));
    return [=](Tape& t) {
      return projection_loss(t, att.forward(t, t.param(ci), t.param(pi), {true, true, true, false}), key);
    };
  });

  suite.run("gated_sum", [=](ParameterSet& ps, std::uint64_t key) -> LossFn {
    Rng rng(key);
    GatedSumBlock gs = GatedSumBlock::create(ps, "gs", a, 3, 2, 2, key);
    for (std::size_t p = 0; p < ps.size(); ++p)
      if (ps[p].name.ends_with(".b"))
        for (auto& v : ps[p].value.data()) v = 0.3 * rng.normal();
    const std::size_t m = a == Algebra::quaternion ? 1 : 4;
    const std::size_t ai = ps.add("a", random_tensor(a, {3 * m}, rng));
    const std::size_t pi = ps.add("p", random_tensor(a, {2 * m}, rng));
    return [=](Tape& t) { return projection_loss(t, gs.forward(t, t.param(ai), t.param(pi)), key); };
  });

  suite.run("concat_head", [=](ParameterSet& ps, std::uint64_t key) -> LossFn {
    Rng rng(key);
    ConcatHead head = ConcatHead::create(ps, "head", a, 4, 0.35, key);
    const std::size_t m = a == Algebra::quaternion ? 1 : 4;
    const std::size_t p0 = ps.add("part0", random_tensor(a, {2 * m}, rng));
    const std::size_t p1 = ps.add("part1", random_tensor(a, {2 * m}, rng));
    return [=](Tape& t) {
      const NodeId z = head.logits(t, {t.param(p0), t.param(p1)}, Mode::train, key);
      return ops::softmax_cross_entropy(t, z, 0);
    };
  });

  return suite.take();
}

GradCheckReport model_grad_check(const ModelConfig& cfg, std::uint64_t seed, std::size_t max_scalars) {
  ModelConfig c = cfg;
  c.seed = seed;
  Model model = Model::build(c);
  // Zero-initialised biases put ReLU inputs exactly on the kink whenever a
  // text is empty (the conv output is then the bias alone), so move them off.
  Rng brng(mix_keys(seed, fnv1a("biases")));
  for (std::size_t p = 0; p < model.params().size(); ++p) {
    Parameter& prm = model.params()[p];
    if (prm.name.ends_with(".b") || prm.name.ends_with(".beta"))
      for (auto& v : prm.value.data()) v = 0.1 * brng.normal();
  }

  Dataset ds;
  ds.embeddings = EmbeddingTable(c.embed_dim, seed);
  ds.samples = synth_samples(SynthTask::xor_task, 3, seed);
  Rng rng(mix_keys(seed, fnv1a("features")));
  for (auto& s : ds.samples) {
    std::vector<double> f(c.feature_dim);
    for (auto& v : f) v = rng.normal();
    s.features = std::move(f);
  }
  std::vector<std::size_t> all(ds.samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto samples = encode_samples(ds, all, c);

  const LossFn loss = [&](Tape& t) {
    std::vector<NodeId> terms;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const NodeId z = model.logits(t, samples[i], Mode::train, mix_keys(seed, i));
      terms.push_back(ops::softmax_cross_entropy(t, z, samples[i].label));
    }
    NodeId total = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) total = ops::add(t, total, terms[i]);
    return total;
  };
  FdOptions opts;
  opts.max_scalars = max_scalars;
  opts.seed = seed;
  return finite_diff_check(model.params(), loss, opts);
}

}  // namespace quarc
