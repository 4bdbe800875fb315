#include "doctest.h"
#include "quarc/error.hpp"
#include "quarc/fusion.hpp"
#include "quarc/gradsuite.hpp"
#include "test_util.hpp"

using namespace quarc;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

Tensor quats(std::initializer_list<Quaternion> qs, Shape shape) {
  Tensor t = Tensor::quaternion(std::move(shape));
  std::size_t e = 0;
  for (const auto& q : qs) t.set_q(e++, q);
  return t;
}

void zero_all(ParameterSet& params) {
  for (std::size_t p = 0; p < params.size(); ++p) params[p].value.fill(0.0);
}

}  // namespace

TEST_CASE("attention weights for hand-built scores") {
  const double ln2 = std::log(2.0);
  const Tensor c = quats({{ln2, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}}, {3, 1});
  const Tensor u = quats({{1, 0, 0, 0}}, {1});
  const auto w = ops::attention_weights(c, u, {true, true, true});
  REQUIRE(w.size() == 3);
  CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(w[2] == doctest::Approx(0.25).epsilon(1e-15));

  Tape tape;
  const Tensor a = tape.value(ops::attention(tape, tape.constant(c), tape.constant(u), {true, true, true}));
  CHECK(max_abs_diff(a.q(0), Quaternion{0.5 * ln2, 0.25, 0.25, 0}) < 1e-15);
}

TEST_CASE("attention block through the query map") {
  ParameterSet params;
  const AttentionBlock att = AttentionBlock::create(params, "att", Algebra::quaternion, 2, 3, 1);
  Rng rng(4);
  const Tensor c = random_tensor(Algebra::quaternion, {5, 2}, rng);
  const Tensor p = random_tensor(Algebra::quaternion, {3}, rng);
  const std::vector<bool> all(5, true);

  Tape tape(&params);
  const Tensor got = tape.value(att.forward(tape, tape.constant(c), tape.constant(p), all));
  const Tensor u = qmatvec(params[0].value, p);
  const auto w = ops::attention_weights(c, u, all);
  double total = 0;
  for (double v : w) {
    CHECK(v >= 0.0);
    total += v;
  }
  CHECK(std::abs(total - 1.0) < 1e-12);
  for (std::size_t d = 0; d < 2; ++d) {
    Quaternion want{};
    for (std::size_t i = 0; i < 5; ++i) want += c.q(i * 2 + d) * w[i];
    CHECK(max_abs_diff(got.q(d), want) < 1e-12);
  }

  // singleton context
  const Tensor c1 = random_tensor(Algebra::quaternion, {1, 2}, rng);
  Tensor flat = c1;
  flat.reshape({2});
  CHECK(max_abs_diff(tape.value(att.forward(tape, tape.constant(c1), tape.constant(p), {true})), flat) < 1e-15);

  // zero query map: unmasked mean
  zero_all(params);
  Tape t2(&params);
  const std::vector<bool> mask{true, false, true, true, false};
  const Tensor mean = t2.value(att.forward(t2, t2.constant(c), t2.constant(p), mask));
  for (std::size_t d = 0; d < 2; ++d) {
    const Quaternion want = (c.q(0 * 2 + d) + c.q(2 * 2 + d) + c.q(3 * 2 + d)) * (1.0 / 3.0);
    CHECK(max_abs_diff(mean.q(d), want) < 1e-15);
  }
  CHECK_THROWS_AS(att.forward(t2, t2.constant(c), t2.constant(p), std::vector<bool>(5, false)), ContractError);
}

TEST_CASE("attention invariants over random instances") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(8), d = 1 + rng.below(4);
    const Tensor c = random_tensor(Algebra::quaternion, {n, d}, rng);
    const Tensor u = random_tensor(Algebra::quaternion, {d}, rng);
    std::vector<bool> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = rng.uniform() < 0.7;
    mask[rng.below(n)] = true;

    Tape tape;
    const Tensor a = tape.value(ops::attention(tape, tape.constant(c), tape.constant(u), mask));
    const auto w = ops::attention_weights(c, u, mask);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(w[i] >= 0.0);
      if (!mask[i]) CHECK(w[i] == 0.0);
      total += w[i];
    }
    CHECK(std::abs(total - 1.0) < 1e-12);

    // convex hull per real coordinate
    for (std::size_t ch = 0; ch < 4; ++ch)
      for (std::size_t e = 0; e < d; ++e) {
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t i = 0; i < n; ++i) {
          if (!mask[i]) continue;
          lo = std::min(lo, c.channel(ch)[i * d + e]);
          hi = std::max(hi, c.channel(ch)[i * d + e]);
        }
        const double v = a.channel(ch)[e];
        CHECK(v >= lo - 1e-12);
        CHECK(v <= hi + 1e-12);
      }

    // permutation equivariance
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    Tensor cp = Tensor::quaternion({n, d});
    std::vector<bool> mp(n);
    for (std::size_t i = 0; i < n; ++i) {
      mp[i] = mask[perm[i]];
      for (std::size_t e = 0; e < d; ++e) cp.set_q(i * d + e, c.q(perm[i] * d + e));
    }
    CHECK(max_abs_diff(tape.value(ops::attention(tape, tape.constant(cp), tape.constant(u), mp)), a) < 1e-12);
  }
}

TEST_CASE("gated sum fixed cases") {
  ParameterSet params;
  const GatedSumBlock gs = GatedSumBlock::create(params, "gs", Algebra::quaternion, 3, 2, 2, 7);
  Rng rng(5);
  const Tensor a = random_tensor(Algebra::quaternion, {3}, rng);
  const Tensor p = random_tensor(Algebra::quaternion, {2}, rng);

  zero_all(params);
  {
    Tape tape(&params);
    for (double v : tape.value(gs.forward(tape, tape.constant(a), tape.constant(p))).data()) CHECK(v == 0.0);
  }

  // saturated text gate with a' = l_a: f -> a'
  const Tensor target = random_tensor(Algebra::quaternion, {2}, rng);
  params[gs.la.bias_index()].value = target;
  params[gs.gaa.bias_index()].value.fill(30.0);
  {
    Tape tape(&params);
    const Tensor f = tape.value(gs.forward(tape, tape.constant(a), tape.constant(p)));
    CHECK(max_abs_diff(f, target) < 1e-10);
  }

  // zero gates and modulation: f = a'/2
  zero_all(params);
  params[gs.la.weight_index()].value = random_tensor(Algebra::quaternion, {2, 3}, rng);
  params[gs.la.bias_index()].value = random_tensor(Algebra::quaternion, {2}, rng);
  {
    Tape tape(&params);
    const Tensor f = tape.value(gs.forward(tape, tape.constant(a), tape.constant(p)));
    const Tensor a1 = tape.value(gs.la.forward(tape, tape.constant(a)));
    Tensor half = a1;
    for (double& v : half.data()) v *= 0.5;
    CHECK(max_abs_diff(f, half) < 1e-15);
  }

  std::vector<std::string> names;
  for (const auto& prm : params) names.push_back(prm.name);
  CHECK(names == std::vector<std::string>{"gs.L_a.w", "gs.L_a.b", "gs.L_p.w", "gs.L_p.b", "gs.G_aa.w", "gs.G_aa.b",
                                          "gs.G_ap.w", "gs.G_pa.w", "gs.G_pa.b", "gs.G_pp.w", "gs.M_a.w", "gs.M_a.b",
                                          "gs.M_p.w"});
}

TEST_CASE("gated sum output bound") {
  Rng rng(6);
  for (Algebra alg : {Algebra::quaternion, Algebra::real}) {
    for (int trial = 0; trial < 50; ++trial) {
      ParameterSet params;
      const GatedSumBlock gs = GatedSumBlock::create(params, "gs", alg, 4, 3, 2, trial);
      for (std::size_t i = 0; i < params.size(); ++i)
        for (double& v : params[i].value.data()) v = 3.0 * rng.normal();
      const std::size_t k = alg == Algebra::quaternion ? 1 : 4;
      const Tensor a = random_tensor(alg, {4 * k}, rng);
      const Tensor p = random_tensor(alg, {3 * k}, rng);
      Tape tape(&params);
      const Tensor f = tape.value(gs.forward(tape, tape.constant(a), tape.constant(p)));
      const Tensor a1 = tape.value(gs.la.forward(tape, tape.constant(a)));
      for (std::size_t e = 0; e < f.real_dim(); ++e) CHECK(std::abs(f[e]) <= std::abs(a1[e]) + 1.0);
    }
  }
}

TEST_CASE("concat head") {
  CHECK(ops::softmax(std::vector<double>{std::log(3.0), 0.0})[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(ops::softmax(std::vector<double>{std::log(3.0), 0.0})[1] == doctest::Approx(0.25).epsilon(1e-15));

  ParameterSet params;
  const ConcatHead head = ConcatHead::create(params, "head", Algebra::quaternion, 6, 0.35, 2);
  Rng rng(7);
  const Tensor x1 = random_tensor(Algebra::quaternion, {2}, rng);
  const Tensor x2 = random_tensor(Algebra::quaternion, {4}, rng);
  for (Mode mode : {Mode::train, Mode::eval}) {
    Tape tape(&params);
    const Tensor lg = tape.value(head.logits(tape, {tape.constant(x1), tape.constant(x2)}, mode, 9));
    REQUIRE(lg.shape() == Shape{2});
    CHECK_FALSE(lg.is_quaternion());
    const auto pr = ops::softmax(lg.data());
    CHECK(std::abs(pr[0] + pr[1] - 1.0) < 1e-12);
  }
  {
    // eval logits equal the component-sum readout of the dense output
    Tape tape(&params);
    const Tensor lg = tape.value(head.logits(tape, {tape.constant(x1), tape.constant(x2)}, Mode::eval, 0));
    Tensor cat = Tensor::quaternion({6});
    for (std::size_t e = 0; e < 2; ++e) cat.set_q(e, x1.q(e));
    for (std::size_t e = 0; e < 4; ++e) cat.set_q(2 + e, x2.q(e));
    Tensor y = qmatvec(params[0].value, cat);
    for (std::size_t o = 0; o < 2; ++o) {
      const Quaternion q = y.q(o) + params[1].value.q(o);
      CHECK(lg[o] == doctest::Approx(q.r + q.i + q.j + q.k).epsilon(1e-13));
    }
  }
  zero_all(params);
  Tape tape(&params);
  const auto pr = ops::softmax(tape.value(head.logits(tape, {tape.constant(x1), tape.constant(x2)}, Mode::train, 3)).data());
  CHECK(pr[0] == 0.5);
  CHECK(pr[1] == 0.5);
  CHECK_THROWS_AS(head.logits(tape, {}, Mode::eval, 0), ContractError);
}

TEST_CASE("layer and fusion gradients match finite differences") {
  for (Algebra a : {Algebra::quaternion, Algebra::real}) {
    const GradCheckReport rep = layer_grad_checks(a, 17);
    CHECK(rep.blocks.size() > 20);
    for (const auto& b : rep.blocks) {
      INFO(algebra_name(a), " ", b.name);
      CHECK(b.max_rel_err < 1e-4);
    }
  }
}
