#include "doctest.h"
#include "quarc/error.hpp"
#include "quarc/layers.hpp"
#include "test_util.hpp"

using namespace quarc;
using testutil::max_abs_diff;
using testutil::random_tensor;

TEST_CASE("scalar counts and real mirror") {
  const LayerSpec d{LayerKind::dense, Algebra::quaternion, 16, 16};
  CHECK(scalar_count(d) == 4 * 16 * 17);
  CHECK(scalar_count(d) == 1088);
  CHECK(scalar_count(real_mirror(d)) == 64 * 65);
  CHECK(scalar_count(real_mirror(d)) == 4160);
  CHECK(real_mirror(real_mirror(d)) == real_mirror(d));

  const LayerSpec c{LayerKind::conv1d, Algebra::quaternion, 26, 128, 1, 5};
  CHECK(scalar_count(c) == 67072);
  CHECK(scalar_count(real_mirror(c)) == 266752);
  CHECK(double(scalar_count(real_mirror(c))) / double(scalar_count(c)) == doctest::Approx(3.977).epsilon(1e-3));

  const LayerSpec c2{LayerKind::conv2d, Algebra::quaternion, 8, 16, 3, 3};
  CHECK(scalar_count(c2) == 4 * 16 * (8 * 9 + 1));

  for (LayerSpec s : {d, c, c2}) {
    s.bias = false;
    CHECK(scalar_count(real_mirror(s)) == 4 * scalar_count(s));
  }

  // count equals what the layer registers
  ParameterSet params;
  Layer::create(params, "c", c, 1);
  Layer::create(params, "d", {LayerKind::dense, Algebra::real, 7, 3}, 1);
  CHECK(params.trainable_scalars() == 67072 + 24);
}

TEST_CASE("split relu") {
  Tape tape;
  Tensor x = Tensor::quaternion({1});
  x.set_q(0, {-1, 2, -3, 4});
  CHECK(tape.value(ops::relu(tape, tape.constant(x))).q(0) == Quaternion{0, 2, 0, 4});
  x.set_q(0, {1, 2, 3, 4});
  CHECK(tape.value(ops::relu(tape, tape.constant(x))) == x);

  Tensor xv = Tensor::real({4});
  xv[0] = -0.5;
  xv[1] = 0.5;
  xv[2] = -2;
  xv[3] = 3;
  Tape t2;
  const NodeId in = t2.variable(xv);
  t2.backward(ops::sum(t2, ops::relu(t2, in)));
  CHECK(t2.grad(in)[0] == 0.0);
  CHECK(t2.grad(in)[1] == 1.0);
  CHECK(t2.grad(in)[2] == 0.0);
  CHECK(t2.grad(in)[3] == 1.0);
}

TEST_CASE("dropout") {
  Rng rng(5);
  const Tensor x = random_tensor(Algebra::quaternion, {50}, rng);
  Tape tape;
  const NodeId n = tape.constant(x);
  CHECK(tape.value(ops::dropout(tape, n, 0.0, Mode::train, 3)) == x);
  CHECK(tape.value(ops::dropout(tape, n, 0.35, Mode::eval, 3)) == x);
  CHECK(tape.value(ops::dropout(tape, n, 0.9, Mode::eval, 4)) == x);
  CHECK_THROWS_AS(ops::dropout(tape, n, 1.0, Mode::train, 3), ConfigError);
  CHECK_THROWS_AS(ops::dropout(tape, n, -0.1, Mode::train, 3), ConfigError);
  CHECK_THROWS_AS(DropoutSite("d", 1.5), ConfigError);

  // whole quaternions kept or dropped, survivors scaled by 1/(1-rate)
  const Tensor y = tape.value(ops::dropout(tape, n, 0.35, Mode::train, 7));
  for (std::size_t e = 0; e < 50; ++e) {
    const Quaternion q = y.q(e);
    const bool dropped = q == Quaternion{0, 0, 0, 0};
    if (!dropped) CHECK(max_abs_diff(q, x.q(e) * (1.0 / 0.65)) < 1e-14);
  }
  // same key, same mask
  CHECK(tape.value(ops::dropout(tape, n, 0.35, Mode::train, 7)) == y);

  // mean preservation over 1e5 draws
  const std::size_t trials = 100000;
  Tensor ones = Tensor::quaternion({trials});
  for (std::size_t e = 0; e < trials; ++e) ones.set_q(e, {1, 2, 3, 4});
  Tape t2;
  const Tensor big = t2.value(ops::dropout(t2, t2.constant(ones), 0.35, Mode::train, 12345));
  for (std::size_t c = 0; c < 4; ++c) {
    double s = 0;
    for (double v : big.channel(c)) s += v;
    const double want = double(c + 1);
    CHECK(std::abs(s / double(trials) - want) / want < 0.02);
  }
}

TEST_CASE("quaternion glorot moments") {
  const std::size_t n = 100000;
  const Tensor w = quaternion_glorot_init(64, 64, {n}, 42);
  double sq = 0;
  for (double v : w.data()) sq += v * v;
  CHECK(std::abs(sq / double(n) - 1.0 / 128.0) / (1.0 / 128.0) < 0.03);
  for (std::size_t c = 0; c < 4; ++c) {
    double m = 0, m2 = 0;
    for (double v : w.channel(c)) {
      m += v;
      m2 += v * v;
    }
    m /= double(n);
    const double sd = std::sqrt(m2 / double(n) - m * m);
    CHECK(std::abs(m) < 4.0 * sd / std::sqrt(double(n)));
  }
  CHECK(quaternion_glorot_init(64, 64, {n}, 42) == w);
  CHECK(quaternion_glorot_init(64, 64, {n}, 43) != w);
  CHECK_THROWS_AS(quaternion_glorot_init(0, 4, {1}, 1), ConfigError);

  const Tensor r = real_glorot_init(30, 50, {n}, 9);
  const double a = std::sqrt(6.0 / 80.0);
  double rs = 0;
  for (double v : r.data()) {
    CHECK(std::abs(v) <= a);
    rs += v * v;
  }
  CHECK(std::abs(rs / double(n) - a * a / 3.0) / (a * a / 3.0) < 0.03);
}

TEST_CASE("norm max pooling") {
  Tape tape;
  Tensor x = Tensor::quaternion({3, 1});
  x.set_q(0, {1, 0, 0, 0});
  x.set_q(1, {0, 3, 4, 0});
  x.set_q(2, {0, 0, 0, 2});
  CHECK(tape.value(ops::global_max_pool(tape, tape.constant(x))).q(0) == Quaternion{0, 3, 4, 0});

  Tensor ties = Tensor::quaternion({4, 1});
  ties.set_q(0, {0, 1, 0, 0});
  ties.set_q(1, {0.5, 0, 0, 0});
  ties.set_q(2, {0, 0, 0.5, 0});
  ties.set_q(3, {0, 0, 0, -1});
  CHECK(tape.value(ops::global_max_pool(tape, tape.constant(ties))).q(0) == Quaternion{0, 1, 0, 0});

  Rng rng(2);
  const Tensor single = random_tensor(Algebra::quaternion, {1, 6}, rng);
  Tensor flat = single;
  flat.reshape({6});
  CHECK(tape.value(ops::global_max_pool(tape, tape.constant(single))) == flat);
  CHECK_THROWS_AS(ops::global_max_pool(tape, tape.constant(Tensor::quaternion({0, 3}))), ContractError);

  // 2-D windows pick the largest-norm quaternion per window, first on ties
  Tensor img = Tensor::quaternion({2, 4, 1});
  img.set_q(0, {1, 1, 0, 0});
  img.set_q(1, {0, 0, 1, 1});
  img.set_q(4, {-1, 0, 0, 1});
  img.set_q(5, {0.1, 0, 0, 0});
  img.set_q(2, {0, 0, 0, 0.1});
  img.set_q(7, {0, 0, 0, 9});
  const Tensor p = tape.value(ops::max_pool2d(tape, tape.constant(img), 2));
  REQUIRE(p.shape() == Shape{1, 2, 1});
  CHECK(p.q(0) == Quaternion{1, 1, 0, 0});
  CHECK(p.q(1) == Quaternion{0, 0, 0, 9});

  // real pooling is the per-element maximum
  Tensor rx = Tensor::real({3, 2});
  for (std::size_t e = 0; e < 6; ++e) rx[e] = double((e * 5) % 7);
  const Tensor rp = tape.value(ops::global_max_pool(tape, tape.constant(rx)));
  CHECK(rp[0] == 6.0);
  CHECK(rp[1] == 5.0);
}

TEST_CASE("batch norm") {
  ParameterSet params;
  BatchNormLayer bn = BatchNormLayer::create(params, "bn", Algebra::quaternion, 3);
  Rng rng(8);
  std::vector<Tensor> batch;
  for (int b = 0; b < 16; ++b) {
    Tensor x = random_tensor(Algebra::quaternion, {3}, rng);
    for (double& v : x.data()) v = 2.5 * v + 1.0;
    batch.push_back(x);
  }
  Tape tape(&params);
  std::vector<NodeId> xs;
  for (auto& x : batch) xs.push_back(tape.constant(x));
  const auto ys = bn.forward(tape, xs, Mode::train);
  for (std::size_t f = 0; f < 3; ++f) {
    double nsq = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      double m = 0;
      for (auto y : ys) m += tape.value(y).channel(c)[f];
      CHECK(std::abs(m / 16.0) < 1e-10);
    }
    for (auto y : ys) nsq += tape.value(y).q(f).norm_sq();
    CHECK(nsq / 16.0 == doctest::Approx(4.0).epsilon(1e-3));
    CHECK(bn.running().variance[f] > 0.0);
  }

  // identical samples: all zeros, guarded by eps
  Tape t2(&params);
  ParameterSet p2;
  BatchNormLayer bn2 = BatchNormLayer::create(p2, "bn", Algebra::quaternion, 3);
  Tape t3(&p2);
  const NodeId same = t3.constant(batch[0]);
  for (auto y : bn2.forward(t3, {same, same, same}, Mode::train))
    for (double v : t3.value(y).data()) CHECK(std::abs(v) < 1e-12);
  CHECK_THROWS_AS(bn2.forward(t3, {same}, Mode::train), ContractError);

  // eval with fresh running stats (mean 0, variance 1) is the identity up to eps
  ParameterSet p3;
  BatchNormLayer bn3 = BatchNormLayer::create(p3, "bn", Algebra::quaternion, 3, 0.1, 0.0);
  Tape t4(&p3);
  const auto out = bn3.forward(t4, {t4.constant(batch[1])}, Mode::eval);
  CHECK(max_abs_diff(t4.value(out[0]), batch[1]) < 1e-15);
}

TEST_CASE("elementwise layer") {
  ParameterSet params;
  const Layer l = Layer::create(params, "e", {LayerKind::elementwise, Algebra::quaternion, 2, 2}, 3);
  params[l.weight_index()].value.set_q(0, {0, 1, 0, 0});
  params[l.weight_index()].value.set_q(1, {2, 0, 0, 0});
  params[l.bias_index()].value.set_q(1, {0, 0, 0, 1});
  Tensor x = Tensor::quaternion({2});
  x.set_q(0, {0, 0, 1, 0});
  x.set_q(1, {1, 1, 1, 1});
  Tape tape(&params);
  const Tensor y = tape.value(l.forward(tape, tape.constant(x)));
  CHECK(y.q(0) == Quaternion{0, 0, 0, 1});
  CHECK(y.q(1) == Quaternion{2, 2, 2, 3});
  CHECK_THROWS_AS(Layer::create(params, "bad", {LayerKind::elementwise, Algebra::quaternion, 2, 3}, 1), ConfigError);
  CHECK_THROWS_AS(Layer::create(params, "e", {LayerKind::dense, Algebra::quaternion, 2, 3}, 1), ContractError);
}
