#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "quarc/checkpoint.hpp"
#include "quarc/error.hpp"
#include "quarc/gradcheck.hpp"
#include "quarc/metrics.hpp"
#include "quarc/train.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace quarc;
using oracle::brute_ap;
using oracle::brute_auc;

namespace {

ModelConfig small_config(int variant, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.embed_dim = 8;
  cfg.max_len = 16;
  cfg.conv_filters = 6;
  cfg.common_dim = 3;
  cfg.image_filters1 = 2;
  cfg.image_filters2 = 4;
  cfg.seed = seed;
  cfg.epochs = 2;
  cfg.batch = 16;
  cfg.lr = 1e-2;
  return cfg;
}

Dataset small_dataset(SynthTask task, std::size_t n) {
  Dataset ds;
  ds.samples = synth_samples(task, n, 4);
  ds.embeddings = EmbeddingTable(8, 2);
  return ds;
}

}  // namespace

TEST_CASE("softmax cross-entropy values") {
  CHECK(softmax_bce_loss(std::vector<double>{0.5, 0.5}, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(softmax_bce_loss(std::vector<double>{0.5, 0.5}, 1) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(softmax_bce_loss(std::vector<double>{1 - 1e-12, 1e-12}, 0) < 1e-11);
  CHECK(softmax_bce_loss(std::vector<double>{0.75, 0.25}, 1) == doctest::Approx(1.386294).epsilon(1e-6));
  CHECK(softmax_bce_loss(std::vector<double>{1.0, 0.0}, 1) == doctest::Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(softmax_bce_loss(std::vector<double>{0.5, 0.5}, 2), DataError);
}

TEST_CASE("softmax cross-entropy gradient is prob minus onehot") {
  ParameterSet params;
  Tensor z = Tensor::real({2});
  z[0] = 0.3;
  z[1] = -1.1;
  params.add("z", z);
  for (int label : {0, 1}) {
    Tape tape(&params);
    const Gradients g = tape.backward(ops::softmax_cross_entropy(tape, tape.param("z"), label));
    const auto p = ops::softmax(z.data());
    CHECK(g[0][0] == doctest::Approx(p[0] - (label == 0)).epsilon(1e-14));
    CHECK(g[0][1] == doctest::Approx(p[1] - (label == 1)).epsilon(1e-14));
    const auto rep = finite_diff_check(params, [&](Tape& t) { return ops::softmax_cross_entropy(t, t.param("z"), label); });
    CHECK(rep.max_rel_err() < 1e-6);
  }
}

TEST_CASE("adam") {
  ParameterSet params;
  Tensor w = Tensor::quaternion({3});
  for (std::size_t e = 0; e < 12; ++e) w[e] = double(e) - 5.0;
  params.add("w", w);
  {
    Adam opt(params, 1e-3);
    Gradients g(params);
    for (std::size_t e = 0; e < 12; ++e) g[0][e] = e % 2 ? 0.5 : -2.0;
    ParameterSet p = params;
    opt.step(p, g);
    CHECK(opt.steps() == 1);
    for (std::size_t e = 0; e < 12; ++e) {
      const double step = p[0].value[e] - w[e];
      CHECK(std::abs(std::abs(step) - 1e-3) < 1e-9);
      CHECK((step > 0) == (g[0][e] < 0));
    }
  }
  {
    Adam opt(params, 1e-3);
    ParameterSet p = params;
    const Gradients zero(params);
    for (int s = 0; s < 25; ++s) opt.step(p, zero);
    CHECK(p[0].value == w);
  }
  {
    ParameterSet q;
    Tensor theta = Tensor::real({1});
    theta[0] = 1.0;
    q.add("theta", theta);
    Adam opt(q, 0.1);
    double prev = 1.0;
    for (int s = 0; s < 10; ++s) {
      Gradients g(q);
      g[0][0] = 2.0 * q[0].value[0];
      opt.step(q, g);
      CHECK(q[0].value[0] < prev);
      prev = q[0].value[0];
    }
  }
  {
    Adam opt(params, 1e-3);
    ParameterSet p = params;
    Gradients g(params);
    g[0][4] = NAN;
    try {
      opt.step(p, g);
      FAIL("expected a numeric error");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("'w'") != std::string::npos);
    }
    CHECK(p[0].value == w);
    g[0][4] = INFINITY;
    CHECK_THROWS_AS(opt.step(p, g), NumericError);
  }
}

TEST_CASE("ranking metric examples") {
  using V = std::vector<double>;
  using L = std::vector<int>;
  CHECK(roc_auc(V{0.9, 0.8, 0.3}, L{1, 1, 0}) == 1.0);
  CHECK(roc_auc(V{0.9, 0.8, 0.3}, L{1, 0, 1}) == 0.5);
  CHECK(roc_auc(V{0.4, 0.4, 0.4, 0.4}, L{1, 0, 1, 0}) == 0.5);
  CHECK_THROWS_AS(roc_auc(V{0.1, 0.2}, L{1, 1}), MetricError);
  CHECK_THROWS_AS(roc_auc(V{0.1, 0.2}, L{1, 2}), MetricError);

  CHECK(average_precision(V{0.9, 0.8, 0.3}, L{1, 1, 0}) == 1.0);
  CHECK(average_precision(V{0.9, 0.8, 0.3}, L{0, 1, 1}) == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
  CHECK(average_precision(V{0.5}, L{1}) == 1.0);
  CHECK_THROWS_AS(average_precision(V{0.5, 0.1}, L{0, 0}), MetricError);
}

TEST_CASE("ranking metrics match brute force") {
  Rng rng(77);
  double worst_auc = 0, worst_ap = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<double> s(n);
    std::vector<int> y(n);
    // half the instances draw from a handful of values to force ties
    const bool ties = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = ties ? double(rng.below(4)) / 4.0 : rng.uniform();
      y[i] = rng.uniform() < 0.4 ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    worst_auc = std::max(worst_auc, std::abs(roc_auc(s, y) - brute_auc(s, y)));
    worst_ap = std::max(worst_ap, std::abs(average_precision(s, y) - brute_ap(s, y)));

    // strictly monotone transform leaves the AUC unchanged
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
    CHECK(roc_auc(t, y) == roc_auc(s, y));
  }
  CHECK(worst_auc < 1e-12);
  CHECK(worst_ap < 1e-12);
}

TEST_CASE("initial loss is close to ln 2") {
  Dataset ds;
  ds.samples = synth_samples(SynthTask::separable, 20, 9);
  ds.embeddings = EmbeddingTable(100, 3);
  double total = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ModelConfig cfg;
    cfg.variant = 6;
    cfg.seed = seed;
    cfg.max_len = 32;
    const Model m = Model::build(cfg);
    std::vector<std::size_t> all(ds.samples.size());
    std::iota(all.begin(), all.end(), 0);
    total += evaluate(m, encode_samples(ds, all, cfg)).loss;
  }
  CHECK(std::abs(total / 10.0 - std::log(2.0)) < 0.1);
}

TEST_CASE("training with lr 0 leaves parameters untouched") {
  const Dataset ds = small_dataset(SynthTask::xor_task, 80);
  ModelConfig cfg = small_config(1, 3);
  cfg.lr = 0.0;
  Model m = Model::build(cfg);
  const ParameterSet before = m.params();
  const TrainReport rep = train_loop(m, ds);
  CHECK(rep.epochs.size() == 2);
  for (std::size_t p = 0; p < before.size(); ++p) CHECK(m.params()[p].value == before[p].value);
}

TEST_CASE("training is deterministic and thread-count independent") {
  const Dataset ds = small_dataset(SynthTask::separable, 120);
  const ModelConfig cfg = small_config(6, 8);
  auto run = [&](int threads) {
    Model m = Model::build(cfg);
    TrainOptions o;
    o.threads = threads;
    const TrainReport r = train_loop(m, ds, o);
    return std::make_pair(r.loss_curve(), encode_checkpoint(m.params()));
  };
  const auto a = run(1), b = run(1), c = run(3);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first == c.first);
  CHECK(a.second == c.second);
}

TEST_CASE("smoothed training loss does not increase") {
  const Dataset ds = small_dataset(SynthTask::separable, 300);
  ModelConfig cfg = small_config(6, 2);
  cfg.epochs = 20;
  cfg.lr = 3e-3;
  Model m = Model::build(cfg);
  const TrainReport rep = train_loop(m, ds);
  const auto curve = rep.loss_curve();
  REQUIRE(curve.size() == 20);
  std::vector<double> smooth;
  for (std::size_t e = 4; e < curve.size(); ++e)
    smooth.push_back((curve[e] + curve[e - 1] + curve[e - 2] + curve[e - 3] + curve[e - 4]) / 5.0);
  for (std::size_t i = 1; i < smooth.size(); ++i) CHECK(smooth[i] <= smooth[i - 1]);
  CHECK(rep.test.roc_auc.has_value());
  const std::string js = rep.to_json();
  CHECK(js.find("\"epochs\"") != std::string::npos);
}

TEST_CASE("training needs every split") {
  Dataset ds = small_dataset(SynthTask::separable, 80);
  ds.samples.erase(std::remove_if(ds.samples.begin(), ds.samples.end(),
                                  [](const Sample& s) { return split_of(s.id) == Split::val; }),
                   ds.samples.end());
  Model m = Model::build(small_config(6, 1));
  CHECK_THROWS_AS(train_loop(m, ds), DataError);
}
