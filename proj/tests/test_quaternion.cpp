#include "doctest.h"
#include "quarc/error.hpp"
#include "test_util.hpp"

using namespace quarc;
using testutil::max_abs_diff;
using testutil::random_q;

TEST_CASE("hamilton fixed values") {
  // hand expansion of the 16 terms
  CHECK(hamilton({1, 2, 3, 4}, {5, 6, 7, 8}) == Quaternion{-60, 12, 30, 24});
  CHECK(hamilton({1, 0, 0, 0}, {3, -1, 2, 7}) == Quaternion{3, -1, 2, 7});
  CHECK(hamilton({0, 1, 0, 0}, {0, 0, 1, 0}) == Quaternion{0, 0, 0, 1});
  CHECK(hamilton({0, 0, 1, 0}, {0, 1, 0, 0}) == Quaternion{0, 0, 0, -1});
  CHECK(hamilton({0, 0, 1, 0}, {0, 0, 0, 1}) == Quaternion{0, 1, 0, 0});
  CHECK(hamilton({0, 0, 0, 1}, {0, 1, 0, 0}) == Quaternion{0, 0, 1, 0});
  CHECK(hamilton({0, 1, 0, 0}, {0, 1, 0, 0}) == Quaternion{-1, 0, 0, 0});
}

TEST_CASE("conjugate and norm") {
  CHECK(conjugate({1, 2, 3, 4}) == Quaternion{1, -2, -3, -4});
  CHECK(conjugate({5, 0, 0, 0}) == Quaternion{5, 0, 0, 0});
  CHECK(conjugate(hamilton({1, 2, 3, 4}, {5, 6, 7, 8})) == Quaternion{-60, -12, -30, -24});
  CHECK(norm(Quaternion{0, 0, 0, 0}) == 0.0);
  CHECK(norm(Quaternion{1, 2, 3, 4}) == doctest::Approx(std::sqrt(30.0)));
  // 60²+12²+30²+24² = 5220 = 30·174
  CHECK(Quaternion{-60, 12, 30, 24}.norm_sq() == 5220.0);
}

TEST_CASE("algebra properties over random pairs") {
  Rng rng(11);
  double mult = 0, assoc = 0, conj = 0, invol = 0;
  for (int t = 0; t < 2000; ++t) {
    const Quaternion a = random_q(rng), b = random_q(rng), c = random_q(rng);
    mult = std::max(mult, std::abs(norm(hamilton(a, b)) - norm(a) * norm(b)));
    assoc = std::max(assoc, max_abs_diff(hamilton(hamilton(a, b), c), hamilton(a, hamilton(b, c))));
    conj = std::max(conj, max_abs_diff(hamilton(a, conjugate(a)), {a.norm_sq(), 0, 0, 0}));
    invol = std::max(invol, max_abs_diff(conjugate(conjugate(a)), a));
  }
  CHECK(mult < 1e-12);
  CHECK(assoc < 1e-12);
  CHECK(conj < 1e-12);
  CHECK(invol == 0.0);
}

TEST_CASE("left and right matrices reproduce the product") {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const Quaternion w = random_q(rng), x = random_q(rng);
    const Quaternion want = hamilton(w, x);
    const Mat4 L = left_matrix(w), R = right_matrix(x);
    const double xv[4] = {x.r, x.i, x.j, x.k}, wv[4] = {w.r, w.i, w.j, w.k};
    double lv[4] = {}, rv[4] = {};
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        lv[r] += L[r][c] * xv[c];
        rv[r] += R[r][c] * wv[c];
      }
    CHECK(max_abs_diff({lv[0], lv[1], lv[2], lv[3]}, want) < 1e-12);
    CHECK(max_abs_diff({rv[0], rv[1], rv[2], rv[3]}, want) < 1e-12);
  }
}

TEST_CASE("pack and unpack") {
  const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8};
  const Tensor q = pack_reals(v);
  REQUIRE(q.shape() == Shape{2});
  CHECK(q.q(0) == Quaternion{1, 2, 3, 4});
  CHECK(q.q(1) == Quaternion{5, 6, 7, 8});
  CHECK(q.real_dim() == 8);

  Rng rng(5);
  std::vector<double> r(104);
  for (auto& x : r) x = rng.normal();
  CHECK(unpack_reals(pack_reals(r)) == r);

  CHECK(pack_reals(std::vector<double>{}).shape() == Shape{0});
  CHECK_THROWS_AS(pack_reals(std::vector<double>(6, 1.0)), PackingError);
}

TEST_CASE("qtensor channels") {
  Tensor t = Tensor::quaternion({3, 5});
  CHECK(t.real_dim() == 4 * 15);
  for (std::size_t c = 0; c < 4; ++c) CHECK(t.channel(c).size() == 15);
  t.set_q(7, {1, 2, 3, 4});
  CHECK(t.channel(2)[7] == 3.0);
  CHECK_THROWS_AS(t.reshape({4, 4}), DimensionError);
}

TEST_CASE("rgb to quaternion") {
  std::vector<double> black(2 * 2 * 3, 0.0);
  const Tensor z = rgb_to_quaternion(black, 2, 2);
  CHECK(z.shape() == Shape{2, 2, 1});
  for (double v : z.data()) CHECK(v == 0.0);

  std::vector<double> red{1, 0, 0};
  CHECK(rgb_to_quaternion(red, 1, 1).q(0) == Quaternion{0, 1, 0, 0});

  Rng rng(9);
  std::vector<double> img(4 * 4 * 3);
  for (auto& v : img) v = rng.uniform();
  const Tensor q = rgb_to_quaternion(img, 4, 4);
  for (std::size_t p = 0; p < 16; ++p) {
    const double want = std::sqrt(img[3 * p] * img[3 * p] + img[3 * p + 1] * img[3 * p + 1] + img[3 * p + 2] * img[3 * p + 2]);
    CHECK(norm(q.q(p)) == doctest::Approx(want).epsilon(1e-14));
  }
  CHECK_THROWS_AS(rgb_to_quaternion(std::vector<double>(16, 0.0), 2, 2, 4), IngestionError);
}

TEST_CASE("qmatvec") {
  Tensor w = Tensor::quaternion({1, 1});
  w.set_q(0, {1, 2, 3, 4});
  Tensor x = Tensor::quaternion({1});
  x.set_q(0, {5, 6, 7, 8});
  CHECK(qmatvec(w, x).q(0) == Quaternion{-60, 12, 30, 24});

  Rng rng(1);
  Tensor id = Tensor::quaternion({3, 3});
  for (std::size_t d = 0; d < 3; ++d) id.set_q(d * 3 + d, {1, 0, 0, 0});
  const Tensor v = testutil::random_tensor(Algebra::quaternion, {3}, rng);
  CHECK(qmatvec(id, v) == v);
  CHECK(qmatvec(Tensor::quaternion({2, 3}), v) == Tensor::quaternion({2}));
  CHECK_THROWS_AS(qmatvec(Tensor::quaternion({2, 4}), v), DimensionError);
}
