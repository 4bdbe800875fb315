// Serial reference kernels against the OpenMP ones, on the layer shapes of
// the default configuration. Run with OMP_NUM_THREADS to vary the pool.

#include <benchmark/benchmark.h>

#include "quarc/kernels.hpp"
#include "quarc/rng.hpp"

using namespace quarc;
namespace k = quarc::kernels;

namespace {

Tensor filled(Algebra a, Shape s, std::uint64_t seed) {
  Tensor t(a, std::move(s));
  Rng rng(seed);
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

// Quaternion widths; the real mirror uses four times as many units.
std::size_t units(Algebra a, std::size_t q) { return a == Algebra::quaternion ? q : 4 * q; }

Algebra algebra_of(const benchmark::State& st) { return st.range(0) ? Algebra::real : Algebra::quaternion; }

struct DenseCase {
  Tensor w, b, x, y, gy;
  explicit DenseCase(Algebra a)
      : w(filled(a, {units(a, 128), units(a, 128)}, 1)),
        b(filled(a, {units(a, 128)}, 2)),
        x(filled(a, {units(a, 128)}, 3)),
        y(a, {units(a, 128)}),
        gy(filled(a, {units(a, 128)}, 4)) {}
};

// text convolution: 150 tokens of 26 quaternions, 40 of them non-zero
struct Conv1dCase {
  Tensor k, b, x, y, gy;
  std::size_t active = 40;
  explicit Conv1dCase(Algebra a)
      : k(filled(a, {5, units(a, 26), units(a, 32)}, 1)),
        b(filled(a, {units(a, 32)}, 2)),
        x(a, {150, units(a, 26)}),
        y(a, {150, units(a, 32)}),
        gy(filled(a, {150, units(a, 32)}, 4)) {
    const Tensor head = filled(a, {active, units(a, 26)}, 3);
    std::copy(head.data().begin(), head.data().end(), x.data().begin());
  }
};

struct Conv2dCase {
  Tensor k, b, x, y, gy;
  explicit Conv2dCase(Algebra a)
      : k(filled(a, {3, 3, units(a, 1), units(a, 8)}, 1)),
        b(filled(a, {units(a, 8)}, 2)),
        x(filled(a, {32, 32, units(a, 1)}, 3)),
        y(a, {30, 30, units(a, 8)}),
        gy(filled(a, {30, 30, units(a, 8)}, 4)) {}
};

void BM_dense_serial(benchmark::State& st) {
  DenseCase c(algebra_of(st));
  for (auto _ : st) {
    k::serial::dense_forward(c.w, &c.b, c.x, c.y);
    benchmark::DoNotOptimize(c.y.data().data());
  }
}

void BM_dense_omp(benchmark::State& st) {
  DenseCase c(algebra_of(st));
  for (auto _ : st) {
    k::omp::dense_forward(c.w, &c.b, c.x, c.y);
    benchmark::DoNotOptimize(c.y.data().data());
  }
}

void BM_conv1d_serial(benchmark::State& st) {
  Conv1dCase c(algebra_of(st));
  for (auto _ : st) {
    k::serial::conv1d_forward(c.k, &c.b, c.x, c.y);
    benchmark::DoNotOptimize(c.y.data().data());
  }
}

void BM_conv1d_omp(benchmark::State& st) {
  Conv1dCase c(algebra_of(st));
  for (auto _ : st) {
    k::omp::conv1d_forward(c.k, &c.b, c.x, c.y, c.x.extent(0));
    benchmark::DoNotOptimize(c.y.data().data());
  }
}

void BM_conv1d_omp_active_rows(benchmark::State& st) {
  Conv1dCase c(algebra_of(st));
  for (auto _ : st) {
    k::omp::conv1d_forward(c.k, &c.b, c.x, c.y, k::leading_nonzero_rows(c.x));
    benchmark::DoNotOptimize(c.y.data().data());
  }
}

void BM_conv1d_backward_serial(benchmark::State& st) {
  Conv1dCase c(algebra_of(st));
  Tensor gk(c.k.algebra(), c.k.shape()), gb(c.b.algebra(), c.b.shape()), gx(c.x.algebra(), c.x.shape());
  for (auto _ : st) k::serial::conv1d_backward(c.k, c.x, c.gy, {&gk, &gb, &gx});
  benchmark::DoNotOptimize(gk.data().data());
}

void BM_conv1d_backward_omp(benchmark::State& st) {
  Conv1dCase c(algebra_of(st));
  Tensor gk(c.k.algebra(), c.k.shape()), gb(c.b.algebra(), c.b.shape()), gx(c.x.algebra(), c.x.shape());
  for (auto _ : st) k::omp::conv1d_backward(c.k, c.x, c.gy, {&gk, &gb, &gx}, c.x.extent(0));
  benchmark::DoNotOptimize(gk.data().data());
}

void BM_conv2d_serial(benchmark::State& st) {
  Conv2dCase c(algebra_of(st));
  for (auto _ : st) {
    k::serial::conv2d_forward(c.k, &c.b, c.x, c.y);
    benchmark::DoNotOptimize(c.y.data().data());
  }
}

void BM_conv2d_omp(benchmark::State& st) {
  Conv2dCase c(algebra_of(st));
  for (auto _ : st) {
    k::omp::conv2d_forward(c.k, &c.b, c.x, c.y);
    benchmark::DoNotOptimize(c.y.data().data());
  }
}

}  // namespace

// argument: 0 quaternion, 1 real mirror
BENCHMARK(BM_dense_serial)->Arg(0)->Arg(1);
BENCHMARK(BM_dense_omp)->Arg(0)->Arg(1);
BENCHMARK(BM_conv1d_serial)->Arg(0)->Arg(1);
BENCHMARK(BM_conv1d_omp)->Arg(0)->Arg(1);
BENCHMARK(BM_conv1d_omp_active_rows)->Arg(0)->Arg(1);
BENCHMARK(BM_conv1d_backward_serial)->Arg(0)->Arg(1);
BENCHMARK(BM_conv1d_backward_omp)->Arg(0)->Arg(1);
BENCHMARK(BM_conv2d_serial)->Arg(0)->Arg(1);
BENCHMARK(BM_conv2d_omp)->Arg(0)->Arg(1);

BENCHMARK_MAIN();
