// OpenMP kernels against the serial reference on layer shapes used in training.
#include <benchmark/benchmark.h>

#include "hed/kernels.hpp"
#include "hed/rng.hpp"

using namespace hed;

namespace {

struct Layer {
  std::vector<double> w, b;
  Matrix x, y, dy, dx;
  std::vector<double> dw, db;

  Layer(std::size_t in, std::size_t out, std::size_t batch)
      : w(in * out), b(out), x(in, batch), y(out, batch), dy(out, batch), dx(in, batch), dw(in * out), db(out) {
    Rng rng(1);
    for (double& v : w) v = uniform(rng, -0.1, 0.1);
    for (double& v : b) v = uniform(rng, -0.1, 0.1);
    for (double& v : x.data) v = normal(rng, 1.0);
    for (double& v : dy.data) v = normal(rng, 1.0);
  }
};

void args(benchmark::internal::Benchmark* b) {
  b->Args({4, 64, 100})->Args({64, 64, 100})->Args({64, 64, 1000})->Args({256, 256, 100});
}

template <bool Parallel>
void forward(benchmark::State& state) {
  Layer l(state.range(0), state.range(1), state.range(2));
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::affine_forward(l.w, l.b, l.x, l.y);
    else
      kernels::reference::affine_forward(l.w, l.b, l.x, l.y);
    benchmark::DoNotOptimize(l.y.data.data());
  }
}

template <bool Parallel>
void backward(benchmark::State& state) {
  Layer l(state.range(0), state.range(1), state.range(2));
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::affine_backward_input(l.w, l.dy, l.dx);
      kernels::affine_backward_params(l.dy, l.x, l.dw, l.db);
    } else {
      kernels::reference::affine_backward_input(l.w, l.dy, l.dx);
      kernels::reference::affine_backward_params(l.dy, l.x, l.dw, l.db);
    }
    benchmark::DoNotOptimize(l.dw.data());
  }
}

}  // namespace

BENCHMARK(forward<false>)->Name("forward/reference")->Apply(args);
BENCHMARK(forward<true>)->Name("forward/openmp")->Apply(args);
BENCHMARK(backward<false>)->Name("backward/reference")->Apply(args);
BENCHMARK(backward<true>)->Name("backward/openmp")->Apply(args);

BENCHMARK_MAIN();
