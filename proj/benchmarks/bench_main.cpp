#include <benchmark/benchmark.h>

#include "permseq/assign.hpp"
#include "permseq/diffcore.hpp"
#include "permseq/random.hpp"
#include "permseq/sinkhorn.hpp"
#include "permseq/soma.hpp"

namespace {

using namespace permseq;

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = uniform_in(rng, -3.0, 3.0);
  return t;
}

void BM_SinkhornOperator(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({n, n}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(sinkhorn_operator(x, 1.0, 20));
}
BENCHMARK(BM_SinkhornOperator)->Arg(6)->Arg(26)->Arg(52)->Arg(98);

void BM_SinkhornBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({32, n, n}, 2);
  for (auto _ : state) {
    Graph g;
    Var logits = g.parameter(x);
    g.backward(g.sum(g.square(sinkhorn(g, logits, 1.0, 20))));
    benchmark::DoNotOptimize(g.grad(logits));
  }
}
BENCHMARK(BM_SinkhornBackward)->Arg(6)->Arg(26)->Arg(52);

void BM_Hungarian(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const CostMatrix c(random_tensor({n, n}, 3));
  for (auto _ : state) benchmark::DoNotOptimize(hungarian(c));
}
BENCHMARK(BM_Hungarian)->Arg(6)->Arg(26)->Arg(52)->Arg(98)->Arg(256);

void BM_MatMul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({32, n}, 4);
  const Tensor b = random_tensor({n, n}, 5);
  for (auto _ : state) {
    Graph g;
    Var y = g.matmul(g.parameter(a), g.parameter(b));
    g.backward(g.sum(y));
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_MatMul)->Arg(64)->Arg(128)->Arg(256);

void BM_SomaSolve(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(soma::solve_cube_raw());
}
BENCHMARK(BM_SomaSolve)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
