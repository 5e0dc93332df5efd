// Serial reference kernels against the OpenMP/Eigen path on the shapes a
// 3 x 256 network sees with a 4096-coordinate batch.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "nfcl/kernels.hpp"
#include "nfcl/runtime.hpp"

namespace {

using nfcl::Tensor;
namespace k = nfcl::kernels;
namespace ref = nfcl::kernels::reference;

Tensor<float> filled(std::size_t rows, std::size_t cols, unsigned seed) {
  Tensor<float> t(std::vector<std::size_t>{rows, cols});
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

// batch x width activations times width x width weights.
template <void (*Gemm)(const Tensor<float>&, const Tensor<float>&, Tensor<float>&)>
void BM_GemmNT(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto w = static_cast<std::size_t>(state.range(1));
  const auto a = filled(n, w, 1), b = filled(w, w, 2);
  Tensor<float> c(std::vector<std::size_t>{n, w});
  for (auto _ : state) {
    Gemm(a, b, c);
    benchmark::DoNotOptimize(c.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * w * w));
}

template <void (*Gemm)(const Tensor<float>&, const Tensor<float>&, Tensor<float>&)>
void BM_GemmTNAcc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto w = static_cast<std::size_t>(state.range(1));
  const auto a = filled(n, w, 3), b = filled(n, w, 4);
  Tensor<float> c(std::vector<std::size_t>{w, w});
  for (auto _ : state) {
    Gemm(a, b, c);
    benchmark::DoNotOptimize(c.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * w * w));
}

template <void (*Sine)(std::span<const float>, float, std::span<float>)>
void BM_Sine(benchmark::State& state) {
  const auto z = filled(static_cast<std::size_t>(state.range(0)), 256, 5);
  Tensor<float> out(z.shape());
  for (auto _ : state) {
    Sine(z.values(), 15.0f, out.values());
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(z.size()));
}

template <void (*Finer)(std::span<const float>, float, std::span<float>)>
void BM_Finer(benchmark::State& state) {
  const auto z = filled(static_cast<std::size_t>(state.range(0)), 256, 6);
  Tensor<float> out(z.shape());
  for (auto _ : state) {
    Finer(z.values(), 5.0f, out.values());
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(z.size()));
}

template <void (*Softmax)(const Tensor<float>&, Tensor<float>&)>
void BM_Softmax(benchmark::State& state) {
  const auto z = filled(static_cast<std::size_t>(state.range(0)), 5, 7);
  Tensor<float> out(z.shape());
  for (auto _ : state) {
    Softmax(z, out);
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(z.size()));
}

void gemm_shapes(benchmark::internal::Benchmark* b) {
  for (int w : {64, 256}) b->Args({4096, w});
}

BENCHMARK(BM_GemmNT<ref::gemm_nt<float>>)->Name("gemm_nt/reference")->Apply(gemm_shapes)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GemmNT<k::gemm_nt<float>>)->Name("gemm_nt/fast")->Apply(gemm_shapes)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GemmTNAcc<ref::gemm_tn_acc<float>>)
    ->Name("gemm_tn_acc/reference")
    ->Apply(gemm_shapes)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GemmTNAcc<k::gemm_tn_acc<float>>)->Name("gemm_tn_acc/fast")->Apply(gemm_shapes)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Sine<ref::sine_forward<float>>)->Name("sine/reference")->Arg(4096)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Sine<k::sine_forward<float>>)->Name("sine/fast")->Arg(4096)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Finer<ref::finer_forward<float>>)->Name("finer/reference")->Arg(4096)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Finer<k::finer_forward<float>>)->Name("finer/fast")->Arg(4096)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Softmax<ref::softmax_rows<float>>)->Name("softmax/reference")->Arg(4096)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Softmax<k::softmax_rows<float>>)->Name("softmax/fast")->Arg(4096)->Unit(benchmark::kMicrosecond);

}  // namespace

int main(int argc, char** argv) {
  nfcl::configure_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
