// Serial reference vs OpenMP kernels. Thread count follows FAKEIDET_THREADS
// or OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <vector>

#include "fakeidet/kernels.hpp"
#include "fakeidet/patch.hpp"
#include "fakeidet/rng.hpp"

namespace k = fakeidet::kernels;

namespace {

fakeidet::RgbImage noisy(int w, int h) {
  fakeidet::Rng rng(1);
  fakeidet::RgbImage img(w, h);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(rng.below(4) == 0 ? 0 : 1 + rng.below(255));
  return img;
}

struct Features {
  std::vector<float> x;
  std::vector<std::uint8_t> y;
  std::vector<double> w;
  std::size_t dim;
};

Features features(std::size_t rows, std::size_t dim) {
  fakeidet::Rng rng(2);
  Features f{std::vector<float>(rows * dim), std::vector<std::uint8_t>(rows), std::vector<double>(dim), dim};
  for (auto& v : f.x) v = static_cast<float>(rng.normal());
  for (auto& v : f.y) v = static_cast<std::uint8_t>(rng.below(2));
  for (auto& v : f.w) v = 0.01 * rng.normal();
  return f;
}

template <auto Fn>
void BM_BlackFractions(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto img = noisy(side, side);
  const auto grid = fakeidet::extract_grid(side, side, 64);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(img, grid, 64));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(grid.size()));
}

template <auto Fn>
void BM_LossGrad(benchmark::State& state) {
  const auto f = features(static_cast<std::size_t>(state.range(0)), 768);
  for (auto _ : state) benchmark::DoNotOptimize(Fn({f.x, f.dim}, f.y, {}, f.w, 0.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_Logits(benchmark::State& state) {
  const auto f = features(static_cast<std::size_t>(state.range(0)), 768);
  std::vector<double> out(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    Fn({f.x, f.dim}, f.w, 0.0, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_ErrorRates(benchmark::State& state) {
  fakeidet::Rng rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> a(n), b(n), t(n), pa(n), pb(n);
  for (auto& v : a) v = rng.uniform01();
  for (auto& v : b) v = rng.uniform01();
  for (auto& v : t) v = rng.uniform01();
  for (auto _ : state) {
    Fn(a, b, t, pa, pb);
    benchmark::DoNotOptimize(pa.data());
  }
}

}  // namespace

BENCHMARK(BM_BlackFractions<k::serial::black_fractions>)->Name("black_fractions/serial")->Arg(1024)->Arg(4096);
BENCHMARK(BM_BlackFractions<k::parallel::black_fractions>)->Name("black_fractions/parallel")->Arg(1024)->Arg(4096);
BENCHMARK(BM_LossGrad<k::serial::bce_loss_grad>)->Name("bce_loss_grad/serial")->Arg(256)->Arg(8192);
BENCHMARK(BM_LossGrad<k::parallel::bce_loss_grad>)->Name("bce_loss_grad/parallel")->Arg(256)->Arg(8192);
BENCHMARK(BM_Logits<k::serial::logits>)->Name("logits/serial")->Arg(8192);
BENCHMARK(BM_Logits<k::parallel::logits>)->Name("logits/parallel")->Arg(8192);
BENCHMARK(BM_ErrorRates<k::serial::error_rates>)->Name("error_rates/serial")->Arg(2000);
BENCHMARK(BM_ErrorRates<k::parallel::error_rates>)->Name("error_rates/parallel")->Arg(2000);

int main(int argc, char** argv) {
  k::configure_threads_from_env();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
