#include <benchmark/benchmark.h>

#include "spde/bilinear.hpp"

namespace {

void BM_BilinearFast(benchmark::State& state) {
  const auto space = spde::build_space(static_cast<int>(state.range(0)));
  spde::BilinearWorkspace ws(space);
  const spde::SpectralField x = spde::random_field(space, 1);
  const spde::SpectralField y = spde::random_field(space, 2);
  spde::SpectralField out(space);
  for (auto _ : state) {
    spde::bilinear_into(x, y, ws, out);
    benchmark::DoNotOptimize(out.raw().data());
  }
  state.counters["interactions"] = static_cast<double>(ws.interaction_count());
}

void BM_BilinearDirect(benchmark::State& state) {
  const auto space = spde::build_space(static_cast<int>(state.range(0)));
  const spde::SpectralField x = spde::random_field(space, 1);
  const spde::SpectralField y = spde::random_field(space, 2);
  for (auto _ : state) {
    auto out = spde::bilinear_direct(x, y);
    benchmark::DoNotOptimize(out.raw().data());
  }
}

void BM_FirstVariationDrift(benchmark::State& state) {
  const auto space = spde::build_space(static_cast<int>(state.range(0)));
  spde::BilinearWorkspace ws(space);
  const spde::SpectralField x = spde::random_field(space, 1);
  const spde::SpectralField eta = spde::random_field(space, 2);
  spde::SpectralField out(space);
  for (auto _ : state) {
    spde::bilinear_first_variation_into(x, eta, ws, out);
    benchmark::DoNotOptimize(out.raw().data());
  }
}

}  // namespace

BENCHMARK(BM_BilinearFast)->Arg(1)->Arg(2)->Arg(3);
BENCHMARK(BM_BilinearDirect)->Arg(1)->Arg(2)->Arg(3);
BENCHMARK(BM_FirstVariationDrift)->Arg(1)->Arg(2);
