#include <benchmark/benchmark.h>

#include "spde/noise.hpp"

namespace {

struct Setup {
  spde::SpacePtr space;
  std::unique_ptr<spde::NoiseOperator> op;
  std::vector<double> x, w, out;

  Setup(int cutoff, spde::KappaSpec::Variant variant) {
    space = spde::build_space(cutoff);
    spde::KappaSpec kappa;
    kappa.variant = variant;
    kappa.kernel_grid = 8;
    spde::NoiseAssumptionDecl decl;
    op = std::make_unique<spde::NoiseOperator>(space, 1.3, 0.05, kappa, decl);
    const spde::SpectralField xf = spde::random_field(space, 1, 0.3);
    const spde::SpectralField wf = spde::random_field(space, 2);
    x.resize(space->dim());
    w.resize(space->dim());
    out.resize(space->dim());
    space->to_coords(xf, x);
    space->to_coords(wf, w);
  }
};

void BM_MultiplierApply(benchmark::State& state) {
  Setup s(static_cast<int>(state.range(0)), spde::KappaSpec::Variant::multiplier);
  for (auto _ : state) {
    s.op->apply_coords(s.x, s.w, s.out);
    benchmark::DoNotOptimize(s.out.data());
  }
}

void BM_MultiplierInverse(benchmark::State& state) {
  Setup s(static_cast<int>(state.range(0)), spde::KappaSpec::Variant::multiplier);
  for (auto _ : state) {
    s.op->inverse_apply_coords(s.x, s.w, s.out);
    benchmark::DoNotOptimize(s.out.data());
  }
}

void BM_KernelApply(benchmark::State& state) {
  Setup s(static_cast<int>(state.range(0)), spde::KappaSpec::Variant::integral_kernel);
  for (auto _ : state) {
    s.op->apply_coords(s.x, s.w, s.out);
    benchmark::DoNotOptimize(s.out.data());
  }
}

}  // namespace

BENCHMARK(BM_MultiplierApply)->Arg(1)->Arg(2);
BENCHMARK(BM_MultiplierInverse)->Arg(1)->Arg(2);
BENCHMARK(BM_KernelApply)->Arg(1)->Arg(2);

BENCHMARK_MAIN();
