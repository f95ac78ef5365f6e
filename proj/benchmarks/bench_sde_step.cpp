#include <benchmark/benchmark.h>

#include "spde/rng.hpp"
#include "spde/sde.hpp"

namespace {

spde::SimConfig step_config(int cutoff, bool with_noise) {
  spde::SimConfig cfg;
  cfg.space = spde::build_space(cutoff);
  cfg.dt = 1e-3;
  cfg.T = 1.0;
  cfg.seed = 7;
  if (with_noise) {
    spde::KappaSpec kappa;
    spde::NoiseAssumptionDecl decl;
    cfg.noise = std::make_shared<spde::NoiseOperator>(cfg.space, 1.3, 0.05, kappa, decl);
  }
  return cfg;
}

void BM_StochasticStep(benchmark::State& state) {
  const auto cfg = step_config(static_cast<int>(state.range(0)), true);
  spde::Integrator integ(cfg);
  spde::SpectralField x = spde::random_field(cfg.space, 3, 0.3);
  std::vector<double> xi(cfg.space->dim());
  spde::GaussianStream gs(42);
  std::uint64_t n = 0;
  for (auto _ : state) {
    gs.fill(xi);
    integ.step(x, xi, nullptr, nullptr, nullptr);
    ++n;
  }
  state.SetItemsProcessed(static_cast<int64_t>(n));
}

void BM_StepWithVariation(benchmark::State& state) {
  const auto cfg = step_config(static_cast<int>(state.range(0)), true);
  spde::Integrator integ(cfg);
  spde::SpectralField x = spde::random_field(cfg.space, 3, 0.3);
  spde::SpectralField eta = spde::basis_field(cfg.space, 0);
  std::vector<double> xi(cfg.space->dim());
  spde::GaussianStream gs(42);
  spde::Integrator::StepOptions opts;
  opts.with_inverse = true;
  spde::StepStats stats;
  for (auto _ : state) {
    gs.fill(xi);
    integ.step(x, xi, &eta, nullptr, &stats, opts);
    benchmark::DoNotOptimize(stats.inv_eta_dot_dw);
  }
}

void BM_GaussianDraws(benchmark::State& state) {
  spde::GaussianStream gs(9);
  std::vector<double> xi(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    gs.fill(xi);
    benchmark::DoNotOptimize(xi.data());
  }
}

}  // namespace

BENCHMARK(BM_StochasticStep)->Arg(1)->Arg(2);
BENCHMARK(BM_StepWithVariation)->Arg(1)->Arg(2);
BENCHMARK(BM_GaussianDraws)->Arg(52)->Arg(248);
