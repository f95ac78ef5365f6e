#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spde/bilinear.hpp"
#include "spde/checkpoint.hpp"
#include "spde/control.hpp"
#include "spde/errors.hpp"

using namespace spde;

namespace {

SimConfig control_config(int cutoff, double dt, std::uint64_t seed) {
  SimConfig cfg;
  cfg.space = build_space(cutoff);
  cfg.dt = dt;
  cfg.T = 1.0;
  cfg.seed = seed;
  KappaSpec kappa;
  NoiseAssumptionDecl decl;
  cfg.noise = std::make_shared<NoiseOperator>(cfg.space, 1.3, 0.05, kappa, decl, 0.3);
  return cfg;
}

SpectralField shear(const SpacePtr& space, double amplitude = 1.0) {
  SpectralField f(space);
  const Complex a(0.5 * amplitude);
  f.set_coeff(space->index_of({1, 0, 0}), {Complex(0.0), a, Complex(0.0)});
  f.set_coeff(space->index_of({-1, 0, 0}), {Complex(0.0), a, Complex(0.0)});
  return f;
}

}  // namespace

TEST_SUITE_BEGIN("control");

TEST_CASE("rest-to-rest control is trivial") {
  SimConfig cfg = control_config(1, 1e-3, 1);
  const SpectralField zero(cfg.space);
  const ControlPath cp = build_control(zero, zero, 1.0, cfg);
  CHECK(cp.t_star > 0.0);
  CHECK(cp.pivot.is_zero());
  BilinearWorkspace ws(cfg.space);
  SpectralField g(cfg.space);
  for (std::size_t n = 0; n < cp.steps(); n += 97) {
    cp.control_at(n, ws, g);
    CHECK(sobolev_norm(g, 0.0) < 1e-14);
  }
  CHECK(cp.radius > 0.0);  // floored

  const ReachabilityReport report = verify_reachability(cp, zero, zero, 1e-6, cfg);
  CHECK(report.hit);
  CHECK(report.distance == 0.0);
}

TEST_CASE("single mode to rest") {
  SimConfig cfg = control_config(1, 1e-3, 2);
  const SpectralField x = shear(cfg.space);
  const SpectralField target(cfg.space);
  const ControlPath cp = build_control(x, target, 1.0, cfg);
  BilinearWorkspace ws(cfg.space);

  SUBCASE("free segment decays like the discrete heat flow") {
    for (std::size_t i = 0; i < cp.sample_times.size(); ++i) {
      const double t = cp.sample_times[i];
      if (t > cp.t_star + 1e-12) break;
      const std::size_t n = static_cast<std::size_t>(std::llround(t / cp.dt));
      const double expected = std::pow(1.0 + cfg.dt, -static_cast<double>(n)) *
                              sobolev_norm(x, 0.0);
      CHECK(oracles::relative_error(sobolev_norm(cp.xbar_samples[i], 0.0), expected) <
            1e-10);
    }
  }

  SUBCASE("control vanishes identically before the switch time") {
    SpectralField g(cfg.space);
    for (std::size_t n = 0; n < cp.switch_step(); n += 113) {
      cp.control_at(n, ws, g);
      CHECK(g.is_zero());
    }
  }

  SUBCASE("bridge control matches the discrete formula with the oracle drift") {
    SpectralField g(cfg.space);
    for (std::size_t n = cp.switch_step(); n < cp.steps(); n += 50) {
      cp.control_at(n, ws, g);
      SpectralField expected = cp.bridge_state(n + 1);
      expected -= cp.bridge_state(n);
      expected *= 1.0 / cp.dt;
      expected += fractional_power(cp.bridge_state(n + 1), 1.0);
      expected -= bilinear_direct(cp.bridge_state(n), cp.bridge_state(n));
      const double scale = 1.0 + sobolev_norm(expected, 0.0);
      CHECK(oracles::field_distance(g, expected) / scale < 1e-12);
    }
  }

  SUBCASE("bridge endpoint is the target exactly") {
    CHECK(oracles::field_distance(cp.bridge_state(cp.steps()), target) == 0.0);
    CHECK(oracles::field_distance(cp.xbar_samples.back(), target) == 0.0);
  }

  SUBCASE("radius doubles the path graph-norm supremum") {
    double sup = 0.0;
    for (const auto& state : cp.xbar_samples) {
      sup = std::max(sup, sobolev_norm(state, 1.0));
    }
    CHECK(cp.radius >= 2.0 * sup * (1.0 - 1e-12));
    CHECK(cp.radius >= 2.0 * sobolev_norm(cp.pivot, 1.0));
  }

  SUBCASE("round trip reconstruction reproduces the terminal state") {
    const SpectralField terminal = reconstruct_terminal(cp, x, cfg);
    CHECK(oracles::field_distance(terminal, cp.bridge_state(cp.steps())) <
          10.0 * cfg.dt);
    // The construction inverts the scheme exactly, so the agreement is at
    // rounding level, far inside the 10 dt contract.
    CHECK(oracles::field_distance(terminal, target) < 1e-10);
  }

  SUBCASE("reachability verification hits the target") {
    const ReachabilityReport report = verify_reachability(cp, x, target, 1e-3, cfg);
    CHECK(report.hit);
    CHECK(report.distance < 1e-3);
    CHECK(report.cutoff_inactive);  // theta = 1 along the whole path
    CHECK(report.sup_graph_norm <= cp.radius * (1.0 + 1e-12));
    CHECK_FALSE(report.guard_breached);
  }
}

TEST_CASE("random pair at cutoff 2") {
  SimConfig cfg = control_config(2, 1e-3, 3);
  const SpectralField x = random_field(cfg.space, 31, 0.4, 0.5);
  const SpectralField target = random_field(cfg.space, 32, 0.3, 0.5);
  const ControlPath cp = build_control(x, target, 1.0, cfg);
  const ReachabilityReport report = verify_reachability(cp, x, target, 0.1, cfg);
  CHECK(report.hit);
  CHECK(report.cutoff_inactive);
}

TEST_CASE("perturbed starts degrade continuously (diagnostic)") {
  SimConfig cfg = control_config(1, 1e-3, 4);
  const SpectralField x = shear(cfg.space);
  const SpectralField target(cfg.space);
  const ControlPath cp = build_control(x, target, 1.0, cfg);

  double prev = 0.0;
  for (double perturbation : {1e-4, 1e-3, 1e-2}) {
    SpectralField start = x;
    start.axpy(perturbation, random_field(cfg.space, 33));
    const ReachabilityReport report = verify_reachability(cp, start, target, 10.0, cfg);
    CHECK(report.distance >= prev * 0.5);  // grows with the perturbation size
    CHECK(std::isfinite(report.distance));
    prev = report.distance;
  }
  CHECK(prev > 1e-4);
}

TEST_CASE("stochastic reachability") {
  SimConfig cfg = control_config(1, 1e-3, 5);
  const SpectralField zero(cfg.space);
  SimConfig run = cfg;
  run.T = 0.5;
  const ControlPath cp = build_control(zero, zero, 0.5, run);

  SUBCASE("high-density target near the rest state") {
    const ReachProbability result =
        stochastic_reach_probability(cp, zero, zero, 0.8, run, 400);
    CHECK(result.hits > 0);
    CHECK(result.lower_confidence > 0.0);
    CHECK_FALSE(result.indistinguishable_from_zero);
  }

  SUBCASE("huge ball is always hit") {
    const ReachProbability result =
        stochastic_reach_probability(cp, zero, zero, 1e6, run, 200);
    CHECK(result.estimate.value == doctest::Approx(1.0));
    CHECK(result.lower_confidence > 0.9);
  }

  SUBCASE("tiny ball reports indistinguishable from zero") {
    const ReachProbability result =
        stochastic_reach_probability(cp, zero, zero, 1e-9, run, 100);
    CHECK(result.hits == 0);
    CHECK(result.lower_confidence == 0.0);
    CHECK(result.indistinguishable_from_zero);
  }
}

TEST_CASE("exact binomial lower bound") {
  CHECK(binomial_lower_bound(0, 100, 0.95) == 0.0);
  // Full-hit closed form.
  CHECK(binomial_lower_bound(50, 50, 0.95) ==
        doctest::Approx(std::pow(0.05, 1.0 / 50.0)));
  // Monotone in the hit count.
  double prev = 0.0;
  for (std::int64_t hits : {1, 5, 10, 20, 50, 90}) {
    const double lb = binomial_lower_bound(hits, 100, 0.95);
    CHECK(lb > prev);
    CHECK(lb < static_cast<double>(hits) / 100.0);
    prev = lb;
  }
  // Cross-check against the Beta-quantile characterization computed by
  // direct numeric integration.
  const double got = binomial_lower_bound(10, 100, 0.95);
  const double want = oracles::beta_lower_quantile(10.0, 91.0, 0.05);
  CHECK(std::abs(got - want) < 2e-3);
}

TEST_CASE("construction failure surfaces as its own error") {
  SimConfig cfg = control_config(1, 1e-3, 6);
  cfg.guard = 1e-3;  // everything trips the guard immediately
  const SpectralField x = shear(cfg.space);
  CHECK_THROWS_AS(build_control(x, SpectralField(cfg.space), 1.0, cfg),
                  construction_failed_error);
}

TEST_CASE("guard breach during verification is reported, not thrown") {
  SimConfig cfg = control_config(1, 1e-3, 7);
  const SpectralField x = shear(cfg.space);
  const SpectralField target(cfg.space);
  ControlPath cp = build_control(x, target, 1.0, cfg);
  // Sabotage the bridge with an absurd pivot so the control forcing is huge.
  cp.pivot = shear(cfg.space, 1e7);
  SimConfig tight = cfg;
  tight.guard = 100.0;
  const ReachabilityReport report = verify_reachability(cp, x, target, 1e-3, tight);
  CHECK(report.guard_breached);
  CHECK(report.first_breach_time > 0.0);
  CHECK_FALSE(report.hit);
}

TEST_CASE("control path checkpoints round-trip") {
  SimConfig cfg = control_config(1, 1e-3, 8);
  const SpectralField x = shear(cfg.space);
  const ControlPath cp = build_control(x, SpectralField(cfg.space), 1.0, cfg);
  const std::string path = "control_roundtrip.bin";
  save_control_path(path, cp);
  const ControlPath loaded = load_control_path(path);
  CHECK(loaded.t_star == cp.t_star);
  CHECK(loaded.radius == cp.radius);
  CHECK(loaded.total_steps == cp.total_steps);
  CHECK(loaded.n_star == cp.n_star);
  CHECK(oracles::field_distance(loaded.pivot, cp.pivot) == 0.0);
  CHECK(oracles::field_distance(loaded.target, cp.target) == 0.0);
  CHECK(loaded.xbar_samples.size() == cp.xbar_samples.size());
  CHECK(oracles::field_distance(loaded.xbar_samples.back(), cp.xbar_samples.back()) ==
        0.0);
  std::remove(path.c_str());
}

TEST_SUITE_END();
