#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spde/errors.hpp"
#include "spde/parallel.hpp"
#include "spde/rng.hpp"
#include "spde/sde.hpp"

using namespace spde;

namespace {

SimConfig base_config(int cutoff, double dt, double T, std::uint64_t seed) {
  SimConfig cfg;
  cfg.space = build_space(cutoff);
  cfg.dt = dt;
  cfg.T = T;
  cfg.seed = seed;
  return cfg;
}

std::shared_ptr<NoiseOperator> diagonal_noise(const SpacePtr& space, double c,
                                              double strength = 1.0) {
  KappaSpec kappa;
  kappa.variant = c == 0.0 ? KappaSpec::Variant::zero : KappaSpec::Variant::multiplier;
  NoiseAssumptionDecl decl;
  return std::make_shared<NoiseOperator>(space, 1.3, c, kappa, decl, strength);
}

SpectralField shear_mode(const SpacePtr& space, double amplitude = 1.0) {
  SpectralField f(space);
  const Complex a(0.5 * amplitude);
  f.set_coeff(space->index_of({1, 0, 0}), {Complex(0.0), a, Complex(0.0)});
  f.set_coeff(space->index_of({-1, 0, 0}), {Complex(0.0), a, Complex(0.0)});
  return f;
}

bool identical_fields(const SpectralField& a, const SpectralField& b) {
  const auto ra = a.raw();
  const auto rb = b.raw();
  if (ra.size() != rb.size()) return false;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i] != rb[i]) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE_BEGIN("sde");

TEST_CASE("single shear mode decays like the heat flow") {
  SimConfig cfg = base_config(1, 1e-3, 1.0, 1);
  const SpectralField x0 = shear_mode(cfg.space);
  const Trajectory traj = simulate(x0, cfg);
  const double got = sobolev_norm(traj.final_state(), 0.0);
  const double expected = std::exp(-1.0) * sobolev_norm(x0, 0.0);
  CHECK(oracles::relative_error(got, expected) < 1e-3);
  // Structural constraints at the endpoint.
  CHECK_NOTHROW(check_field_invariants(traj.final_state()));
}

TEST_CASE("OU second moment matches the closed form") {
  SimConfig cfg = base_config(1, 1e-3, 0.25, 99);
  cfg.noise = diagonal_noise(cfg.space, 0.0);
  cfg.enable_bilinear = false;
  cfg.store_stride = 0;
  cfg.ledger_stride = 0;

  const std::size_t n_rep = 2000;
  std::vector<double> values(n_rep);
  const SpectralField zero(cfg.space);
  for (std::size_t rep = 0; rep < n_rep; ++rep) {
    const Trajectory traj = simulate(zero, cfg, rep);
    const double h = sobolev_norm(traj.final_state(), 0.0);
    values[rep] = h * h;
  }
  const MeanStderr ms = mean_stderr(values);
  const double expected = oracles::ou_second_moment(*cfg.space, 1.3, 1.0, 0.25);
  CHECK(std::abs(ms.mean - expected) < 3.0 * ms.se + 0.01 * expected);
}

TEST_CASE("one-step mean-square balance on the OU instance") {
  SimConfig cfg = base_config(1, 1e-3, 1e-3, 7);
  cfg.noise = diagonal_noise(cfg.space, 0.0);
  cfg.enable_bilinear = false;
  cfg.store_stride = 0;
  cfg.ledger_stride = 0;

  const SpectralField x0 = random_field(cfg.space, 5, 0.5);
  const double h0 = sobolev_norm(x0, 0.0);
  const double v0 = sobolev_norm(x0, 0.5);

  const std::size_t n_rep = 20000;
  std::vector<double> values(n_rep);
  for (std::size_t rep = 0; rep < n_rep; ++rep) {
    const Trajectory traj = simulate(x0, cfg, rep);
    const double h = sobolev_norm(traj.final_state(), 0.0);
    values[rep] = h * h - h0 * h0;
  }
  const MeanStderr ms = mean_stderr(values);
  const double ito = cfg.dt * (-2.0 * v0 * v0 + cfg.noise->trace_bound());
  // O(dt^2) scheme bias plus Monte Carlo noise.
  CHECK(std::abs(ms.mean - ito) <
        3.0 * ms.se + 20.0 * cfg.dt * cfg.dt * (1.0 + v0 * v0 + h0 * h0));
}

TEST_CASE("same seed reproduces the trajectory bit for bit") {
  SimConfig cfg = base_config(2, 1e-3, 0.1, 1234);
  cfg.noise = diagonal_noise(cfg.space, 0.05);
  const SpectralField x0 = random_field(cfg.space, 6, 0.3);
  const Trajectory a = simulate(x0, cfg, 3);
  const Trajectory b = simulate(x0, cfg, 3);
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    CHECK(identical_fields(a.states[i], b.states[i]));
  }
  // A different replica takes a different path.
  const Trajectory c = simulate(x0, cfg, 4);
  CHECK_FALSE(identical_fields(a.final_state(), c.final_state()));
}

TEST_CASE("first variation") {
  SUBCASE("zero direction stays zero") {
    SimConfig cfg = base_config(1, 1e-3, 0.1, 11);
    cfg.noise = diagonal_noise(cfg.space, 0.05);
    const SpectralField x0 = random_field(cfg.space, 7, 0.3);
    const SpectralField h(cfg.space);
    const Trajectory traj = simulate_with_variation(x0, h, cfg);
    for (const auto& eta : traj.variation) CHECK(eta.is_zero());
  }

  SUBCASE("linear decoupled case is the exact discrete heat flow") {
    SimConfig cfg = base_config(1, 1e-3, 0.2, 12);
    cfg.noise = diagonal_noise(cfg.space, 0.0);
    cfg.enable_bilinear = false;
    const SpectralField x0 = random_field(cfg.space, 8, 0.3);
    const SpectralField h = random_field(cfg.space, 9);
    const Trajectory traj = simulate_with_variation(x0, h, cfg);

    const std::size_t steps = cfg.steps();
    SpectralField expected = h;
    for (std::size_t m = 0; m < cfg.space->mode_count(); ++m) {
      const double factor =
          std::pow(1.0 / (1.0 + cfg.space->eigenvalue(m) * cfg.dt),
                   static_cast<double>(steps));
      expected.at(m, 0) *= factor;
      expected.at(m, 1) *= factor;
      expected.at(m, 2) *= factor;
    }
    CHECK(oracles::field_distance(traj.variation.back(), expected) < 1e-12);
  }

  SUBCASE("matches the common-noise finite difference as eps decreases") {
    SimConfig cfg = base_config(1, 1e-3, 0.2, 13);
    cfg.noise = diagonal_noise(cfg.space, 0.05, 0.3);
    cfg.record_increments = true;
    cfg.store_stride = 0;
    const SpectralField x0 = random_field(cfg.space, 10, 0.4);
    const SpectralField h = basis_field(cfg.space, 0);

    const Trajectory traj = simulate_with_variation(x0, h, cfg);
    const SpectralField& eta_T = traj.variation.back();

    double prev = 1e300;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
      SpectralField shifted = x0;
      shifted.axpy(eps, h);
      const Trajectory replayed = replay(traj, cfg, &shifted);
      SpectralField fd = replayed.final_state();
      fd -= traj.final_state();
      fd *= 1.0 / eps;
      const double err = oracles::field_distance(fd, eta_T);
      CHECK(err < prev);
      prev = err;
    }
    CHECK(prev < 1e-3 * (1.0 + sobolev_norm(eta_T, 0.0)));
  }
}

TEST_CASE("replay") {
  SimConfig cfg = base_config(1, 1e-3, 0.1, 21);
  cfg.noise = diagonal_noise(cfg.space, 0.05);
  cfg.record_increments = true;
  const SpectralField x0 = random_field(cfg.space, 14, 0.3);
  const Trajectory traj = simulate(x0, cfg, 0);

  SUBCASE("same start reproduces the trajectory exactly") {
    const Trajectory again = replay(traj, cfg);
    CHECK(identical_fields(again.final_state(), traj.final_state()));
  }

  SUBCASE("zeroed increments reduce to the deterministic flow with forcing f") {
    SimConfig forced = cfg;
    forced.forcing = shear_mode(cfg.space, 0.1);
    const Trajectory noisy = simulate(x0, forced, 0);
    Trajectory zeroed = noisy;
    for (auto& step : zeroed.increments) {
      std::fill(step.begin(), step.end(), 0.0);
    }
    const Trajectory replayed = replay(zeroed, forced);
    const Trajectory det = deterministic_solve(
        x0, ForcingPath::constant(*forced.forcing), forced.T, forced);
    CHECK(oracles::field_distance(replayed.final_state(), det.final_state()) < 1e-13);
  }

  SUBCASE("grid mismatch is rejected") {
    SimConfig other = base_config(1, 2e-3, 0.1, 21);
    other.noise = diagonal_noise(other.space, 0.05);
    CHECK_THROWS_AS(replay(traj, other), std::invalid_argument);
    const Trajectory no_inc = simulate(x0, base_config(1, 1e-3, 0.1, 21), 0);
    CHECK_THROWS_AS(replay(no_inc, cfg), std::invalid_argument);
  }
}

TEST_CASE("deterministic solve") {
  SUBCASE("rest state stays at rest") {
    SimConfig cfg = base_config(1, 1e-3, 0.5, 31);
    const SpectralField zero(cfg.space);
    const Trajectory traj = deterministic_solve(zero, ForcingPath::zero(), 0.5, cfg);
    CHECK(traj.final_state().is_zero());
  }

  SUBCASE("discrete energy inequality with forcing") {
    SimConfig cfg = base_config(2, 1e-3, 0.2, 32);
    cfg.store_stride = 1;
    const SpectralField x0 = random_field(cfg.space, 15, 0.8);
    const SpectralField f = shear_mode(cfg.space, 0.5);
    const Trajectory traj =
        deterministic_solve(x0, ForcingPath::constant(f), 0.2, cfg);

    BilinearWorkspace ws(cfg.space);
    for (std::size_t n = 0; n + 1 < traj.states.size(); ++n) {
      const SpectralField& xn = traj.states[n];
      const SpectralField& xn1 = traj.states[n + 1];
      const double h0 = sobolev_norm(xn, 0.0);
      const double h1 = sobolev_norm(xn1, 0.0);
      const double v1 = sobolev_norm(xn1, 0.5);
      const double lhs =
          (h1 * h1 - h0 * h0) / cfg.dt + 2.0 * v1 * v1 - 2.0 * inner_product(f, xn1);
      const SpectralField b = bilinear(xn, xn, ws);
      const double slack =
          2.0 * sobolev_norm(b, 0.0) * oracles::field_distance(xn1, xn);
      CHECK(lhs <= slack / cfg.dt + 1e-10);
    }
  }

  SUBCASE("free dissipative decay of the H norm") {
    SimConfig cfg = base_config(2, 1e-3, 0.3, 33);
    cfg.store_stride = 1;
    const SpectralField x0 = random_field(cfg.space, 16, 0.7);
    const Trajectory traj = deterministic_solve(x0, ForcingPath::zero(), 0.3, cfg);
    for (std::size_t n = 0; n + 1 < traj.states.size(); ++n) {
      CHECK(sobolev_norm(traj.states[n + 1], 0.0) <=
            sobolev_norm(traj.states[n], 0.0) * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("blow-up guard reports the first bad step") {
  SimConfig cfg = base_config(1, 1e-3, 1.0, 41);
  cfg.noise = diagonal_noise(cfg.space, 0.0, 1000.0);
  cfg.enable_bilinear = false;
  cfg.guard = 5.0;
  const SpectralField zero(cfg.space);
  CHECK_THROWS_AS(simulate(zero, cfg), blow_up_error);
  try {
    simulate(zero, cfg);
  } catch (const blow_up_error& e) {
    CHECK(e.graph_norm > cfg.guard);
    CHECK(e.time > 0.0);
    CHECK(e.step >= 1);
  }
}

TEST_CASE("ledger records the damped-integral quadrature") {
  SimConfig cfg = base_config(1, 1e-3, 0.05, 51);
  cfg.noise = diagonal_noise(cfg.space, 0.05);
  cfg.with_convolution = true;
  const SpectralField x0 = random_field(cfg.space, 17, 0.4);
  const Trajectory traj = simulate(x0, cfg);
  const auto& led = traj.ledger;
  REQUIRE(led.t.size() == cfg.steps() + 1);
  CHECK(led.cum_a2.front() == 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < led.t.size(); ++i) {
    acc += led.x_a[i] * led.x_a[i] * cfg.dt;
    CHECK(led.cum_a2[i + 1] == doctest::Approx(acc).epsilon(1e-12));
  }
  CHECK(led.z_a.size() == led.t.size());
  CHECK(led.z_a.front() == 0.0);
}

TEST_CASE("invalid grids are rejected") {
  SimConfig cfg = base_config(1, 1e-3, 0.10050, 61);
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  SimConfig ok = base_config(1, 1e-3, 0.1, 61);
  CHECK_NOTHROW(ok.validate());
}

TEST_SUITE_END();
