#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spde/errors.hpp"
#include "spde/noise.hpp"
#include "spde/rng.hpp"

using namespace spde;

namespace {

NoiseOperator make_op(const SpacePtr& space, double c,
                      KappaSpec::Variant variant = KappaSpec::Variant::multiplier,
                      double alpha = 1.3, double strength = 1.0) {
  KappaSpec kappa;
  kappa.variant = variant;
  kappa.kernel_grid = 8;
  NoiseAssumptionDecl decl;
  decl.r = alpha;
  return NoiseOperator(space, alpha, c, kappa, decl, strength);
}

std::vector<double> coords_of(const SpectralField& f) {
  std::vector<double> c(f.space()->dim());
  f.space()->to_coords(f, c);
  return c;
}

}  // namespace

TEST_SUITE_BEGIN("noise");

TEST_CASE("constant part scales a single mode by mu^-alpha") {
  const auto space = build_space(1);
  const NoiseOperator op = make_op(space, 0.0);
  std::size_t n = 0;
  while (space->basis_eigenvalue(n) != 2.0) ++n;
  const SpectralField w = basis_field(space, n);
  const SpectralField x(space);
  const SpectralField out = apply_noise(op, x, w);
  SpectralField expected = w;
  expected *= std::pow(2.0, -1.3);
  CHECK(oracles::field_distance(out, expected) < 1e-15);
}

TEST_CASE("zero kappa variant matches c = 0") {
  const auto space = build_space(1);
  const NoiseOperator op_zero_kappa = make_op(space, 0.7, KappaSpec::Variant::zero);
  const NoiseOperator op_c0 = make_op(space, 0.0);
  const SpectralField x = random_field(space, 1);
  const SpectralField w = random_field(space, 2);
  CHECK(oracles::field_distance(apply_noise(op_zero_kappa, x, w),
                                apply_noise(op_c0, x, w)) == 0.0);
}

TEST_CASE("multiplier action matches a hand-rolled per-mode evaluation") {
  const auto space = build_space(2);
  const double c = 0.05, alpha = 1.3, decay = 1.0;
  const NoiseOperator op = make_op(space, c);
  const SpectralField x = random_field(space, 11);
  const SpectralField w = random_field(space, 12);
  const SpectralField out = apply_noise(op, x, w);

  const auto xc = coords_of(x);
  const auto wc = coords_of(w);
  const auto oc = coords_of(out);
  for (int n = 0; n < space->dim(); ++n) {
    const double mu = space->basis_eigenvalue(n);
    const double lambda = std::pow(static_cast<double>(n + 1), -decay);
    const double expected =
        (std::pow(mu, -alpha) + c * std::pow(mu, -1.5) * lambda * std::tanh(xc[n])) *
        wc[n];
    CHECK(oc[n] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("Galerkin matrix of the multiplier variant is exactly diagonal") {
  const auto space = build_space(1);
  const NoiseOperator op = make_op(space, 0.1);
  const SpectralField x = random_field(space, 3);
  const auto m = op.assemble_matrix(coords_of(x));
  const int dim = space->dim();
  for (int col = 0; col < dim; ++col) {
    for (int row = 0; row < dim; ++row) {
      if (row != col) CHECK(m[static_cast<std::size_t>(col) * dim + row] == 0.0);
    }
  }
}

TEST_CASE("inverse") {
  const auto space = build_space(1);

  SUBCASE("single mode with unit eigenvalue is fixed when c = 0") {
    const NoiseOperator op = make_op(space, 0.0);
    const SpectralField h = basis_field(space, 0);  // mu = 1
    const SpectralField x(space);
    CHECK(oracles::field_distance(inverse_apply(op, x, h), h) < 1e-15);
  }

  SUBCASE("apply then invert is the identity") {
    for (auto variant :
         {KappaSpec::Variant::multiplier, KappaSpec::Variant::integral_kernel}) {
      const NoiseOperator op = make_op(space, 0.05, variant);
      const SpectralField x = random_field(space, 21);
      const SpectralField h = random_field(space, 22);
      const SpectralField round = apply_noise(op, x, inverse_apply(op, x, h));
      CHECK(oracles::field_distance(round, h) < 1e-10 * (1.0 + sobolev_norm(h, 0.0)));
    }
  }

  SUBCASE("inverse bound ratio: equality at r = alpha, contraction for larger r") {
    const NoiseOperator op = make_op(space, 0.0);
    const SpectralField x(space);
    for (std::size_t n : {std::size_t{0}, std::size_t{20}}) {
      const SpectralField h = basis_field(space, n);
      const double ratio =
          sobolev_norm(inverse_apply(op, x, h), 0.0) / sobolev_norm(h, 1.3);
      CHECK(ratio == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (int rep = 0; rep < 10; ++rep) {
      const SpectralField h = random_field(space, 700 + rep);
      const double ratio =
          sobolev_norm(inverse_apply(op, x, h), 0.0) / sobolev_norm(h, 1.4);
      CHECK(ratio <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("derivative") {
  const auto space = build_space(1);

  SUBCASE("constant noise has zero derivative") {
    const NoiseOperator op = make_op(space, 0.0);
    const SpectralField x = random_field(space, 31);
    const SpectralField h = random_field(space, 32);
    const SpectralField w = random_field(space, 33);
    CHECK(noise_derivative(op, x, h, w).is_zero());
  }

  SUBCASE("finite-difference convergence is first order") {
    for (auto variant :
         {KappaSpec::Variant::multiplier, KappaSpec::Variant::integral_kernel}) {
      const NoiseOperator op = make_op(space, 0.2, variant);
      const SpectralField x = random_field(space, 41);
      const SpectralField h = random_field(space, 42);
      const SpectralField w = random_field(space, 43);
      const SpectralField derivative = noise_derivative(op, x, h, w);

      std::vector<double> errs;
      for (double eps : {1e-3, 1e-4, 1e-5}) {
        SpectralField shifted = x;
        shifted.axpy(eps, h);
        SpectralField fd = apply_noise(op, shifted, w);
        fd -= apply_noise(op, x, w);
        fd *= 1.0 / eps;
        errs.push_back(oracles::field_distance(fd, derivative));
      }
      // Forward differences of a smooth map: error shrinks linearly in eps.
      CHECK(errs[1] < errs[0]);
      CHECK(errs[2] < errs[1]);
      CHECK(errs[0] / errs[1] > 3.0);
      CHECK(errs[0] / errs[1] < 30.0);
    }
  }

  SUBCASE("linear in the direction") {
    const NoiseOperator op = make_op(space, 0.2);
    const SpectralField x = random_field(space, 51);
    const SpectralField h = random_field(space, 52);
    const SpectralField w = random_field(space, 53);
    SpectralField twice_h = h;
    twice_h *= 2.0;
    SpectralField doubled = noise_derivative(op, x, h, w);
    doubled *= 2.0;
    CHECK(oracles::field_distance(noise_derivative(op, x, twice_h, w), doubled) <
          1e-12 * (1.0 + sobolev_norm(doubled, 0.0)));
  }
}

TEST_CASE("assumption validation") {
  const auto space = build_space(2);

  SUBCASE("c = 0 trace matches the closed-form spectral sum") {
    const double alpha = 1.3, g = 0.05, strength = 0.7;
    const NoiseOperator op =
        make_op(space, 0.0, KappaSpec::Variant::multiplier, alpha, strength);
    std::vector<SpectralField> states{SpectralField(space)};
    const AssumptionReport report = validate_assumptions(op, states);
    const double expected = strength * strength *
                            oracles::spectral_power_sum(*space, 1.0 + g - 2.0 * alpha);
    CHECK(report.per_state.front().trace_smoothness ==
          doctest::Approx(expected).epsilon(1e-10));
    CHECK(report.per_state.front().derivative_bound == 0.0);
  }

  SUBCASE("trace is non-increasing in alpha at fixed g") {
    double prev = 1e300;
    for (double alpha : {1.28, 1.35, 1.45}) {
      const NoiseOperator op = make_op(space, 0.0, KappaSpec::Variant::multiplier, alpha);
      std::vector<SpectralField> states{SpectralField(space)};
      const double trace = validate_assumptions(op, states).worst_trace;
      CHECK(trace < prev);
      prev = trace;
    }
  }

  SUBCASE("convergence margin g < 2 alpha - 5/2") {
    auto with_g = [&](double g) {
      KappaSpec kappa;
      NoiseAssumptionDecl decl;
      decl.g = g;
      return NoiseOperator(space, 1.3, 0.0, kappa, decl);
    };
    std::vector<SpectralField> states{SpectralField(space)};
    CHECK(validate_assumptions(with_g(0.05), states).g_convergent);
    CHECK_FALSE(validate_assumptions(with_g(0.2), states).g_convergent);
  }

  SUBCASE("nonempty sample set required") {
    const NoiseOperator op = make_op(space, 0.0);
    CHECK_THROWS_AS(validate_assumptions(op, {}), std::invalid_argument);
  }
}

TEST_CASE("kernel variant structural checks") {
  const auto space = build_space(1);
  const NoiseOperator op = make_op(space, 0.3, KappaSpec::Variant::integral_kernel);
  const SpectralField x = random_field(space, 61);
  const SpectralField w = random_field(space, 62);

  const SpectralField out = apply_noise(op, x, w);
  CHECK_NOTHROW(check_field_invariants(out));

  // The closed rank-one trace must match a direct sum over the assembled
  // matrix columns.
  const auto xc = coords_of(x);
  const double g = op.declared().g;
  const auto matrix = op.assemble_matrix(xc);
  const int dim = space->dim();
  double direct = 0.0;
  for (int n = 0; n < dim; ++n) {
    for (int i = 0; i < dim; ++i) {
      const double entry = matrix[static_cast<std::size_t>(n) * dim + i];
      direct += std::pow(space->basis_eigenvalue(i), 1.0 + g) * entry * entry;
    }
  }
  CHECK(op.smoothness_trace(xc, g) == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("construction guards") {
  const auto space = build_space(1);
  KappaSpec kappa;
  NoiseAssumptionDecl decl;
  CHECK_THROWS_AS(NoiseOperator(space, 1.0, 0.0, kappa, decl), std::invalid_argument);
  CHECK_THROWS_AS(NoiseOperator(space, 1.6, 0.0, kappa, decl), std::invalid_argument);
  CHECK_THROWS_AS(NoiseOperator(space, 1.3, -0.1, kappa, decl), std::invalid_argument);
  // Coupling too large for guaranteed invertibility ("c small" violated).
  CHECK_THROWS_AS(NoiseOperator(space, 1.3, 5.0, kappa, decl), std::invalid_argument);
  // Space mismatch at operation level.
  const NoiseOperator op(space, 1.3, 0.0, kappa, decl);
  const auto fine = build_space(2);
  const SpectralField w = random_field(fine, 1);
  CHECK_THROWS_AS(apply_noise(op, w, w), std::invalid_argument);
}

TEST_SUITE_END();
