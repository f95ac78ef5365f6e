#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "spde/field_io.hpp"
#include "spde/spectral_space.hpp"

using namespace spde;

TEST_SUITE_BEGIN("spectral_space");

TEST_CASE("build_space enumerates exactly the sup-norm ball") {
  const auto space = build_space(1);
  CHECK(space->mode_count() == 26);
  // Smallest eigenvalue 1, attained at (1,0,0).
  CHECK(space->eigenvalue(0) == doctest::Approx(1.0));
  CHECK(space->modes()[0].norm_sq() == 1);
  CHECK(space->contains({1, 0, 0}));
  CHECK_FALSE(space->contains({2, 0, 0}));
  CHECK_FALSE(space->contains({0, 0, 0}));

  for (const auto& k : space->modes()) {
    CHECK(k.sup_norm() <= 1);
    CHECK_FALSE(k.is_zero());
    CHECK(space->contains(-k));  // closed under negation
  }
}

TEST_CASE("cutoff zero is rejected") {
  CHECK_THROWS_AS(build_space(0), std::invalid_argument);
}

TEST_CASE("dimension matches the independent enumeration") {
  for (int cutoff : {1, 2, 3}) {
    const auto space = build_space(cutoff);
    const auto count = oracles::enumerate_divergence_free_dof(cutoff);
    CHECK(static_cast<long long>(space->mode_count()) == count.modes);
    CHECK(space->dim() == count.real_dof);
  }
  CHECK(build_space(1)->dim() == 52);
  CHECK(build_space(2)->dim() == 248);
}

TEST_CASE("mode ordering is by eigenvalue then lexicographic") {
  const auto space = build_space(2);
  for (std::size_t m = 1; m < space->mode_count(); ++m) {
    CHECK(space->modes()[m - 1] < space->modes()[m]);
    CHECK(space->eigenvalue(m - 1) <= space->eigenvalue(m));
  }
  for (int n = 1; n < space->dim(); ++n) {
    CHECK(space->basis_eigenvalue(n - 1) <= space->basis_eigenvalue(n));
  }
}

TEST_CASE("random fields satisfy both structural constraints") {
  for (int cutoff : {1, 2}) {
    const auto space = build_space(cutoff);
    for (int rep = 0; rep < 5; ++rep) {
      const SpectralField f = random_field(space, 100 + rep);
      CHECK(divergence_residual(f) < 1e-12 * (1.0 + sobolev_norm(f, 0.0)));
      CHECK(reality_residual(f) == 0.0);
      CHECK_NOTHROW(check_field_invariants(f));
    }
  }
}

TEST_CASE("coordinates are an isometry") {
  const auto space = build_space(2);
  const SpectralField f = random_field(space, 7);
  std::vector<double> coords(space->dim());
  space->to_coords(f, coords);
  double sum = 0.0;
  for (double c : coords) sum += c * c;
  const double h = sobolev_norm(f, 0.0);
  CHECK(sum == doctest::Approx(h * h).epsilon(1e-12));

  SpectralField back(space);
  space->from_coords(coords, back);
  CHECK(oracles::field_distance(back, f) < 1e-13 * (1.0 + h));
}

TEST_CASE("fractional powers act diagonally") {
  const auto space = build_space(2);

  SUBCASE("unit eigenvalue mode is unchanged for any exponent") {
    SpectralField f(space);
    f.set_coeff(space->index_of({1, 0, 0}), {Complex(0.0), Complex(0.5), Complex(0.0)});
    f.set_coeff(space->index_of({-1, 0, 0}), {Complex(0.0), Complex(0.5), Complex(0.0)});
    const SpectralField g = fractional_power(f, 7.0);
    CHECK(oracles::field_distance(g, f) == 0.0);
  }

  SUBCASE("eigenvalue-2 mode scales by sqrt(2) at gamma = 1/2") {
    SpectralField f(space);
    f.set_coeff(space->index_of({1, 1, 0}), {Complex(0.5), Complex(-0.5), Complex(0.0)});
    f.set_coeff(space->index_of({-1, -1, 0}), {Complex(0.5), Complex(-0.5), Complex(0.0)});
    const SpectralField g = fractional_power(f, 0.5);
    SpectralField expected = f;
    expected *= std::sqrt(2.0);
    CHECK(oracles::field_distance(g, expected) < 1e-15);
  }

  SUBCASE("inverse composition returns the field") {
    const SpectralField f = random_field(space, 11);
    const SpectralField g = fractional_power(fractional_power(f, 1.7), -1.7);
    CHECK(oracles::field_distance(g, f) < 1e-14 * sobolev_norm(f, 0.0));
  }

  SUBCASE("exponents compose additively") {
    const SpectralField f = random_field(space, 12);
    const SpectralField two_step = fractional_power(fractional_power(f, 0.9), -0.4);
    const SpectralField one_step = fractional_power(f, 0.5);
    CHECK(oracles::field_distance(two_step, one_step) <
          1e-13 * (1.0 + sobolev_norm(one_step, 0.0)));
  }
}

TEST_CASE("sobolev norms") {
  const auto space = build_space(2);

  SUBCASE("zero field") {
    SpectralField zero(space);
    for (double gamma : {-1.0, 0.0, 0.5, 1.0, 2.0}) {
      CHECK(sobolev_norm(zero, gamma) == 0.0);
    }
  }

  SUBCASE("unit-amplitude eigenvalue-2 mode has |Ax| = 2") {
    // Basis fields are unit vectors in H; pick one supported on |k|^2 = 2.
    std::size_t n = 0;
    while (space->basis_eigenvalue(n) != 2.0) ++n;
    const SpectralField f = basis_field(space, n);
    CHECK(sobolev_norm(f, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sobolev_norm(f, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  }

  SUBCASE("interpolation inequality holds with constant 1") {
    const double triples[3][3] = {{0.0, 0.5, 1.0}, {0.25, 0.5, 1.5}, {0.5, 1.0, 2.0}};
    for (int rep = 0; rep < 100; ++rep) {
      const SpectralField f = random_field(space, 500 + rep, 1.0, 0.5);
      for (const auto& tr : triples) {
        const double lo = sobolev_norm(f, tr[0]);
        const double mid = sobolev_norm(f, tr[1]);
        const double hi = sobolev_norm(f, tr[2]);
        const double theta = (tr[2] - tr[1]) / (tr[2] - tr[0]);
        CHECK(mid <= std::pow(lo, theta) * std::pow(hi, 1.0 - theta) * (1.0 + 1e-12));
      }
    }
  }

  SUBCASE("Parseval against physical-space quadrature") {
    for (int cutoff : {1, 2}) {
      const auto sp = build_space(cutoff);
      const SpectralField f = random_field(sp, 77);
      const double coeff_sum = std::pow(sobolev_norm(f, 0.0), 2.0);
      const double grid_sum = oracles::physical_mean_square(f, 2 * cutoff + 2);
      CHECK(oracles::relative_error(grid_sum, coeff_sum) < 1e-10);
    }
  }
}

TEST_CASE("projection") {
  const auto fine = build_space(2);
  const auto coarse = build_space(1);

  SUBCASE("idempotent on supported fields") {
    const SpectralField f = random_field(coarse, 5);
    const SpectralField g = project(f, coarse);
    CHECK(oracles::field_distance(g, f) == 0.0);
  }

  SUBCASE("kills unsupported modes") {
    SpectralField f(fine);
    f.set_coeff(fine->index_of({2, 0, 0}), {Complex(0.0), Complex(1.0), Complex(0.0)});
    f.set_coeff(fine->index_of({-2, 0, 0}), {Complex(0.0), Complex(1.0), Complex(0.0)});
    const SpectralField g = project(f, coarse);
    CHECK(g.is_zero());
  }

  SUBCASE("self-adjoint in the H inner product") {
    for (int rep = 0; rep < 10; ++rep) {
      const SpectralField x = random_field(fine, 300 + rep);
      const SpectralField y = random_field(fine, 400 + rep);
      // P_m x, embedded back into the fine space for the pairing.
      const SpectralField px = project(project(x, coarse), fine);
      const SpectralField py = project(project(y, coarse), fine);
      const double left = inner_product(px, y);
      const double right = inner_product(x, py);
      CHECK(std::abs(left - right) < 1e-14 * (1.0 + std::abs(left)));
    }
  }

  SUBCASE("mismatched spaces are rejected by the inner product") {
    const SpectralField x = random_field(fine, 1);
    const SpectralField y = random_field(coarse, 2);
    CHECK_THROWS_AS(inner_product(x, y), std::invalid_argument);
  }

  SUBCASE("projection preserves the structural constraints") {
    const SpectralField f = random_field(fine, 9);
    const SpectralField g = project(f, coarse);
    CHECK_NOTHROW(check_field_invariants(g));
  }
}

TEST_CASE("serialization round-trips exactly") {
  const auto space = build_space(2);
  const SpectralField f = random_field(space, 21);

  SUBCASE("json") {
    const SpectralField g = field_from_json(field_to_json(f));
    CHECK(g.space()->cutoff() == 2);
    CHECK(oracles::field_distance(g, f) == 0.0);
  }

  SUBCASE("binary") {
    const std::string path = "field_roundtrip.bin";
    save_field(path, f);
    const SpectralField g = load_field(path);
    CHECK(oracles::field_distance(g, f) == 0.0);
    std::remove(path.c_str());
  }
}

TEST_SUITE_END();
