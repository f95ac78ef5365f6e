#pragma once

// Test-side oracles, independent of the library implementation paths they
// check: brute-force enumerations, closed forms for the linear
// (Ornstein-Uhlenbeck) instances, direct quadratures and alternative
// algebraic forms.

#include <cmath>
#include <complex>
#include <vector>

#include "spde/spectral_space.hpp"

namespace oracles {

struct DofCount {
  long long modes = 0;
  long long pairs = 0;
  long long real_dof = 0;
};

// Independent enumeration of the divergence-free real degrees of freedom:
// every nonzero lattice point within the sup-norm cutoff contributes one
// complex 3-vector constrained by one complex divergence equation (2
// complex dof), and conjugate pairs identify half of them.
inline DofCount enumerate_divergence_free_dof(int cutoff) {
  DofCount count;
  for (int kx = -cutoff; kx <= cutoff; ++kx) {
    for (int ky = -cutoff; ky <= cutoff; ++ky) {
      for (int kz = -cutoff; kz <= cutoff; ++kz) {
        if (kx == 0 && ky == 0 && kz == 0) continue;
        ++count.modes;
      }
    }
  }
  count.pairs = count.modes / 2;
  // 6 real dof per complex coefficient, minus 2 for the divergence
  // constraint, gives 4 per conjugate pair.
  count.real_dof = 4 * count.pairs;
  return count;
}

// E|X(t)|^2 for dX = AX dt + strength (-A)^{-alpha} dW from X(0) = 0:
// each real mode is an independent scalar OU process.
inline double ou_second_moment(const spde::GalerkinSpace& space, double alpha,
                               double strength, double t) {
  double sum = 0.0;
  for (int n = 0; n < space.dim(); ++n) {
    const double mu = space.basis_eigenvalue(n);
    const double sigma_sq = strength * strength * std::pow(mu, -2.0 * alpha);
    sum += sigma_sq * (1.0 - std::exp(-2.0 * mu * t)) / (2.0 * mu);
  }
  return sum;
}

// Stationary E|(-A)^gamma X|^2 of the same process.
inline double ou_stationary_moment(const spde::GalerkinSpace& space, double alpha,
                                   double strength, double gamma) {
  double sum = 0.0;
  for (int n = 0; n < space.dim(); ++n) {
    const double mu = space.basis_eigenvalue(n);
    const double sigma_sq = strength * strength * std::pow(mu, -2.0 * alpha);
    sum += std::pow(mu, 2.0 * gamma) * sigma_sq / (2.0 * mu);
  }
  return sum;
}

// Direct spectral sum: sum_n mu_n^{exponent}.
inline double spectral_power_sum(const spde::GalerkinSpace& space, double exponent) {
  double sum = 0.0;
  for (int n = 0; n < space.dim(); ++n) {
    sum += std::pow(space.basis_eigenvalue(n), exponent);
  }
  return sum;
}

// Covariance of the linear stochastic convolution per real mode:
// Z_n(t) = strength mu^{-alpha} int_0^t e^{-mu(t-s)} dW_n(s).
inline double ou_convolution_cov(double mu, double sigma_sq, double s, double t) {
  return sigma_sq * std::exp(-mu * (s + t)) *
         (std::exp(2.0 * mu * std::min(s, t)) - 1.0) / (2.0 * mu);
}

// Closed form E|(-A)^{1+eps}(Z(t2) - Z(t1))|^2 for the c = 0 instance.
inline double z_increment_second_moment(const spde::GalerkinSpace& space, double alpha,
                                        double strength, double eps, double t1,
                                        double t2) {
  double sum = 0.0;
  for (int n = 0; n < space.dim(); ++n) {
    const double mu = space.basis_eigenvalue(n);
    const double sigma_sq = strength * strength * std::pow(mu, -2.0 * alpha);
    const double cov = ou_convolution_cov(mu, sigma_sq, t1, t1) +
                       ou_convolution_cov(mu, sigma_sq, t2, t2) -
                       2.0 * ou_convolution_cov(mu, sigma_sq, t1, t2);
    sum += std::pow(mu, 2.0 * (1.0 + eps)) * cov;
  }
  return sum;
}

// Physical-space quadrature of the mean of |u|^2 over the torus on an
// M^3 grid (exact for trigonometric polynomials once M exceeds twice the
// cutoff).
inline double physical_mean_square(const spde::SpectralField& field, int grid) {
  const double two_pi = 6.28318530717958647692;
  double sum = 0.0;
  for (int a = 0; a < grid; ++a) {
    for (int b = 0; b < grid; ++b) {
      for (int c = 0; c < grid; ++c) {
        const spde::Vec3d xi = {two_pi * a / grid, two_pi * b / grid,
                                two_pi * c / grid};
        const spde::Vec3d u = evaluate_physical(field, xi);
        sum += u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
      }
    }
  }
  return sum / (static_cast<double>(grid) * grid * grid);
}

// -P(div(x (x) y + y (x) x)) evaluated directly in coefficient space; equals
// b(x,y) + b(y,x) for divergence-free fields.
inline spde::SpectralField divergence_form_sum(const spde::SpectralField& x,
                                               const spde::SpectralField& y) {
  const spde::GalerkinSpace& space = *x.space();
  spde::SpectralField out(x.space());
  const auto& modes = space.modes();
  std::vector<spde::Vec3c> accum(modes.size(),
                                 spde::Vec3c{spde::Complex(0.0), spde::Complex(0.0),
                                             spde::Complex(0.0)});
  for (std::size_t p = 0; p < modes.size(); ++p) {
    for (std::size_t q = 0; q < modes.size(); ++q) {
      const std::size_t k = space.index_of(modes[p] + modes[q]);
      if (k == spde::GalerkinSpace::npos) continue;
      const spde::WaveVector kv = modes[p] + modes[q];
      const spde::Vec3c xp = x.coeff(p);
      const spde::Vec3c yq = y.coeff(q);
      const spde::Vec3c yp = y.coeff(p);
      const spde::Vec3c xq = x.coeff(q);
      for (int i = 0; i < 3; ++i) {
        spde::Complex div(0.0);
        const double kcomp[3] = {static_cast<double>(kv.x), static_cast<double>(kv.y),
                                 static_cast<double>(kv.z)};
        for (int j = 0; j < 3; ++j) {
          div += kcomp[j] * (xp[j] * yq[i] + yp[j] * xq[i]);
        }
        accum[k][i] += spde::Complex(0.0, 1.0) * div;
      }
    }
  }
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const spde::WaveVector k = modes[m];
    const spde::Vec3c& v = accum[m];
    const spde::Complex kdotv = static_cast<double>(k.x) * v[0] +
                                static_cast<double>(k.y) * v[1] +
                                static_cast<double>(k.z) * v[2];
    const spde::Complex lambda = kdotv / space.eigenvalue(m);
    out.set_coeff(m, {-(v[0] - static_cast<double>(k.x) * lambda),
                      -(v[1] - static_cast<double>(k.y) * lambda),
                      -(v[2] - static_cast<double>(k.z) * lambda)});
  }
  return out;
}

// Beta(a, b) lower quantile by direct numeric integration of the density
// (cross-check for the exact binomial confidence bound).
inline double beta_lower_quantile(double a, double b, double p) {
  const int n = 200000;
  double log_norm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  double cdf = 0.0;
  double prev = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double x = static_cast<double>(i) / n;
    const double pdf = std::exp(log_norm + (a - 1.0) * std::log(x) +
                                (b - 1.0) * std::log1p(-x));
    cdf += 0.5 * (prev + pdf) / n;
    prev = pdf;
    if (cdf >= p) return x;
  }
  return 1.0;
}

inline double field_distance(const spde::SpectralField& a, const spde::SpectralField& b) {
  return spde::sobolev_norm(a - b, 0.0);
}

inline double relative_error(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

}  // namespace oracles
