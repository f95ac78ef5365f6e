#pragma once

// Monte Carlo estimators for the transition semigroup
//
//   u_m(t, x) = E[ phi(X_m(t, x)) ],
//
// the damped semigroup
//
//   v_m(t, x) = E[ exp(-K int_0^t |A X_m(s,x)|^2 ds) phi(X_m(t, x)) ],
//
// the directional derivative of v_m in direction h,
//
//   D v_m(t,x).h = (1/t) E[ e^{-K int |AX|^2} phi(X(t))
//                           int_0^t (Phi^{-1}(X(s)) eta(s), dW(s)) ]
//          - 2K E[ e^{-K int |AX|^2} phi(X(t))
//                  int_0^t (1 - s/t) (A X(s), A eta(s)) ds ],
//
// (the damping gradient enters through minus the time-weighted potential
// derivative; the finite-difference oracle pins the sign),
//
// with eta the first variation under the same increments, and the
// variation-of-constants consistency between them. All time integrals use
// left-endpoint quadrature on the simulation grid; stochastic integrals
// accumulate (., dW_n) step by step. Replicas fan out across workers with
// (seed, replica)-derived streams and deterministic reduction.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spde/sde.hpp"
#include "spde/spectral_space.hpp"

namespace spde {

// Cylindrical test function with class metadata, so estimate harnesses
// know which norms apply.
struct Observable {
  enum class Class { bounded, c_k, e_class, cylindrical };

  std::string name;
  std::function<double(const SpectralField&)> eval;
  Class cls = Class::bounded;
  int k = 0;                // growth index for the c_k class
  double bound = 1.0;       // declared norm bound
  int cylinder_level = 0;   // P_N level for cylindrical observables

  double operator()(const SpectralField& x) const { return eval(x); }
};

// Named registry used by the CLI and the test panels.
Observable observable_by_name(const std::string& name);
std::vector<std::string> observable_names();

// Class-membership spot checks on samples: returns the worst ratio of
// |phi(x)| to bound*(1+|Ax|)^k over the samples (c_k), or of the increment
// quotient over pairs (e_class).
double observable_ck_witness(const Observable& phi,
                             const std::vector<SpectralField>& samples);
double observable_e_witness(const Observable& phi,
                            const std::vector<SpectralField>& samples);

struct McEstimate {
  double value = 0.0;
  double stderr_ = 0.0;  // sample standard deviation / sqrt(samples)
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  std::int64_t censored = 0;  // blown-up replicas, reported never dropped silently
  bool valid = true;          // false when censoring exceeds 0.1%
};

// E[phi(X(t,x))]; t = 0 returns phi(P_m x) exactly with zero stderr.
McEstimate estimate_semigroup(const Observable& phi, double t, const SpectralField& x,
                              const SimConfig& cfg, std::size_t n_samples);

// Feynman-Kac damped mean; k_damp = 0 reduces to estimate_semigroup.
McEstimate estimate_feynman_kac(const Observable& phi, double k_damp, double t,
                                const SpectralField& x, const SimConfig& cfg,
                                std::size_t n_samples);

// Common-random-number difference v(t, x_b) - v(t, x_a): replica i of both
// points consumes the identical increments, so the difference is estimated
// pathwise.
McEstimate estimate_feynman_kac_difference(const Observable& phi, double k_damp,
                                           double t, const SpectralField& xa,
                                           const SpectralField& xb,
                                           const SimConfig& cfg, std::size_t n_samples);

// Directional derivative of the damped semigroup at x in direction h.
McEstimate estimate_bel_gradient(const Observable& phi, double k_damp, double t,
                                 const SpectralField& x, const SpectralField& h,
                                 const SimConfig& cfg, std::size_t n_samples);

// Same derivative at every time of an increasing grid, from one trajectory
// sweep per replica (the running integrals serve all grid times).
std::vector<McEstimate> estimate_bel_gradient_curve(const Observable& phi, double k_damp,
                                                    const std::vector<double>& t_grid,
                                                    const SpectralField& x,
                                                    const SpectralField& h,
                                                    const SimConfig& cfg,
                                                    std::size_t n_samples);

// Nested estimator of P_s(P_t phi)(x) for the weak-Markov checks.
McEstimate estimate_nested_semigroup(const Observable& phi, double s, double t,
                                     const SpectralField& x, const SimConfig& cfg,
                                     std::size_t n_outer, std::size_t n_inner);

// Two-sided estimate of E[f0(X(0)) f1(X(t1)) f2(X(t1+t2))] against the
// factored form f0(x) P_{t1}[ f1 P_{t2} f2 ](x).
struct FactorizationCheck {
  McEstimate direct;
  McEstimate factored;
  double residual = 0.0;
  double combined_se = 0.0;
};
FactorizationCheck markov_factorization_check(const Observable& f0, const Observable& f1,
                                              const Observable& f2, double t1, double t2,
                                              const SpectralField& x, const SimConfig& cfg,
                                              std::size_t n_direct, std::size_t n_outer,
                                              std::size_t n_inner);

// Residual of u_m(t,.) = S_t phi + K int_0^t S_{t-s}( |A.|^2 u_m(s,.) ) ds,
// with the s-integral on Gauss-Legendre nodes and the inner u_m(s, y)
// estimated by fresh plain Monte Carlo from each outer endpoint.
struct VocReport {
  double left = 0.0;  // u_m(t, x)
  double left_se = 0.0;
  double right = 0.0;  // S_t phi (x) + K * quadrature term
  double right_se = 0.0;
  double fk_term = 0.0;
  double quadrature_term = 0.0;
  double residual = 0.0;
  double combined_se = 0.0;
  double k_damp = 0.0;
  std::size_t nodes = 0;
  bool within(double n_sigma) const {
    return std::abs(residual) <= n_sigma * std::max(combined_se, 1e-300);
  }
};

VocReport check_variation_of_constants(const Observable& phi, double k_damp, double t,
                                       const SpectralField& x, const SimConfig& cfg,
                                       std::size_t n_outer = 1000,
                                       std::size_t n_inner = 1000,
                                       std::size_t step_budget = 500000000);

}  // namespace spde
