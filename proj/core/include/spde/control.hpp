#pragma once

// Deterministic control construction behind the irreducibility argument:
// run the free dynamics from x up to a switch time T*, bridge linearly to
// the target x0 on [T*, T], and read off the control
//
//   gbar(t) = d xbar / dt - A xbar - b_m(xbar),   gbar = 0 on [0, T*],
//
// discretized so that re-integrating with the same scheme reproduces xbar
// exactly on the grid. The cutoff radius R = 2 sup_t |A xbar(t)| keeps the
// truncated drift b_R equal to b along the whole path (theta = 1 regime).
//
// The bridge is affine between xbar(T*) and x0, so the path is represented
// compactly: the pivot, the target and the switch step determine xbar and
// gbar exactly at every grid point; thinned samples of the realized path
// are kept for diagnostics.

#include <cstdint>
#include <vector>

#include "spde/bilinear.hpp"
#include "spde/monte_carlo.hpp"
#include "spde/sde.hpp"
#include "spde/spectral_space.hpp"

namespace spde {

struct ControlPath {
  double t_star = 0.0;
  double horizon = 0.0;
  double dt = 0.0;
  int cutoff = 0;
  double radius = 0.0;       // R = 2 sup_t |A xbar(t)| (floored away from 0)
  SpectralField pivot;       // xbar(T*), endpoint of the free segment
  SpectralField target;      // x0

  // Thinned diagnostics of the realized path (always includes 0, T*, T).
  std::vector<double> sample_times;
  std::vector<SpectralField> xbar_samples;

  std::size_t steps() const { return total_steps; }
  std::size_t switch_step() const { return n_star; }

  std::size_t total_steps = 0;
  std::size_t n_star = 0;

  // xbar at grid point n on the bridge segment (n >= switch_step()).
  SpectralField bridge_state(std::size_t n) const;

  // gbar over the step [t_n, t_{n+1}): zero before the switch, otherwise
  //   (xbar_{n+1} - xbar_n)/dt + (-A) xbar_{n+1} - b_m(xbar_n),
  // the exact discrete inverse of the semi-implicit step.
  void control_at(std::size_t n, BilinearWorkspace& ws, SpectralField& out) const;
};

// Builds the control path. The switch time is chosen adaptively as the
// largest dyadic fraction of T/2 for which the free solve respects the
// blow-up guard; throws construction_failed_error if none does.
ControlPath build_control(const SpectralField& x, const SpectralField& x0, double horizon,
                          const SimConfig& cfg);

struct ReachabilityReport {
  double distance = 0.0;  // |A(X(T) - x0)|
  double epsilon = 0.0;
  bool hit = false;
  double sup_graph_norm = 0.0;  // sup_t |AX(t)| along the controlled run
  double radius = 0.0;
  bool cutoff_inactive = false;  // sup |AX| <= R, i.e. b_R = b throughout
  bool guard_breached = false;
  double first_breach_time = -1.0;
};

// Integrates the controlled deterministic system dX = (AX + b_R(X) + gbar) dt
// from x and reports the terminal D(A) distance to the target.
ReachabilityReport verify_reachability(const ControlPath& cp, const SpectralField& x,
                                       const SpectralField& x0, double epsilon,
                                       const SimConfig& cfg);

// Terminal state of dX = AX + b_m(X) + gbar from x under the same scheme
// (the round-trip reconstruction of xbar(T)).
SpectralField reconstruct_terminal(const ControlPath& cp, const SpectralField& x,
                                   const SimConfig& cfg);

struct ReachProbability {
  McEstimate estimate;        // hit frequency
  std::int64_t hits = 0;
  std::int64_t trials = 0;
  double lower_confidence = 0.0;  // exact one-sided binomial bound
  double confidence_level = 0.95;
  bool indistinguishable_from_zero = false;
};

// Hit frequency of the D(A) ball B(x0, eps) at time cp.horizon under the
// uncontrolled stochastic dynamics; the exact binomial lower confidence
// bound is the empirical irreducibility witness.
ReachProbability stochastic_reach_probability(const ControlPath& cp,
                                              const SpectralField& x,
                                              const SpectralField& x0, double epsilon,
                                              const SimConfig& cfg, std::size_t n_samples,
                                              double confidence_level = 0.95);

// One-sided lower confidence bound for a binomial proportion: the largest p
// with P(Bin(n, p) >= hits) <= 1 - level (0 when hits == 0).
double binomial_lower_bound(std::int64_t hits, std::int64_t trials, double level);

}  // namespace spde
