#include "spde/control.hpp"

#include <cmath>
#include <stdexcept>

#include "spde/errors.hpp"
#include "spde/parallel.hpp"
#include "spde/rng.hpp"

namespace spde {

namespace {

constexpr double kRadiusFloor = 1e-6;

std::vector<double> resolve_factors(const GalerkinSpace& space, double dt) {
  std::vector<double> factors(space.mode_count());
  for (std::size_t m = 0; m < space.mode_count(); ++m) {
    factors[m] = 1.0 / (1.0 + space.eigenvalue(m) * dt);
  }
  return factors;
}

void resolve_in_place(SpectralField& f, const std::vector<double>& factors) {
  auto raw = f.raw();
  for (std::size_t m = 0; m < factors.size(); ++m) {
    raw[3 * m] *= factors[m];
    raw[3 * m + 1] *= factors[m];
    raw[3 * m + 2] *= factors[m];
  }
}

}  // namespace

SpectralField ControlPath::bridge_state(std::size_t n) const {
  if (n < n_star || n > total_steps) {
    throw std::invalid_argument("ControlPath: grid index outside the bridge segment");
  }
  const double lambda = static_cast<double>(n - n_star) /
                        static_cast<double>(total_steps - n_star);
  SpectralField state = pivot;
  state *= (1.0 - lambda);
  state.axpy(lambda, target);
  return state;
}

void ControlPath::control_at(std::size_t n, BilinearWorkspace& ws,
                             SpectralField& out) const {
  if (n >= total_steps) {
    throw std::invalid_argument("ControlPath: step index out of range");
  }
  if (n < n_star) {
    out.set_zero();
    return;
  }
  const SpectralField xn = bridge_state(n);
  const SpectralField xn1 = bridge_state(n + 1);
  out = xn1;
  out -= xn;
  out *= 1.0 / dt;
  out += fractional_power(xn1, 1.0);
  out -= bilinear(xn, xn, ws);
}

ControlPath build_control(const SpectralField& x, const SpectralField& x0, double horizon,
                          const SimConfig& cfg) {
  if (!(horizon > 0.0)) throw std::invalid_argument("build_control: horizon must be > 0");
  SimConfig det_cfg = cfg;
  det_cfg.T = horizon;
  det_cfg.noise.reset();
  det_cfg.forcing.reset();
  det_cfg.record_increments = false;
  det_cfg.with_convolution = false;
  det_cfg.ledger_stride = 1;

  const SpectralField start = project(x, cfg.space);
  const SpectralField target = project(x0, cfg.space);
  const std::size_t total = det_cfg.steps_for(horizon);

  // Thin the stored free-segment states; the ledger still carries |AX| at
  // every step for the radius.
  det_cfg.store_stride = std::max<std::size_t>(1, total / 256);

  // Largest dyadic fraction of T/2 whose free solve stays under the guard.
  std::size_t n_star = total / 2;
  Trajectory free_run;
  bool have_free = false;
  while (n_star >= 1) {
    try {
      free_run = deterministic_solve(start, ForcingPath::zero(),
                                     static_cast<double>(n_star) * det_cfg.dt, det_cfg);
      have_free = true;
      break;
    } catch (const blow_up_error&) {
      n_star /= 2;
    }
  }
  if (!have_free || n_star == 0 || n_star >= total) {
    throw construction_failed_error(
        "build_control: free dynamics blow up before any acceptable switch time");
  }

  ControlPath cp;
  cp.t_star = static_cast<double>(n_star) * det_cfg.dt;
  cp.horizon = horizon;
  cp.dt = det_cfg.dt;
  cp.cutoff = cfg.space->cutoff();
  cp.total_steps = total;
  cp.n_star = n_star;
  cp.pivot = free_run.final_state();
  cp.target = target;

  // Diagnostics: thinned free-segment samples plus bridge endpoints.
  cp.sample_times = free_run.times;
  cp.xbar_samples = free_run.states;
  const std::size_t bridge_stride = std::max<std::size_t>(1, (total - n_star) / 64);
  for (std::size_t n = n_star + bridge_stride; n < total; n += bridge_stride) {
    cp.sample_times.push_back(static_cast<double>(n) * cp.dt);
    cp.xbar_samples.push_back(cp.bridge_state(n));
  }
  cp.sample_times.push_back(horizon);
  cp.xbar_samples.push_back(target);

  // sup_t |A xbar|: ledger over the free segment; the bridge is affine, so
  // its graph-norm supremum is attained at an endpoint.
  double sup_a = 0.0;
  for (double a : free_run.ledger.x_a) sup_a = std::max(sup_a, a);
  sup_a = std::max({sup_a, sobolev_norm(cp.pivot, 1.0), sobolev_norm(target, 1.0)});
  cp.radius = std::max(2.0 * sup_a, kRadiusFloor);
  return cp;
}

ReachabilityReport verify_reachability(const ControlPath& cp, const SpectralField& x,
                                       const SpectralField& x0, double epsilon,
                                       const SimConfig& cfg) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("verify_reachability: epsilon > 0");
  if (cp.cutoff != cfg.space->cutoff() || std::abs(cp.dt - cfg.dt) > 1e-15) {
    throw std::invalid_argument("verify_reachability: control grid mismatch");
  }

  ReachabilityReport report;
  report.epsilon = epsilon;
  report.radius = cp.radius;

  const std::vector<double> factors = resolve_factors(*cfg.space, cp.dt);
  BilinearWorkspace ws(cfg.space);
  SpectralField state = project(x, cfg.space);
  SpectralField control(cfg.space);
  const SpectralField target = project(x0, cfg.space);
  double sup_a = sobolev_norm(state, 1.0);

  for (std::size_t n = 0; n < cp.steps(); ++n) {
    const SpectralField drift = cutoff_bilinear(state, cp.radius, ws);
    cp.control_at(n, ws, control);
    state.axpy(cp.dt, drift);
    state.axpy(cp.dt, control);
    resolve_in_place(state, factors);
    const double ga = sobolev_norm(state, 1.0);
    sup_a = std::max(sup_a, ga);
    if (!(ga <= cfg.guard)) {
      report.guard_breached = true;
      report.first_breach_time = static_cast<double>(n + 1) * cp.dt;
      report.sup_graph_norm = sup_a;
      report.distance = sobolev_norm(state - target, 1.0);
      return report;
    }
  }

  report.sup_graph_norm = sup_a;
  report.cutoff_inactive = sup_a <= cp.radius * (1.0 + 1e-12);
  report.distance = sobolev_norm(state - target, 1.0);
  report.hit = report.distance < epsilon;
  return report;
}

SpectralField reconstruct_terminal(const ControlPath& cp, const SpectralField& x,
                                   const SimConfig& cfg) {
  const std::vector<double> factors = resolve_factors(*cfg.space, cp.dt);
  BilinearWorkspace ws(cfg.space);
  SpectralField state = project(x, cfg.space);
  SpectralField drift(cfg.space), control(cfg.space);
  for (std::size_t n = 0; n < cp.steps(); ++n) {
    bilinear_into(state, state, ws, drift);
    cp.control_at(n, ws, control);
    state.axpy(cp.dt, drift);
    state.axpy(cp.dt, control);
    resolve_in_place(state, factors);
  }
  return state;
}

double binomial_lower_bound(std::int64_t hits, std::int64_t trials, double level) {
  if (hits <= 0) return 0.0;
  if (hits >= trials) {
    // Lower bound for a full-hit sample: (1 - level)^{1/n}.
    return std::pow(1.0 - level, 1.0 / static_cast<double>(trials));
  }
  const double alpha = 1.0 - level;
  // Upper tail P(Bin(n, p) >= hits), by stable log-space summation.
  auto upper_tail = [&](double p) {
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    double log_term = std::lgamma(static_cast<double>(trials) + 1.0) -
                      std::lgamma(static_cast<double>(hits) + 1.0) -
                      std::lgamma(static_cast<double>(trials - hits) + 1.0) +
                      static_cast<double>(hits) * lp +
                      static_cast<double>(trials - hits) * lq;
    double sum = 0.0;
    double term = std::exp(log_term);
    for (std::int64_t j = hits; j <= trials; ++j) {
      sum += term;
      if (term < 1e-18 * sum && j > hits) break;
      term *= static_cast<double>(trials - j) / static_cast<double>(j + 1) *
              (p / (1.0 - p));
    }
    return std::min(sum, 1.0);
  };
  double lo = 0.0, hi = static_cast<double>(hits) / static_cast<double>(trials);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (upper_tail(mid) < alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

ReachProbability stochastic_reach_probability(const ControlPath& cp,
                                              const SpectralField& x,
                                              const SpectralField& x0, double epsilon,
                                              const SimConfig& cfg, std::size_t n_samples,
                                              double confidence_level) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("stochastic_reach_probability: epsilon > 0");
  }
  SimConfig run_cfg = cfg;
  run_cfg.T = cp.horizon;
  run_cfg.store_stride = 0;
  run_cfg.ledger_stride = 0;

  const SpectralField start = project(x, cfg.space);
  const SpectralField target = project(x0, cfg.space);
  const std::size_t steps = run_cfg.steps_for(cp.horizon);

  std::vector<double> hit_flags(n_samples, 0.0);
  std::vector<char> dead(n_samples, 0);
  parallel_for_with_state(
      n_samples, cfg.workers,
      [&] {
        struct State {
          Integrator integ;
          SpectralField x;
          std::vector<double> xi;
          explicit State(const SimConfig& c) : integ(c), x(c.space), xi(c.space->dim()) {}
        };
        return std::make_shared<State>(run_cfg);
      },
      [&](auto& st, std::size_t replica) {
        st->x = start;
        try {
          for (std::size_t n = 0; n < steps; ++n) {
            GaussianStream gs = step_stream(run_cfg.seed, replica, n);
            gs.fill(st->xi);
            st->integ.step(st->x, st->xi, nullptr, nullptr, nullptr);
          }
          hit_flags[replica] = sobolev_norm(st->x - target, 1.0) < epsilon ? 1.0 : 0.0;
        } catch (const blow_up_error&) {
          dead[replica] = 1;  // a blown-up replica counts as a miss, reported below
        }
      });

  ReachProbability result;
  result.trials = static_cast<std::int64_t>(n_samples);
  std::int64_t censored = 0;
  double hits = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    if (dead[i]) ++censored;
    hits += hit_flags[i];
  }
  result.hits = static_cast<std::int64_t>(hits);
  const double p = hits / static_cast<double>(n_samples);
  result.estimate.value = p;
  result.estimate.stderr_ =
      std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n_samples));
  result.estimate.samples = result.trials;
  result.estimate.seed = run_cfg.seed;
  result.estimate.censored = censored;
  result.estimate.valid = censored * 1000 <= result.trials;
  result.confidence_level = confidence_level;
  result.lower_confidence =
      binomial_lower_bound(result.hits, result.trials, confidence_level);
  result.indistinguishable_from_zero = result.hits == 0;
  return result;
}

}  // namespace spde
