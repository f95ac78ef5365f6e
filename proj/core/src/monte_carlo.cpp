#include "spde/monte_carlo.hpp"

#include <cmath>
#include <stdexcept>

#include "spde/errors.hpp"
#include "spde/parallel.hpp"
#include "spde/rng.hpp"

namespace spde {

namespace {

double coord_of(const SpectralField& x, std::size_t n) {
  std::vector<double> coords(x.space()->dim());
  x.space()->to_coords(x, coords);
  return coords[n];
}

// 8-point Gauss-Legendre rule on [-1, 1].
constexpr std::size_t kGlNodes = 8;
constexpr double kGlX[kGlNodes] = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
    -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
    0.7966664774136267,  0.9602898564975363};
constexpr double kGlW[kGlNodes] = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
    0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
    0.2223810344533745, 0.1012285362903763};

struct ReplicaValues {
  std::vector<double> value;
  std::vector<char> censored;

  explicit ReplicaValues(std::size_t n) : value(n, 0.0), censored(n, 0) {}

  McEstimate reduce(std::uint64_t seed) const {
    std::vector<double> alive;
    alive.reserve(value.size());
    std::int64_t bad = 0;
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (censored[i]) {
        ++bad;
      } else {
        alive.push_back(value[i]);
      }
    }
    const MeanStderr ms = mean_stderr(alive);
    McEstimate est;
    est.value = ms.mean;
    est.stderr_ = ms.se;
    est.samples = static_cast<std::int64_t>(value.size());
    est.seed = seed;
    est.censored = bad;
    est.valid = bad * 1000 <= static_cast<std::int64_t>(value.size());
    return est;
  }
};

struct WorkerState {
  explicit WorkerState(const SimConfig& cfg)
      : integ(cfg), x(cfg.space), x2(cfg.space), eta(cfg.space), xi(cfg.space->dim()) {}
  Integrator integ;
  SpectralField x;
  SpectralField x2;
  SpectralField eta;
  std::vector<double> xi;
};

void require_probability_inputs(const SimConfig& cfg, double t, std::size_t n) {
  if (n < 2) throw std::invalid_argument("estimator: need at least 2 samples");
  if (t < 0.0 || t > cfg.T + 1e-12) {
    throw std::invalid_argument("estimator: t outside [0, cfg.T]");
  }
}

}  // namespace

Observable observable_by_name(const std::string& name) {
  Observable obs;
  obs.name = name;
  if (name == "one") {
    obs.eval = [](const SpectralField&) { return 1.0; };
    obs.cls = Observable::Class::bounded;
    obs.bound = 1.0;
  } else if (name == "norm-sq") {
    obs.eval = [](const SpectralField& x) {
      const double n = sobolev_norm(x, 0.0);
      return n * n;
    };
    obs.cls = Observable::Class::c_k;
    obs.k = 2;
  } else if (name == "vnorm-sq") {
    obs.eval = [](const SpectralField& x) {
      const double n = sobolev_norm(x, 0.5);
      return n * n;
    };
    obs.cls = Observable::Class::c_k;
    obs.k = 2;
  } else if (name == "anorm-sq") {
    obs.eval = [](const SpectralField& x) {
      const double n = sobolev_norm(x, 1.0);
      return n * n;
    };
    obs.cls = Observable::Class::c_k;
    obs.k = 2;
  } else if (name == "exp-neg-norm-sq") {
    obs.eval = [](const SpectralField& x) {
      const double n = sobolev_norm(x, 0.0);
      return std::exp(-n * n);
    };
    obs.cls = Observable::Class::e_class;
    obs.bound = 1.0;
  } else if (name == "coord-0") {
    obs.eval = [](const SpectralField& x) { return coord_of(x, 0); };
    obs.cls = Observable::Class::c_k;
    obs.k = 1;
    obs.cylinder_level = 1;
  } else if (name == "cos-coord-0") {
    obs.eval = [](const SpectralField& x) { return std::cos(coord_of(x, 0)); };
    obs.cls = Observable::Class::cylindrical;
    obs.cylinder_level = 1;
  } else if (name == "sin-coord-1") {
    obs.eval = [](const SpectralField& x) { return std::sin(coord_of(x, 1)); };
    obs.cls = Observable::Class::cylindrical;
    obs.cylinder_level = 1;
  } else if (name == "cos-sum-01") {
    obs.eval = [](const SpectralField& x) {
      std::vector<double> coords(x.space()->dim());
      x.space()->to_coords(x, coords);
      return std::cos(coords[0] + coords[1]);
    };
    obs.cls = Observable::Class::cylindrical;
    obs.cylinder_level = 1;
  } else {
    throw std::invalid_argument("unknown observable: " + name);
  }
  return obs;
}

std::vector<std::string> observable_names() {
  return {"one",         "norm-sq",    "vnorm-sq",    "anorm-sq",
          "exp-neg-norm-sq", "coord-0", "cos-coord-0", "sin-coord-1",
          "cos-sum-01"};
}

double observable_ck_witness(const Observable& phi,
                             const std::vector<SpectralField>& samples) {
  double worst = 0.0;
  for (const auto& x : samples) {
    const double denom = phi.bound * std::pow(1.0 + sobolev_norm(x, 1.0), phi.k);
    worst = std::max(worst, std::abs(phi(x)) / denom);
  }
  return worst;
}

double observable_e_witness(const Observable& phi,
                            const std::vector<SpectralField>& samples) {
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < samples.size(); i += 2) {
    const SpectralField& x1 = samples[i];
    const SpectralField& x2 = samples[i + 1];
    const double a1 = sobolev_norm(x1, 1.0);
    const double a2 = sobolev_norm(x2, 1.0);
    const double da = sobolev_norm(x2 - x1, 1.0);
    if (da == 0.0) continue;
    const double denom = phi.bound * da * (1.0 + a1 * a1 + a2 * a2);
    worst = std::max(worst, std::abs(phi(x2) - phi(x1)) / denom);
  }
  return worst;
}

McEstimate estimate_semigroup(const Observable& phi, double t, const SpectralField& x,
                              const SimConfig& cfg, std::size_t n_samples) {
  return estimate_feynman_kac(phi, 0.0, t, x, cfg, n_samples);
}

McEstimate estimate_feynman_kac(const Observable& phi, double k_damp, double t,
                                const SpectralField& x, const SimConfig& cfg,
                                std::size_t n_samples) {
  require_probability_inputs(cfg, t, n_samples);
  if (k_damp < 0.0) throw std::invalid_argument("estimate_feynman_kac: K must be >= 0");
  const SpectralField x0 = project(x, cfg.space);
  const std::size_t steps = cfg.steps_for(t);

  if (steps == 0) {
    McEstimate est;
    est.value = phi(x0);
    est.stderr_ = 0.0;
    est.samples = static_cast<std::int64_t>(n_samples);
    est.seed = cfg.seed;
    return est;
  }

  ReplicaValues out(n_samples);
  parallel_for_with_state(
      n_samples, cfg.workers, [&] { return std::make_shared<WorkerState>(cfg); },
      [&](std::shared_ptr<WorkerState>& st, std::size_t replica) {
        st->x = x0;
        double cum_a2 = 0.0;
        try {
          for (std::size_t n = 0; n < steps; ++n) {
            GaussianStream gs = step_stream(cfg.seed, replica, n);
            gs.fill(st->xi);
            StepStats stats;
            st->integ.step(st->x, st->xi, nullptr, nullptr, &stats);
            cum_a2 += stats.x_a_sq * cfg.dt;
          }
          const double weight = k_damp == 0.0 ? 1.0 : std::exp(-k_damp * cum_a2);
          out.value[replica] = weight * phi(st->x);
        } catch (const blow_up_error&) {
          out.censored[replica] = 1;
        }
      });
  return out.reduce(cfg.seed);
}

McEstimate estimate_feynman_kac_difference(const Observable& phi, double k_damp,
                                           double t, const SpectralField& xa,
                                           const SpectralField& xb,
                                           const SimConfig& cfg, std::size_t n_samples) {
  require_probability_inputs(cfg, t, n_samples);
  const SpectralField a0 = project(xa, cfg.space);
  const SpectralField b0 = project(xb, cfg.space);
  const std::size_t steps = cfg.steps_for(t);

  ReplicaValues out(n_samples);
  parallel_for_with_state(
      n_samples, cfg.workers, [&] { return std::make_shared<WorkerState>(cfg); },
      [&](std::shared_ptr<WorkerState>& st, std::size_t replica) {
        st->x = a0;
        st->x2 = b0;
        double cum_a = 0.0, cum_b = 0.0;
        try {
          for (std::size_t n = 0; n < steps; ++n) {
            GaussianStream gs = step_stream(cfg.seed, replica, n);
            gs.fill(st->xi);
            StepStats stats;
            st->integ.step(st->x, st->xi, nullptr, nullptr, &stats);
            cum_a += stats.x_a_sq * cfg.dt;
            st->integ.step(st->x2, st->xi, nullptr, nullptr, &stats);
            cum_b += stats.x_a_sq * cfg.dt;
          }
          const double wa = k_damp == 0.0 ? 1.0 : std::exp(-k_damp * cum_a);
          const double wb = k_damp == 0.0 ? 1.0 : std::exp(-k_damp * cum_b);
          out.value[replica] = wb * phi(st->x2) - wa * phi(st->x);
        } catch (const blow_up_error&) {
          out.censored[replica] = 1;
        }
      });
  return out.reduce(cfg.seed);
}

McEstimate estimate_bel_gradient(const Observable& phi, double k_damp, double t,
                                 const SpectralField& x, const SpectralField& h,
                                 const SimConfig& cfg, std::size_t n_samples) {
  require_probability_inputs(cfg, t, n_samples);
  if (!(t > 0.0)) throw std::invalid_argument("estimate_bel_gradient: t must be positive");
  if (!cfg.noise) {
    throw degenerate_noise_error("estimate_bel_gradient: noise operator required");
  }
  const SpectralField x0 = project(x, cfg.space);
  const SpectralField h0 = project(h, cfg.space);
  const std::size_t steps = cfg.steps_for(t);

  ReplicaValues out(n_samples);
  parallel_for_with_state(
      n_samples, cfg.workers, [&] { return std::make_shared<WorkerState>(cfg); },
      [&](std::shared_ptr<WorkerState>& st, std::size_t replica) {
        st->x = x0;
        st->eta = h0;
        double cum_a2 = 0.0;
        double stoch = 0.0;   // int (Phi^{-1}(X) eta, dW)
        double j0 = 0.0;      // int (AX, A eta) ds
        double j1 = 0.0;      // int s (AX, A eta) ds
        Integrator::StepOptions opts;
        opts.with_inverse = true;
        try {
          for (std::size_t n = 0; n < steps; ++n) {
            GaussianStream gs = step_stream(cfg.seed, replica, n);
            gs.fill(st->xi);
            StepStats stats;
            st->integ.step(st->x, st->xi, &st->eta, nullptr, &stats, opts);
            cum_a2 += stats.x_a_sq * cfg.dt;
            stoch += stats.inv_eta_dot_dw;
            j0 += stats.ax_aeta * cfg.dt;
            j1 += static_cast<double>(n) * cfg.dt * stats.ax_aeta * cfg.dt;
          }
          const double weight = k_damp == 0.0 ? 1.0 : std::exp(-k_damp * cum_a2);
          const double phi_t = phi(st->x);
          out.value[replica] = weight * phi_t * (stoch / t) -
                               2.0 * k_damp * weight * phi_t * (j0 - j1 / t);
        } catch (const blow_up_error&) {
          out.censored[replica] = 1;
        }
      });
  return out.reduce(cfg.seed);
}

std::vector<McEstimate> estimate_bel_gradient_curve(const Observable& phi, double k_damp,
                                                    const std::vector<double>& t_grid,
                                                    const SpectralField& x,
                                                    const SpectralField& h,
                                                    const SimConfig& cfg,
                                                    std::size_t n_samples) {
  if (t_grid.empty()) {
    throw std::invalid_argument("estimate_bel_gradient_curve: empty time grid");
  }
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > 0.0) || (i > 0 && t_grid[i] <= t_grid[i - 1])) {
      throw std::invalid_argument(
          "estimate_bel_gradient_curve: grid must be positive and increasing");
    }
  }
  require_probability_inputs(cfg, t_grid.back(), n_samples);
  if (!cfg.noise) {
    throw degenerate_noise_error("estimate_bel_gradient_curve: noise operator required");
  }
  const SpectralField x0 = project(x, cfg.space);
  const SpectralField h0 = project(h, cfg.space);

  std::vector<std::size_t> grid_steps(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    grid_steps[i] = cfg.steps_for(t_grid[i]);
  }
  const std::size_t total = grid_steps.back();

  std::vector<ReplicaValues> out(t_grid.size(), ReplicaValues(n_samples));
  parallel_for_with_state(
      n_samples, cfg.workers, [&] { return std::make_shared<WorkerState>(cfg); },
      [&](std::shared_ptr<WorkerState>& st, std::size_t replica) {
        st->x = x0;
        st->eta = h0;
        double cum_a2 = 0.0, stoch = 0.0, j0 = 0.0, j1 = 0.0;
        Integrator::StepOptions opts;
        opts.with_inverse = true;
        std::size_t next = 0;
        try {
          for (std::size_t n = 0; n < total; ++n) {
            GaussianStream gs = step_stream(cfg.seed, replica, n);
            gs.fill(st->xi);
            StepStats stats;
            st->integ.step(st->x, st->xi, &st->eta, nullptr, &stats, opts);
            cum_a2 += stats.x_a_sq * cfg.dt;
            stoch += stats.inv_eta_dot_dw;
            j0 += stats.ax_aeta * cfg.dt;
            j1 += static_cast<double>(n) * cfg.dt * stats.ax_aeta * cfg.dt;
            while (next < grid_steps.size() && grid_steps[next] == n + 1) {
              const double t = t_grid[next];
              const double weight =
                  k_damp == 0.0 ? 1.0 : std::exp(-k_damp * cum_a2);
              const double phi_t = phi(st->x);
              out[next].value[replica] =
                  weight * phi_t * (stoch / t) -
                  2.0 * k_damp * weight * phi_t * (j0 - j1 / t);
              ++next;
            }
          }
        } catch (const blow_up_error&) {
          for (std::size_t i = next; i < grid_steps.size(); ++i) {
            out[i].censored[replica] = 1;
          }
        }
      });

  std::vector<McEstimate> estimates;
  estimates.reserve(t_grid.size());
  for (const auto& rv : out) estimates.push_back(rv.reduce(cfg.seed));
  return estimates;
}

namespace {

// Inner plain-semigroup mean from a fixed start, used by the nested
// estimators. Streams live in their own namespace derived from (seed, tag).
double inner_semigroup_mean(WorkerState& st,
                            const Observable& phi, const SpectralField& y,
                            std::size_t steps, std::uint64_t inner_seed,
                            std::uint64_t block, std::size_t n_inner,
                            std::size_t& censored) {
  double sum = 0.0;
  std::size_t alive = 0;
  for (std::size_t l = 0; l < n_inner; ++l) {
    st.x2 = y;
    try {
      for (std::size_t n = 0; n < steps; ++n) {
        GaussianStream gs = step_stream(inner_seed, block * n_inner + l, n);
        gs.fill(st.xi);
        st.integ.step(st.x2, st.xi, nullptr, nullptr, nullptr);
      }
      sum += phi(st.x2);
      ++alive;
    } catch (const blow_up_error&) {
      ++censored;
    }
  }
  return alive == 0 ? 0.0 : sum / static_cast<double>(alive);
}

constexpr std::uint64_t kInnerTag = 0x6e657374ULL;  // stream namespace for inner chains

}  // namespace

McEstimate estimate_nested_semigroup(const Observable& phi, double s, double t,
                                     const SpectralField& x, const SimConfig& cfg,
                                     std::size_t n_outer, std::size_t n_inner) {
  require_probability_inputs(cfg, s + t, n_outer);
  const SpectralField x0 = project(x, cfg.space);
  const std::size_t steps_s = cfg.steps_for(s);
  const std::size_t steps_t = cfg.steps_for(t);
  std::uint64_t sm = cfg.seed ^ kInnerTag;
  const std::uint64_t inner_seed = splitmix64(sm);

  ReplicaValues out(n_outer);
  std::vector<double> censored_inner(n_outer, 0.0);
  parallel_for_with_state(
      n_outer, cfg.workers, [&] { return std::make_shared<WorkerState>(cfg); },
      [&](std::shared_ptr<WorkerState>& st, std::size_t replica) {
        st->x = x0;
        try {
          for (std::size_t n = 0; n < steps_s; ++n) {
            GaussianStream gs = step_stream(cfg.seed, replica, n);
            gs.fill(st->xi);
            st->integ.step(st->x, st->xi, nullptr, nullptr, nullptr);
          }
          std::size_t bad = 0;
          const SpectralField y = st->x;
          out.value[replica] = inner_semigroup_mean(*st, phi, y, steps_t,
                                                    inner_seed, replica, n_inner, bad);
          censored_inner[replica] = static_cast<double>(bad);
        } catch (const blow_up_error&) {
          out.censored[replica] = 1;
        }
      });
  McEstimate est = out.reduce(cfg.seed);
  est.censored += static_cast<std::int64_t>(pairwise_sum(censored_inner));
  return est;
}

FactorizationCheck markov_factorization_check(const Observable& f0, const Observable& f1,
                                              const Observable& f2, double t1, double t2,
                                              const SpectralField& x, const SimConfig& cfg,
                                              std::size_t n_direct, std::size_t n_outer,
                                              std::size_t n_inner) {
  const SpectralField x0 = project(x, cfg.space);
  const double f0x = f0(x0);
  const std::size_t steps_1 = cfg.steps_for(t1);
  const std::size_t steps_2 = cfg.steps_for(t2);

  // Direct side: one chain through both times.
  ReplicaValues direct(n_direct);
  parallel_for_with_state(
      n_direct, cfg.workers, [&] { return std::make_shared<WorkerState>(cfg); },
      [&](std::shared_ptr<WorkerState>& st, std::size_t replica) {
        st->x = x0;
        try {
          for (std::size_t n = 0; n < steps_1; ++n) {
            GaussianStream gs = step_stream(cfg.seed, replica, n);
            gs.fill(st->xi);
            st->integ.step(st->x, st->xi, nullptr, nullptr, nullptr);
          }
          const double f1v = f1(st->x);
          for (std::size_t n = steps_1; n < steps_1 + steps_2; ++n) {
            GaussianStream gs = step_stream(cfg.seed, replica, n);
            gs.fill(st->xi);
            st->integ.step(st->x, st->xi, nullptr, nullptr, nullptr);
          }
          direct.value[replica] = f0x * f1v * f2(st->x);
        } catch (const blow_up_error&) {
          direct.censored[replica] = 1;
        }
      });

  // Factored side: P_{t1}[ f1 * P_{t2} f2 ](x) with fresh inner chains.
  std::uint64_t sm = cfg.seed ^ kInnerTag;
  const std::uint64_t inner_seed = splitmix64(sm);
  ReplicaValues factored(n_outer);
  parallel_for_with_state(
      n_outer, cfg.workers, [&] { return std::make_shared<WorkerState>(cfg); },
      [&](std::shared_ptr<WorkerState>& st, std::size_t replica) {
        st->x = x0;
        try {
          for (std::size_t n = 0; n < steps_1; ++n) {
            GaussianStream gs = step_stream(cfg.seed ^ 0x8d, replica, n);
            gs.fill(st->xi);
            st->integ.step(st->x, st->xi, nullptr, nullptr, nullptr);
          }
          std::size_t bad = 0;
          const SpectralField y = st->x;
          const double inner =
              inner_semigroup_mean(*st, f2, y, steps_2, inner_seed, replica,
                                   n_inner, bad);
          factored.value[replica] = f0x * f1(y) * inner;
        } catch (const blow_up_error&) {
          factored.censored[replica] = 1;
        }
      });

  FactorizationCheck check;
  check.direct = direct.reduce(cfg.seed);
  check.factored = factored.reduce(cfg.seed);
  check.residual = check.direct.value - check.factored.value;
  check.combined_se = std::sqrt(check.direct.stderr_ * check.direct.stderr_ +
                                check.factored.stderr_ * check.factored.stderr_);
  return check;
}

VocReport check_variation_of_constants(const Observable& phi, double k_damp, double t,
                                       const SpectralField& x, const SimConfig& cfg,
                                       std::size_t n_outer, std::size_t n_inner,
                                       std::size_t step_budget) {
  if (!(t > 0.0)) throw std::invalid_argument("check_variation_of_constants: t > 0 required");
  const SpectralField x0 = project(x, cfg.space);
  const std::size_t steps_t = cfg.steps_for(t);
  const std::size_t n_left = 4 * n_outer;

  // Node times and snapped step counts.
  std::array<double, kGlNodes> s_node{}, w_node{};
  std::array<std::size_t, kGlNodes> steps_inner{}, steps_outer{};
  std::size_t inner_cost = 0;
  for (std::size_t j = 0; j < kGlNodes; ++j) {
    s_node[j] = 0.5 * t * (kGlX[j] + 1.0);
    w_node[j] = 0.5 * t * kGlW[j];
    steps_inner[j] = static_cast<std::size_t>(std::llround(s_node[j] / cfg.dt));
    steps_outer[j] = steps_t - steps_inner[j];
    inner_cost += steps_inner[j];
  }
  const std::size_t budget_needed =
      n_left * steps_t +
      (k_damp == 0.0 ? 0 : n_outer * (steps_t + n_inner * inner_cost));
  if (budget_needed > step_budget) {
    throw resource_limit_error("check_variation_of_constants: nested budget exceeded (" +
                               std::to_string(budget_needed) + " steps needed)");
  }

  // Left side and Feynman-Kac term share paths, so their difference is
  // estimated pathwise and K = 0 gives an exactly zero residual.
  std::vector<double> u_vals(n_left, 0.0), diff_vals(n_left, 0.0), fk_vals(n_left, 0.0);
  std::vector<char> dead(n_left, 0);
  parallel_for_with_state(
      n_left, cfg.workers, [&] { return std::make_shared<WorkerState>(cfg); },
      [&](std::shared_ptr<WorkerState>& st, std::size_t replica) {
        st->x = x0;
        double cum = 0.0;
        try {
          for (std::size_t n = 0; n < steps_t; ++n) {
            GaussianStream gs = step_stream(cfg.seed, replica, n);
            gs.fill(st->xi);
            StepStats stats;
            st->integ.step(st->x, st->xi, nullptr, nullptr, &stats);
            cum += stats.x_a_sq * cfg.dt;
          }
          const double p = phi(st->x);
          const double w = k_damp == 0.0 ? 1.0 : std::exp(-k_damp * cum);
          u_vals[replica] = p;
          fk_vals[replica] = w * p;
          diff_vals[replica] = (1.0 - w) * p;
        } catch (const blow_up_error&) {
          dead[replica] = 1;
        }
      });

  auto alive_of = [&](const std::vector<double>& vals) {
    std::vector<double> alive;
    alive.reserve(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (!dead[i]) alive.push_back(vals[i]);
    }
    return alive;
  };
  const MeanStderr u_ms = mean_stderr(alive_of(u_vals));
  const MeanStderr fk_ms = mean_stderr(alive_of(fk_vals));
  const MeanStderr diff_ms = mean_stderr(alive_of(diff_vals));

  VocReport report;
  report.left = u_ms.mean;
  report.left_se = u_ms.se;
  report.fk_term = fk_ms.mean;
  report.k_damp = k_damp;
  report.nodes = kGlNodes;

  MeanStderr quad_ms;
  if (k_damp > 0.0) {
    // Shared outer paths: one trajectory to t per replica, with the damped
    // weight and endpoint captured at every node time t - s_j.
    std::uint64_t sm = cfg.seed ^ kInnerTag;
    const std::uint64_t inner_seed = splitmix64(sm);
    std::vector<double> q_vals(n_outer, 0.0);
    std::vector<char> q_dead(n_outer, 0);
    parallel_for_with_state(
        n_outer, cfg.workers, [&] { return std::make_shared<WorkerState>(cfg); },
        [&](std::shared_ptr<WorkerState>& st, std::size_t replica) {
          st->x = x0;
          double cum = 0.0;
          std::vector<SpectralField> snapshots;
          std::vector<double> weights, anorm_sq;
          snapshots.reserve(kGlNodes);
          try {
            // Capture snapshots in increasing outer-step order
            // (steps_outer is decreasing in the node index).
            std::size_t capture = 0;
            std::vector<std::size_t> capture_steps(kGlNodes);
            for (std::size_t j = 0; j < kGlNodes; ++j) {
              capture_steps[j] = steps_outer[kGlNodes - 1 - j];
            }
            snapshots.resize(kGlNodes, SpectralField(cfg.space));
            weights.resize(kGlNodes, 0.0);
            anorm_sq.resize(kGlNodes, 0.0);
            for (std::size_t n = 0; n <= steps_t; ++n) {
              while (capture < kGlNodes && capture_steps[capture] == n) {
                snapshots[capture] = st->x;
                weights[capture] = k_damp == 0.0 ? 1.0 : std::exp(-k_damp * cum);
                anorm_sq[capture] = st->integ.graph_norm(st->x);
                anorm_sq[capture] *= anorm_sq[capture];
                ++capture;
              }
              if (n == steps_t) break;
              GaussianStream gs = step_stream(cfg.seed ^ 0xf00d, replica, n);
              gs.fill(st->xi);
              StepStats stats;
              st->integ.step(st->x, st->xi, nullptr, nullptr, &stats);
              cum += stats.x_a_sq * cfg.dt;
            }
            double q = 0.0;
            for (std::size_t cap = 0; cap < kGlNodes; ++cap) {
              const std::size_t j = kGlNodes - 1 - cap;  // node with these outer steps
              std::size_t bad = 0;
              const double inner = inner_semigroup_mean(
                  *st, phi, snapshots[cap], steps_inner[j], inner_seed,
                  replica * kGlNodes + j, n_inner, bad);
              q += w_node[j] * weights[cap] * anorm_sq[cap] * inner;
            }
            q_vals[replica] = q;
          } catch (const blow_up_error&) {
            q_dead[replica] = 1;
          }
        });
    std::vector<double> q_alive;
    for (std::size_t i = 0; i < n_outer; ++i) {
      if (!q_dead[i]) q_alive.push_back(q_vals[i]);
    }
    quad_ms = mean_stderr(q_alive);
  }

  report.quadrature_term = quad_ms.mean;
  report.right = report.fk_term + k_damp * quad_ms.mean;
  report.right_se = std::sqrt(fk_ms.se * fk_ms.se +
                              k_damp * k_damp * quad_ms.se * quad_ms.se);
  report.residual = diff_ms.mean - k_damp * quad_ms.mean;
  report.combined_se = std::sqrt(diff_ms.se * diff_ms.se +
                                 k_damp * k_damp * quad_ms.se * quad_ms.se);
  return report;
}

}  // namespace spde
