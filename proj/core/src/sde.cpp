#include "spde/sde.hpp"

#include <cmath>
#include <stdexcept>

#include "spde/errors.hpp"
#include "spde/rng.hpp"

namespace spde {

std::size_t SimConfig::steps() const { return steps_for(T); }

std::size_t SimConfig::steps_for(double t) const {
  const double raw = t / dt;
  const auto n = static_cast<std::size_t>(std::llround(raw));
  if (std::abs(raw - static_cast<double>(n)) > 1e-6 * std::max(1.0, raw)) {
    throw std::invalid_argument("SimConfig: horizon is not an integral number of steps");
  }
  return n;
}

void SimConfig::validate() const {
  if (!space) throw std::invalid_argument("SimConfig: space is required");
  if (!(dt > 0.0)) throw std::invalid_argument("SimConfig: dt must be positive");
  if (T < 0.0) throw std::invalid_argument("SimConfig: T must be nonnegative");
  (void)steps();
  if (forcing) {
    if (forcing->space()->cutoff() != space->cutoff()) {
      throw std::invalid_argument("SimConfig: forcing lives on a different space");
    }
    check_field_invariants(*forcing);
  }
  if (noise && noise->space()->cutoff() != space->cutoff()) {
    throw std::invalid_argument("SimConfig: noise operator lives on a different space");
  }
}

ForcingPath ForcingPath::zero() { return ForcingPath{}; }

ForcingPath ForcingPath::constant(SpectralField f) {
  ForcingPath p;
  p.samples_.push_back(std::move(f));
  p.constant_ = true;
  return p;
}

ForcingPath ForcingPath::sampled(std::vector<SpectralField> per_step, double dt) {
  ForcingPath p;
  p.samples_ = std::move(per_step);
  p.dt_ = dt;
  return p;
}

const SpectralField* ForcingPath::at_step(std::size_t n) const {
  if (samples_.empty()) return nullptr;
  if (constant_) return &samples_.front();
  if (n >= samples_.size()) return nullptr;
  return &samples_[n];
}

Integrator::Integrator(const SimConfig& cfg)
    : cfg_(cfg),
      dim_(cfg.space->dim()),
      sqrt_dt_(std::sqrt(cfg.dt)),
      ws_(cfg.space),
      drift_(cfg.space),
      noise_f_(cfg.space),
      eta_drift_(cfg.space),
      eta_noise_f_(cfg.space) {
  cfg_.validate();
  const GalerkinSpace& space = *cfg_.space;
  resolve_factor_.resize(space.mode_count());
  mu_sq_.resize(space.mode_count());
  for (std::size_t m = 0; m < space.mode_count(); ++m) {
    const double mu = space.eigenvalue(m);
    resolve_factor_[m] = 1.0 / (1.0 + mu * cfg_.dt);
    mu_sq_[m] = mu * mu;
  }
  bmu_.resize(dim_);
  bmu_sq_.resize(dim_);
  w_gamma_.resize(dim_);
  w_gamma_p_.resize(dim_);
  const double g = cfg_.variation_gamma;
  for (int n = 0; n < dim_; ++n) {
    const double mu = space.basis_eigenvalue(n);
    bmu_[n] = mu;
    bmu_sq_[n] = mu * mu;
    w_gamma_[n] = std::pow(mu, 2.0 * g);
    w_gamma_p_[n] = std::pow(mu, 2.0 * g + 1.0);
  }
  xc_.resize(dim_);
  ec_.resize(dim_);
  noise_c_.resize(dim_);
  eta_noise_c_.resize(dim_);
  inv_c_.resize(dim_);
}

void Integrator::resolve_in_place(SpectralField& f) const {
  auto raw = f.raw();
  for (std::size_t m = 0; m < resolve_factor_.size(); ++m) {
    const double r = resolve_factor_[m];
    raw[3 * m] *= r;
    raw[3 * m + 1] *= r;
    raw[3 * m + 2] *= r;
  }
}

double Integrator::graph_norm(const SpectralField& x) const {
  auto raw = x.raw();
  double sum = 0.0;
  for (std::size_t m = 0; m < mu_sq_.size(); ++m) {
    sum += mu_sq_[m] * (std::norm(raw[3 * m]) + std::norm(raw[3 * m + 1]) +
                        std::norm(raw[3 * m + 2]));
  }
  return std::sqrt(sum);
}

void Integrator::core_step(SpectralField& x, std::span<const double> xi,
                           SpectralField* eta, SpectralField* z, StepStats* stats,
                           const StepOptions& opts,
                           const SpectralField* forcing_override, bool use_override) {
  const GalerkinSpace& space = *cfg_.space;
  const double dt = cfg_.dt;

  space.to_coords(x, xc_);
  if (eta) space.to_coords(*eta, ec_);

  if (stats) {
    *stats = StepStats{};
    for (int n = 0; n < dim_; ++n) {
      const double c = xc_[n];
      stats->x_h_sq += c * c;
      stats->x_v_sq += bmu_[n] * c * c;
      stats->x_a_sq += bmu_sq_[n] * c * c;
    }
    if (eta) {
      for (int n = 0; n < dim_; ++n) {
        const double e = ec_[n];
        stats->eta_g_sq += w_gamma_[n] * e * e;
        stats->eta_gp_sq += w_gamma_p_[n] * e * e;
        stats->eta_a_sq += bmu_sq_[n] * e * e;
        stats->ax_aeta += bmu_sq_[n] * xc_[n] * e;
      }
    }
  }

  const bool stochastic = cfg_.noise && !xi.empty();
  if (stochastic) {
    const bool diagonal = cfg_.noise->is_diagonal();
    if (diagonal) {
      cfg_.noise->prepare_state(xc_, diag_scratch_);
      cfg_.noise->apply_prepared(diag_scratch_, xi, noise_c_);
    } else {
      cfg_.noise->apply_coords(xc_, xi, noise_c_);
    }
    for (int n = 0; n < dim_; ++n) noise_c_[n] *= sqrt_dt_;
    space.from_coords(noise_c_, noise_f_);

    if (eta) {
      if (opts.with_inverse && stats) {
        if (diagonal) {
          cfg_.noise->inverse_prepared(diag_scratch_, ec_, inv_c_);
        } else {
          cfg_.noise->inverse_apply_coords(xc_, ec_, inv_c_);
        }
        double dot = 0.0;
        for (int n = 0; n < dim_; ++n) dot += inv_c_[n] * xi[n];
        stats->inv_eta_dot_dw = dot * sqrt_dt_;
      }
      if (diagonal) {
        cfg_.noise->derivative_prepared(diag_scratch_, ec_, xi, eta_noise_c_);
      } else {
        cfg_.noise->derivative_apply_coords(xc_, ec_, xi, eta_noise_c_);
      }
      for (int n = 0; n < dim_; ++n) eta_noise_c_[n] *= sqrt_dt_;
      space.from_coords(eta_noise_c_, eta_noise_f_);
    }
  }

  // eta drift must see the pre-step x, so advance eta first.
  if (eta) {
    if (cfg_.enable_bilinear) {
      bilinear_first_variation_into(x, *eta, ws_, eta_drift_);
      eta->axpy(dt, eta_drift_);
    }
    if (stochastic) *eta += eta_noise_f_;
    resolve_in_place(*eta);
  }

  if (z && stochastic) {
    *z += noise_f_;
    resolve_in_place(*z);
  } else if (z) {
    resolve_in_place(*z);
  }

  if (cfg_.enable_bilinear) {
    bilinear_into(x, x, ws_, drift_);
    x.axpy(dt, drift_);
  }
  const SpectralField* f = use_override ? forcing_override
                                        : (cfg_.forcing ? &*cfg_.forcing : nullptr);
  if (f) x.axpy(dt, *f);
  if (stochastic) x += noise_f_;
  resolve_in_place(x);

  ++steps_taken_;
  const double ga = graph_norm(x);
  if (!(ga <= cfg_.guard)) {
    throw blow_up_error(steps_taken_, static_cast<double>(steps_taken_) * dt, ga);
  }
}

void Integrator::step(SpectralField& x, std::span<const double> xi, SpectralField* eta,
                      SpectralField* z, StepStats* stats, const StepOptions& opts) {
  core_step(x, xi, eta, z, stats, opts, nullptr, false);
}

void Integrator::step(SpectralField& x, std::span<const double> xi, SpectralField* eta,
                      SpectralField* z, StepStats* stats) {
  core_step(x, xi, eta, z, stats, StepOptions{}, nullptr, false);
}

void Integrator::step_deterministic(SpectralField& x, const SpectralField* forcing,
                                    StepStats* stats) {
  core_step(x, {}, nullptr, nullptr, stats, StepOptions{}, forcing, true);
}

namespace {

struct RecordingPlan {
  std::size_t store_stride;
  std::size_t ledger_stride;

  bool store_at(std::size_t n, std::size_t total) const {
    if (n == 0 || n == total) return true;
    return store_stride != 0 && n % store_stride == 0;
  }
  bool ledger_at(std::size_t n, std::size_t total) const {
    if (n == 0 || n == total) return true;
    return ledger_stride != 0 && n % ledger_stride == 0;
  }
};

void push_ledger_row(Trajectory& traj, const SimConfig& cfg, double time,
                     const SpectralField& x, const SpectralField* eta,
                     const SpectralField* z, double cum_a2) {
  auto& led = traj.ledger;
  led.t.push_back(time);
  led.x_h.push_back(sobolev_norm(x, 0.0));
  led.x_v.push_back(sobolev_norm(x, 0.5));
  led.x_a.push_back(sobolev_norm(x, 1.0));
  led.cum_a2.push_back(cum_a2);
  if (z) led.z_a.push_back(sobolev_norm(*z, 1.0));
  if (eta) {
    led.eta_g.push_back(sobolev_norm(*eta, cfg.variation_gamma));
    led.eta_gp.push_back(sobolev_norm(*eta, cfg.variation_gamma + 0.5));
  }
}

Trajectory run_trajectory(const SpectralField& x0, const SpectralField* h,
                          const SimConfig& cfg, std::uint64_t replica,
                          const std::vector<std::vector<double>>* replay_increments,
                          const ForcingPath* forcing_override, double horizon) {
  cfg.validate();
  const std::size_t total = cfg.steps_for(horizon);
  const bool deterministic = forcing_override != nullptr;

  Trajectory traj;
  traj.dt = cfg.dt;
  traj.steps = total;
  traj.seed = cfg.seed;
  traj.replica = replica;
  traj.cutoff = cfg.space->cutoff();
  traj.variation_gamma = cfg.variation_gamma;

  Integrator integ(cfg);
  SpectralField x = project(x0, cfg.space);
  SpectralField eta_storage(cfg.space);
  SpectralField* eta = nullptr;
  if (h) {
    eta_storage = project(*h, cfg.space);
    eta = &eta_storage;
  }
  SpectralField z_storage(cfg.space);
  SpectralField* z = (cfg.with_convolution && !deterministic) ? &z_storage : nullptr;

  const RecordingPlan plan{cfg.store_stride, cfg.ledger_stride};
  const bool record_inc = cfg.record_increments && !deterministic;

  std::vector<double> xi(cfg.space->dim());
  double cum_a2 = 0.0;

  auto store_state = [&](std::size_t n) {
    traj.times.push_back(static_cast<double>(n) * cfg.dt);
    traj.states.push_back(x);
    if (eta) traj.variation.push_back(*eta);
    if (z) traj.convolution.push_back(*z);
  };

  if (plan.store_at(0, total)) store_state(0);
  if (plan.ledger_at(0, total)) push_ledger_row(traj, cfg, 0.0, x, eta, z, cum_a2);

  for (std::size_t n = 0; n < total; ++n) {
    StepStats stats;
    if (deterministic) {
      integ.step_deterministic(x, forcing_override->at_step(n), &stats);
    } else {
      if (replay_increments) {
        const auto& rec = (*replay_increments)[n];
        std::copy(rec.begin(), rec.end(), xi.begin());
      } else if (cfg.noise) {
        GaussianStream gs = step_stream(cfg.seed, replica, n);
        gs.fill(xi);
      } else {
        std::fill(xi.begin(), xi.end(), 0.0);
      }
      if (record_inc) traj.increments.push_back(xi);
      integ.step(x, xi, eta, z, &stats);
    }
    cum_a2 += stats.x_a_sq * cfg.dt;

    const std::size_t row = n + 1;
    if (plan.store_at(row, total)) store_state(row);
    if (plan.ledger_at(row, total)) {
      push_ledger_row(traj, cfg, static_cast<double>(row) * cfg.dt, x, eta, z, cum_a2);
    }
  }
  return traj;
}

}  // namespace

Trajectory simulate(const SpectralField& x0, const SimConfig& cfg, std::uint64_t replica) {
  return run_trajectory(x0, nullptr, cfg, replica, nullptr, nullptr, cfg.T);
}

Trajectory simulate_with_variation(const SpectralField& x0, const SpectralField& h,
                                   const SimConfig& cfg, std::uint64_t replica) {
  return run_trajectory(x0, &h, cfg, replica, nullptr, nullptr, cfg.T);
}

Trajectory deterministic_solve(const SpectralField& x0, const ForcingPath& forcing,
                               double horizon, const SimConfig& cfg) {
  return run_trajectory(x0, nullptr, cfg, 0, nullptr, &forcing, horizon);
}

Trajectory replay(const Trajectory& traj, const SimConfig& cfg,
                  const SpectralField* x0_override) {
  if (traj.increments.size() != traj.steps) {
    throw std::invalid_argument("replay: trajectory carries no complete increment record");
  }
  if (traj.cutoff != cfg.space->cutoff() || std::abs(traj.dt - cfg.dt) > 1e-15) {
    throw std::invalid_argument("replay: grid mismatch between trajectory and config");
  }
  if (!traj.increments.empty() &&
      traj.increments.front().size() != static_cast<std::size_t>(cfg.space->dim())) {
    throw std::invalid_argument("replay: increment dimension mismatch");
  }
  const SpectralField& x0 = x0_override ? *x0_override : traj.initial();
  const double horizon = static_cast<double>(traj.steps) * traj.dt;
  return run_trajectory(x0, nullptr, cfg, traj.replica, &traj.increments, nullptr,
                        horizon);
}

}  // namespace spde
