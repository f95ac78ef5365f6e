#include "spde/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>

#include "spde/errors.hpp"
#include "spde/parallel.hpp"
#include "spde/rng.hpp"

namespace spde {

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Welford accumulation over paths, one slot per ledger row.
struct RowStats {
  std::vector<double> mean;
  std::vector<double> m2;
  std::size_t count = 0;

  void init(std::size_t rows) {
    mean.assign(rows, 0.0);
    m2.assign(rows, 0.0);
    count = 0;
  }
  void add(const std::vector<double>& row_values) {
    ++count;
    for (std::size_t i = 0; i < row_values.size(); ++i) {
      const double d = row_values[i] - mean[i];
      mean[i] += d / static_cast<double>(count);
      m2[i] += d * (row_values[i] - mean[i]);
    }
  }
  double se(std::size_t i) const {
    if (count < 2) return 0.0;
    return std::sqrt(m2[i] / static_cast<double>(count - 1) /
                     static_cast<double>(count));
  }
};

}  // namespace

SpectralField heat_semigroup(const SpectralField& x, double t) {
  SpectralField out = x;
  const GalerkinSpace& space = *x.space();
  for (std::size_t m = 0; m < space.mode_count(); ++m) {
    const double factor = std::exp(-space.eigenvalue(m) * t);
    out.at(m, 0) *= factor;
    out.at(m, 1) *= factor;
    out.at(m, 2) *= factor;
  }
  return out;
}

EstimateReport check_pathwise_energy(const std::vector<Trajectory>& paths,
                                     const std::vector<double>& c_grid) {
  if (paths.empty()) throw std::invalid_argument("check_pathwise_energy: no paths");
  for (const auto& traj : paths) {
    if (traj.ledger.z_a.empty()) {
      throw std::invalid_argument(
          "check_pathwise_energy: paths must carry a co-integrated Z ledger");
    }
  }

  EstimateReport report;
  report.name = "pathwise-energy";
  report.samples = paths.size();

  double best_c = 0.0, best_margin = 0.0;
  bool found = false;
  for (double c : c_grid) {
    double margin = std::numeric_limits<double>::infinity();
    bool ok = true;
    for (const auto& traj : paths) {
      const auto& led = traj.ledger;
      const double ax0_sq = led.x_a.front() * led.x_a.front();
      double sup_z_sq = 0.0;
      for (double za : led.z_a) sup_z_sq = std::max(sup_z_sq, za * za);
      const double rhs = 2.0 * ax0_sq + c * sup_z_sq;
      for (std::size_t i = 0; i < led.t.size(); ++i) {
        const double lhs = std::exp(-c * led.cum_a2[i]) * led.x_a[i] * led.x_a[i];
        margin = std::min(margin, rhs - lhs);
        if (lhs > rhs) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
    }
    report.add("margin@c=" + format_double(c), margin);
    if (ok && !found) {
      found = true;
      best_c = c;
      best_margin = margin;
    }
  }
  report.pass = found;
  report.margin = found ? best_margin : -1.0;
  if (found) report.add("c", best_c);
  report.details = found ? "smallest passing c = " + format_double(best_c)
                         : "no grid value passes";
  return report;
}

EstimateReport check_variation_bound(const std::vector<Trajectory>& pairs, double gamma,
                                     const std::vector<double>& c_grid) {
  if (pairs.empty()) throw std::invalid_argument("check_variation_bound: no paths");
  for (const auto& traj : pairs) {
    if (traj.ledger.eta_g.empty()) {
      throw std::invalid_argument("check_variation_bound: paths carry no variation ledger");
    }
    if (std::abs(traj.variation_gamma - gamma) > 1e-12) {
      throw std::invalid_argument(
          "check_variation_bound: trajectory ledger recorded at a different gamma");
    }
  }

  EstimateReport report;
  report.name = "variation-bound";
  report.samples = pairs.size();

  const std::size_t rows = pairs.front().ledger.t.size();
  const double h_g_sq = pairs.front().ledger.eta_g.front() *
                        pairs.front().ledger.eta_g.front();

  double best_c = 0.0, best_margin = 0.0;
  bool found = false;
  std::vector<double> row_values(rows);
  for (double c : c_grid) {
    RowStats stats;
    stats.init(rows);
    for (const auto& traj : pairs) {
      const auto& led = traj.ledger;
      double integral = 0.0;
      double prev_t = led.t.front();
      for (std::size_t i = 0; i < rows; ++i) {
        if (i > 0) {
          const double dt_row = led.t[i] - prev_t;
          // Left-endpoint quadrature of the damped dissipation integral.
          integral += std::exp(-c * led.cum_a2[i - 1]) * led.eta_gp[i - 1] *
                      led.eta_gp[i - 1] * dt_row;
          prev_t = led.t[i];
        }
        row_values[i] =
            std::exp(-c * led.cum_a2[i]) * led.eta_g[i] * led.eta_g[i] + integral;
      }
      stats.add(row_values);
    }
    double margin = std::numeric_limits<double>::infinity();
    bool ok = true;
    const auto& t_rows = pairs.front().ledger.t;
    for (std::size_t i = 0; i < rows; ++i) {
      const double rhs = std::exp(c * t_rows[i]) * h_g_sq;
      const double lhs = stats.mean[i] - 3.0 * stats.se(i);
      margin = std::min(margin, rhs - stats.mean[i]);
      if (lhs > rhs) {
        ok = false;
        break;
      }
    }
    report.add("margin@c=" + format_double(c), margin);
    if (ok && !found) {
      found = true;
      best_c = c;
      best_margin = margin;
    }
  }
  report.pass = found;
  report.margin = found ? best_margin : -1.0;
  if (found) report.add("c_gamma", best_c);
  report.details = found ? "smallest passing c_gamma = " + format_double(best_c)
                         : "no grid value passes";
  return report;
}

EstimateReport check_gradient_scaling(const Observable& phi, double gamma, double k_damp,
                                      const std::vector<double>& t_grid,
                                      std::vector<GradientScalingProbe> probes,
                                      const SimConfig& cfg, std::size_t n_samples) {
  if (!cfg.noise) throw std::invalid_argument("check_gradient_scaling: noise required");
  const auto& decl = cfg.noise->declared();
  if (!(gamma > std::max(decl.delta - 0.5, decl.r - 0.5) && gamma <= 1.0)) {
    throw std::invalid_argument(
        "check_gradient_scaling: gamma outside (max(delta-1/2, r-1/2), 1]");
  }
  if (probes.empty()) throw std::invalid_argument("check_gradient_scaling: no probes");

  for (auto& probe : probes) {
    const double norm = sobolev_norm(probe.direction, gamma);
    if (norm == 0.0) throw std::invalid_argument("check_gradient_scaling: zero direction");
    probe.direction *= 1.0 / norm;
  }

  EstimateReport report;
  report.name = "gradient-scaling";
  report.samples = n_samples;
  report.seed = cfg.seed;

  const double rate = -0.5 - (decl.r - gamma);
  std::vector<double> ratios(t_grid.size(), 0.0);
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const std::vector<McEstimate> curve = estimate_bel_gradient_curve(
        phi, k_damp, t_grid, probes[p].state, probes[p].direction, cfg, n_samples);
    const double state_factor = std::pow(1.0 + sobolev_norm(probes[p].state, 1.0),
                                         phi.k);
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      const double normalizer = state_factor * (1.0 + std::pow(t_grid[i], rate));
      ratios[i] = std::max(ratios[i], std::abs(curve[i].value) / normalizer);
    }
  }
  double sup_ratio = 0.0;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    report.add("ratio@t=" + format_double(t_grid[i]), ratios[i]);
    sup_ratio = std::max(sup_ratio, ratios[i]);
  }
  report.add("C", sup_ratio);
  report.pass = std::isfinite(sup_ratio);
  report.margin = report.pass ? 0.0 : -1.0;
  report.details = "sup normalized ratio = " + format_double(sup_ratio) +
                   " (boundedness witness)";
  return report;
}

namespace {

// Pathwise estimate of u(t1,x) - u(t2,x) with common noise: both readings
// come from the same trajectory.
MeanStderr semigroup_difference(const Observable& phi, double t1, double t2,
                                const SpectralField& x, const SimConfig& cfg,
                                std::size_t n_samples) {
  const SpectralField x0 = project(x, cfg.space);
  const std::size_t s1 = cfg.steps_for(std::min(t1, t2));
  const std::size_t s2 = cfg.steps_for(std::max(t1, t2));
  std::vector<double> diffs(n_samples, 0.0);
  std::vector<char> dead(n_samples, 0);
  parallel_for_with_state(
      n_samples, cfg.workers,
      [&] {
        struct State {
          Integrator integ;
          SpectralField x;
          std::vector<double> xi;
          explicit State(const SimConfig& c)
              : integ(c), x(c.space), xi(c.space->dim()) {}
        };
        return std::make_shared<State>(cfg);
      },
      [&](auto& st, std::size_t replica) {
        st->x = x0;
        try {
          double phi_1 = 0.0;
          for (std::size_t n = 0; n < s2; ++n) {
            if (n == s1) phi_1 = phi(st->x);
            GaussianStream gs = step_stream(cfg.seed, replica, n);
            gs.fill(st->xi);
            st->integ.step(st->x, st->xi, nullptr, nullptr, nullptr);
          }
          if (s1 == s2) phi_1 = phi(st->x);
          const double phi_2 = phi(st->x);
          diffs[replica] = t1 <= t2 ? phi_1 - phi_2 : phi_2 - phi_1;
        } catch (const blow_up_error&) {
          dead[replica] = 1;
        }
      });
  std::vector<double> alive;
  alive.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    if (!dead[i]) alive.push_back(diffs[i]);
  }
  return mean_stderr(alive);
}

}  // namespace

EstimateReport check_time_modulus(const Observable& phi, const SpectralField& x,
                                  const std::vector<std::pair<double, double>>& t_pairs,
                                  double beta, const SimConfig& cfg,
                                  std::size_t n_samples) {
  EstimateReport report;
  report.name = "time-modulus";
  report.samples = n_samples;
  report.seed = cfg.seed;

  const SpectralField x0 = project(x, cfg.space);
  const double state_factor = std::pow(sobolev_norm(x0, 1.0) + 1.0, 6.0);
  double worst = 0.0;
  for (const auto& [t1, t2] : t_pairs) {
    const MeanStderr diff = semigroup_difference(phi, t1, t2, x0, cfg, n_samples);
    const double sg_term = sobolev_norm(heat_semigroup(x0, t1) - heat_semigroup(x0, t2),
                                        1.0);
    const double modulus = phi.bound * state_factor *
                           (std::pow(std::abs(t1 - t2), beta) + sg_term);
    const double ratio = modulus == 0.0 ? 0.0 : std::abs(diff.mean) / modulus;
    report.add("ratio@(" + format_double(t1) + "," + format_double(t2) + ")", ratio);
    report.add("se@(" + format_double(t1) + "," + format_double(t2) + ")", diff.se);
    worst = std::max(worst, ratio);
  }
  report.add("c", worst);
  report.pass = std::isfinite(worst);
  report.margin = report.pass ? 0.0 : -1.0;
  report.details = "max |u(t1,x)-u(t2,x)| / modulus = " + format_double(worst);
  return report;
}

EstimateReport check_space_modulus(
    const Observable& phi, double t,
    const std::vector<std::pair<SpectralField, SpectralField>>& state_pairs,
    double gamma, const SimConfig& cfg, std::size_t n_samples) {
  EstimateReport report;
  report.name = "space-modulus";
  report.samples = n_samples;
  report.seed = cfg.seed;

  double worst = 0.0;
  std::size_t idx = 0;
  for (const auto& [xa, xb] : state_pairs) {
    const McEstimate diff =
        estimate_feynman_kac_difference(phi, 0.0, t, xa, xb, cfg, n_samples);
    const double denom = sobolev_norm(project(xb, cfg.space) - project(xa, cfg.space),
                                      gamma);
    const double ratio = denom == 0.0 ? 0.0 : std::abs(diff.value) / denom;
    report.add("ratio@pair" + std::to_string(idx), ratio);
    worst = std::max(worst, ratio);
    ++idx;
  }
  report.add("c", worst);
  report.pass = std::isfinite(worst);
  report.margin = report.pass ? 0.0 : -1.0;
  report.details = "max |u(t,x)-u(t,y)| / |(-A)^gamma (x-y)| = " + format_double(worst);
  return report;
}

ZRegularityAccumulator::ZRegularityAccumulator(double eps, int moment_m,
                                               std::vector<std::size_t> gap_strides)
    : eps_(eps), m_(moment_m), gap_strides_(std::move(gap_strides)) {
  if (m_ < 1) throw std::invalid_argument("ZRegularityAccumulator: moment must be >= 1");
  if (gap_strides_.empty()) {
    throw std::invalid_argument("ZRegularityAccumulator: need at least one gap");
  }
  per_path_gap_means_.resize(gap_strides_.size());
}

void ZRegularityAccumulator::add_path(const Trajectory& traj) {
  if (traj.convolution.size() < 2) {
    throw std::invalid_argument("ZRegularityAccumulator: path stores no convolution");
  }
  const double dt_stored = traj.times[1] - traj.times[0];
  if (stored_dt_ == 0.0) {
    stored_dt_ = dt_stored;
  } else if (std::abs(stored_dt_ - dt_stored) > 1e-12) {
    throw std::invalid_argument("ZRegularityAccumulator: inconsistent storage stride");
  }

  const auto& z = traj.convolution;
  double sup = 0.0;
  for (const auto& field : z) {
    sup = std::max(sup, sobolev_norm(field, 1.0 + eps_));
  }
  per_path_sup_.push_back(std::pow(sup * sup, m_));

  for (std::size_t gi = 0; gi < gap_strides_.size(); ++gi) {
    const std::size_t gap = gap_strides_[gi];
    if (gap >= z.size()) {
      throw std::invalid_argument("ZRegularityAccumulator: gap exceeds stored path");
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + gap < z.size(); ++i) {
      const double inc = sobolev_norm(z[i + gap] - z[i], 1.0 + eps_);
      sum += std::pow(inc * inc, m_);
      ++count;
    }
    per_path_gap_means_[gi].push_back(sum / static_cast<double>(count));
  }
}

std::vector<double> ZRegularityAccumulator::gap_times() const {
  std::vector<double> times(gap_strides_.size());
  for (std::size_t i = 0; i < gap_strides_.size(); ++i) {
    times[i] = static_cast<double>(gap_strides_[i]) * stored_dt_;
  }
  return times;
}

std::vector<double> ZRegularityAccumulator::increment_moments() const {
  std::vector<double> out(gap_strides_.size());
  for (std::size_t i = 0; i < gap_strides_.size(); ++i) {
    out[i] = mean_stderr(per_path_gap_means_[i]).mean;
  }
  return out;
}

double ZRegularityAccumulator::sup_moment() const {
  return mean_stderr(per_path_sup_).mean;
}

EstimateReport ZRegularityAccumulator::finalize(double beta) const {
  EstimateReport report;
  report.name = "z-regularity";
  report.samples = per_path_sup_.size();

  const std::vector<double> times = gap_times();
  const std::vector<double> moments = increment_moments();
  // Least squares slope of log(moment) against log(gap).
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double lx = std::log(times[i]);
    const double ly = std::log(std::max(moments[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double target = 2.0 * beta * static_cast<double>(m_) - 0.3;

  report.add("slope", slope);
  report.add("slope_target", target);
  report.add("sup_moment", sup_moment());
  // Half-sample sup-moments for stability gating by the caller.
  const std::size_t half = per_path_sup_.size() / 2;
  if (half >= 1) {
    report.add("sup_moment_first_half",
               mean_stderr(std::span<const double>(per_path_sup_.data(), half)).mean);
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    report.add("moment@gap=" + format_double(times[i]), moments[i]);
  }
  report.margin = slope - target;
  report.pass = std::isfinite(slope) && slope >= target && std::isfinite(sup_moment());
  report.details = "log-log increment slope " + format_double(slope) +
                   " vs target >= " + format_double(target);
  return report;
}

EstimateReport check_z_regularity(const std::vector<Trajectory>& z_paths, double eps,
                                  double beta, int moment_m) {
  if (z_paths.empty()) throw std::invalid_argument("check_z_regularity: no paths");
  // Dyadic ladder within the stored range.
  const std::size_t stored = z_paths.front().convolution.size();
  std::vector<std::size_t> gaps;
  for (std::size_t g = 1; 4 * g < stored; g *= 2) gaps.push_back(g);
  if (gaps.size() < 2) {
    throw std::invalid_argument("check_z_regularity: paths too short for a gap ladder");
  }
  ZRegularityAccumulator acc(eps, moment_m, gaps);
  for (const auto& traj : z_paths) acc.add_path(traj);
  return acc.finalize(beta);
}

double MomentBoundsAccumulator::gamma_delta(double delta) {
  return delta <= 1.0 ? 2.0 / (2.0 * delta - 1.0)
                      : (2.0 * delta + 1.0) / (2.0 * delta - 1.0);
}

MomentBoundsAccumulator::MomentBoundsAccumulator(double delta, double trace_sup)
    : delta_(delta), trace_sup_(trace_sup) {
  if (!(delta_ > 0.5)) {
    throw std::invalid_argument("MomentBoundsAccumulator: delta must exceed 1/2");
  }
}

void MomentBoundsAccumulator::add_path(const Trajectory& traj) {
  const auto& led = traj.ledger;
  t_final_ = led.t.back();
  x0_h_sq_ = led.x_h.front() * led.x_h.front();

  double dissipation = 0.0;
  for (std::size_t i = 0; i + 1 < led.t.size(); ++i) {
    dissipation += led.x_v[i] * led.x_v[i] * (led.t[i + 1] - led.t[i]);
  }
  per_path_energy_.push_back(led.x_h.back() * led.x_h.back() + dissipation);

  // Damped higher-regularity integral from the stored states.
  const double gd = gamma_delta(delta_);
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < traj.states.size(); ++i) {
    const double hi = sobolev_norm(traj.states[i], 0.5 * (delta_ + 1.0));
    const double lo = sobolev_norm(traj.states[i], 0.5 * delta_);
    const double dt_stored = traj.times[i + 1] - traj.times[i];
    integral += hi * hi / std::pow(1.0 + lo * lo, gd) * dt_stored;
  }
  per_path_damped_.push_back(integral);
}

EstimateReport MomentBoundsAccumulator::finalize() const {
  EstimateReport report;
  report.name = "moment-bounds";
  report.samples = per_path_energy_.size();

  const MeanStderr energy = mean_stderr(per_path_energy_);
  const double rhs = x0_h_sq_ + t_final_ * trace_sup_;
  report.add("energy_lhs", energy.mean);
  report.add("energy_se", energy.se);
  report.add("energy_rhs", rhs);
  report.margin = rhs - (energy.mean - 3.0 * energy.se);
  report.pass = energy.mean - 3.0 * energy.se <= rhs;

  const MeanStderr damped = mean_stderr(per_path_damped_);
  report.add("damped_integral", damped.mean);
  report.add("damped_se", damped.se);
  const std::size_t half = per_path_damped_.size() / 2;
  if (half >= 1) {
    report.add("damped_first_half",
               mean_stderr(std::span<const double>(per_path_damped_.data(), half)).mean);
  }
  report.add("gamma_delta", gamma_delta(delta_));
  report.details = "energy ledger " + format_double(energy.mean) + " <= " +
                   format_double(rhs) + "; damped integral " +
                   format_double(damped.mean);
  return report;
}

EstimateReport check_moment_bounds(const std::vector<Trajectory>& paths, double delta,
                                   double trace_sup) {
  if (paths.empty()) throw std::invalid_argument("check_moment_bounds: no paths");
  MomentBoundsAccumulator acc(delta, trace_sup);
  for (const auto& traj : paths) acc.add_path(traj);
  return acc.finalize();
}

ErgodicResult ergodic_averages(const std::vector<SpectralField>& initial_conditions,
                               const SimConfig& cfg, double t_long, double burn_in,
                               double stride, double invariance_t,
                               const std::vector<std::string>& phi_panel) {
  if (initial_conditions.empty()) {
    throw std::invalid_argument("ergodic_averages: no initial conditions");
  }
  if (!(t_long > burn_in + stride)) {
    throw std::invalid_argument("ergodic_averages: insufficient samples after burn-in");
  }

  SimConfig chain_cfg = cfg;
  chain_cfg.T = t_long;
  chain_cfg.store_stride = static_cast<std::size_t>(std::llround(stride / cfg.dt));
  chain_cfg.ledger_stride = 1;
  chain_cfg.with_convolution = false;
  chain_cfg.record_increments = false;

  ErgodicResult result;
  result.measure.burn_in = burn_in;
  result.measure.stride = stride;

  EstimateReport& report = result.report;
  report.name = "ergodic-averages";
  report.seed = cfg.seed;

  for (std::size_t ic = 0; ic < initial_conditions.size(); ++ic) {
    const Trajectory traj = simulate(initial_conditions[ic], chain_cfg, ic);

    // Time-averaged |(-A)^{1/2} X|^2 after burn-in.
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < traj.ledger.t.size(); ++i) {
      if (traj.ledger.t[i] < burn_in) continue;
      sum += traj.ledger.x_v[i] * traj.ledger.x_v[i];
      ++count;
    }
    result.time_avg_vnorm_sq.push_back(sum / static_cast<double>(count));

    for (std::size_t i = 0; i < traj.times.size(); ++i) {
      if (traj.times[i] < burn_in) continue;
      result.measure.samples.push_back(traj.states[i]);
    }
  }
  result.measure.weights.assign(result.measure.samples.size(),
                                1.0 / static_cast<double>(result.measure.samples.size()));
  report.samples = result.measure.samples.size();

  // Cross-initial-condition agreement.
  double avg_min = result.time_avg_vnorm_sq.front();
  double avg_max = avg_min;
  for (double v : result.time_avg_vnorm_sq) {
    avg_min = std::min(avg_min, v);
    avg_max = std::max(avg_max, v);
  }
  const double spread = (avg_max - avg_min) / std::max(avg_max, 1e-300);
  report.add("cross_ic_spread", spread);
  for (std::size_t ic = 0; ic < result.time_avg_vnorm_sq.size(); ++ic) {
    report.add("time_avg_vnorm_sq@ic" + std::to_string(ic),
               result.time_avg_vnorm_sq[ic]);
  }

  // Invariant-moment functionals.
  const double g = cfg.noise ? cfg.noise->declared().g : 0.05;
  const double high_exp = (1.0 + 2.0 * g) / (10.0 + 8.0 * g);
  std::vector<double> m_v, m_a, m_high;
  m_v.reserve(result.measure.samples.size());
  for (const auto& s : result.measure.samples) {
    const double v = sobolev_norm(s, 0.5);
    m_v.push_back(v * v);
    m_a.push_back(std::pow(sobolev_norm(s, 1.0), 2.0 / 3.0));
    m_high.push_back(std::pow(sobolev_norm(s, 1.0 + 0.5 * g), high_exp));
  }
  const MeanStderr mv = mean_stderr(m_v);
  const MeanStderr ma = mean_stderr(m_a);
  const MeanStderr mh = mean_stderr(m_high);
  report.add("moment_vnorm_sq", mv.mean);
  report.add("moment_anorm_23", ma.mean);
  report.add("moment_high", mh.mean);
  const std::size_t half = result.measure.samples.size() / 2;
  auto half_mean = [&](const std::vector<double>& v) {
    return mean_stderr(std::span<const double>(v.data(), half)).mean;
  };
  double moment_stability = 0.0;
  if (half >= 2) {
    moment_stability = std::max(
        {std::abs(half_mean(m_v) - mv.mean) / std::max(mv.mean, 1e-300),
         std::abs(half_mean(m_a) - ma.mean) / std::max(ma.mean, 1e-300),
         std::abs(half_mean(m_high) - mh.mean) / std::max(mh.mean, 1e-300)});
  }
  report.add("moment_stability", moment_stability);

  // Invariance residual: fresh one-replica continuations from the thinned
  // samples versus the plain sample average, per test observable.
  std::uint64_t sm = cfg.seed ^ 0xC011117EULL;
  const std::uint64_t cont_seed = splitmix64(sm);
  const std::size_t cont_steps = chain_cfg.steps_for(invariance_t);
  bool invariance_ok = true;
  double worst_sigma = 0.0;
  {
    std::vector<SpectralField> endpoints(result.measure.samples.size(),
                                         SpectralField(cfg.space));
    std::vector<char> dead(result.measure.samples.size(), 0);
    parallel_for_with_state(
        result.measure.samples.size(), cfg.workers,
        [&] {
          struct State {
            Integrator integ;
            SpectralField x;
            std::vector<double> xi;
            explicit State(const SimConfig& c)
                : integ(c), x(c.space), xi(c.space->dim()) {}
          };
          return std::make_shared<State>(chain_cfg);
        },
        [&](auto& st, std::size_t i) {
          st->x = result.measure.samples[i];
          try {
            for (std::size_t n = 0; n < cont_steps; ++n) {
              GaussianStream gs = step_stream(cont_seed, i, n);
              gs.fill(st->xi);
              st->integ.step(st->x, st->xi, nullptr, nullptr, nullptr);
            }
            endpoints[i] = st->x;
          } catch (const blow_up_error&) {
            dead[i] = 1;
          }
        });

    for (const auto& phi_name : phi_panel) {
      const Observable phi = observable_by_name(phi_name);
      std::vector<double> now, later;
      for (std::size_t i = 0; i < result.measure.samples.size(); ++i) {
        if (dead[i]) continue;
        now.push_back(phi(result.measure.samples[i]));
        later.push_back(phi(endpoints[i]));
      }
      const MeanStderr before = mean_stderr(now);
      const MeanStderr after = mean_stderr(later);
      const double residual = after.mean - before.mean;
      const double comb = std::sqrt(before.se * before.se + after.se * after.se);
      const double sigmas = std::abs(residual) / std::max(comb, 1e-300);
      report.add("invariance_residual@" + phi_name, residual);
      report.add("invariance_sigma@" + phi_name, sigmas);
      worst_sigma = std::max(worst_sigma, sigmas);
      if (sigmas > 3.0) invariance_ok = false;
    }
  }

  report.pass = spread <= 0.05 && invariance_ok && moment_stability <= 0.10;
  report.margin = std::min({0.05 - spread, 3.0 - worst_sigma, 0.10 - moment_stability});
  report.details = "cross-IC spread " + format_double(spread) +
                   ", worst invariance sigma " + format_double(worst_sigma) +
                   ", moment stability " + format_double(moment_stability);
  return result;
}

EstimateReport check_chapman_kolmogorov(const std::vector<std::string>& phi_names,
                                        double s, double t, const SpectralField& x,
                                        const SimConfig& cfg, std::size_t n_direct,
                                        std::size_t n_outer, std::size_t n_inner) {
  EstimateReport report;
  report.name = "chapman-kolmogorov";
  report.seed = cfg.seed;
  report.samples = n_direct;

  bool all_ok = true;
  double worst_sigma = 0.0;
  for (const auto& name : phi_names) {
    const Observable phi = observable_by_name(name);
    const McEstimate direct = estimate_semigroup(phi, s + t, x, cfg, n_direct);
    const McEstimate nested = estimate_nested_semigroup(phi, s, t, x, cfg, n_outer,
                                                        n_inner);
    const double residual = direct.value - nested.value;
    const double comb = std::sqrt(direct.stderr_ * direct.stderr_ +
                                  nested.stderr_ * nested.stderr_);
    const double sigmas = std::abs(residual) / std::max(comb, 1e-300);
    report.add("residual@" + name, residual);
    report.add("sigma@" + name, sigmas);
    worst_sigma = std::max(worst_sigma, sigmas);
    if (sigmas > 3.0) all_ok = false;
  }
  report.pass = all_ok;
  report.margin = 3.0 - worst_sigma;
  report.details = "worst |residual|/stderr = " + format_double(worst_sigma);
  return report;
}

EstimateReport galerkin_consistency(const Observable& phi, double t,
                                    const SpectralField& x0_coarse,
                                    const std::vector<int>& cutoffs,
                                    const SimConfig& base_cfg, std::size_t n_samples) {
  if (cutoffs.size() < 2) {
    throw std::invalid_argument("galerkin_consistency: need at least two cutoffs");
  }
  EstimateReport report;
  report.name = "galerkin-consistency";
  report.seed = base_cfg.seed;
  report.samples = n_samples;

  std::vector<std::vector<double>> laws;
  for (int cutoff : cutoffs) {
    SimConfig cfg = base_cfg;
    cfg.space = build_space(cutoff);
    if (base_cfg.noise) {
      cfg.noise = std::make_shared<NoiseOperator>(
          cfg.space, base_cfg.noise->alpha(), base_cfg.noise->coupling(),
          base_cfg.noise->kappa(), base_cfg.noise->declared(),
          base_cfg.noise->strength());
    }
    if (base_cfg.forcing) cfg.forcing = project(*base_cfg.forcing, cfg.space);
    const SpectralField x0 = project(x0_coarse, cfg.space);

    std::vector<double> values(n_samples, 0.0);
    std::vector<char> dead(n_samples, 0);
    parallel_for_with_state(
        n_samples, cfg.workers,
        [&] {
          struct State {
            Integrator integ;
            SpectralField x;
            std::vector<double> xi;
            explicit State(const SimConfig& c)
                : integ(c), x(c.space), xi(c.space->dim()) {}
          };
          return std::make_shared<State>(cfg);
        },
        [&](auto& st, std::size_t replica) {
          st->x = x0;
          const std::size_t steps = cfg.steps_for(t);
          try {
            for (std::size_t n = 0; n < steps; ++n) {
              GaussianStream gs = step_stream(cfg.seed, replica, n);
              gs.fill(st->xi);
              st->integ.step(st->x, st->xi, nullptr, nullptr, nullptr);
            }
            values[replica] = phi(st->x);
          } catch (const blow_up_error&) {
            dead[replica] = 1;
          }
        });
    std::vector<double> alive;
    for (std::size_t i = 0; i < n_samples; ++i) {
      if (!dead[i]) alive.push_back(values[i]);
    }
    std::sort(alive.begin(), alive.end());
    laws.push_back(std::move(alive));
  }

  for (std::size_t i = 0; i + 1 < laws.size(); ++i) {
    const std::size_t n = std::min(laws[i].size(), laws[i + 1].size());
    double w1 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      // Quantile coupling on equal ranks.
      const double qa = laws[i][j * laws[i].size() / n];
      const double qb = laws[i + 1][j * laws[i + 1].size() / n];
      w1 += std::abs(qa - qb);
    }
    w1 /= static_cast<double>(n);
    report.add("w1@" + std::to_string(cutoffs[i]) + "->" + std::to_string(cutoffs[i + 1]),
               w1);
  }
  report.pass = true;  // diagnostic only
  report.margin = 0.0;
  report.details = "empirical 1-Wasserstein distances across cutoffs (diagnostic)";
  return report;
}

}  // namespace spde
