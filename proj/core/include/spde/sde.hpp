#pragma once

// Semi-implicit Euler-Maruyama integration of the Galerkin velocity SDE
//
//   X_{n+1} = (I - dt A)^{-1} ( X_n + dt (b_m(X_n) + P_m f) + Phi_m(X_n) dW_n ),
//
// together with optional co-integration of the first-variation process
//
//   eta_{n+1} = (I - dt A)^{-1} ( eta_n + dt (b_m(X_n, eta_n) + b_m(eta_n, X_n))
//                                 + (Phi'_m(X_n) . eta_n) dW_n ),
//
// and of the stochastic convolution
//
//   Z_{n+1} = (I - dt A)^{-1} ( Z_n + Phi_m(X_n) dW_n ),  Z_0 = 0,
//
// all driven by the same increments. The Stokes part is solved implicitly
// (a diagonal solve per mode), the transport and noise terms explicitly.
// dW_n has variance dt per retained real mode; increments are recorded as
// standard normals for exact replay.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "spde/bilinear.hpp"
#include "spde/noise.hpp"
#include "spde/spectral_space.hpp"

namespace spde {

enum class Scheme { semi_implicit_euler };

struct SimConfig {
  SpacePtr space;
  double dt = 1e-3;
  double T = 1.0;
  std::shared_ptr<const NoiseOperator> noise;  // null: Phi == 0
  std::optional<SpectralField> forcing;        // constant f in V; empty: 0
  std::uint64_t seed = 0;
  double guard = 1e6;  // blow-up guard on |AX|
  Scheme scheme = Scheme::semi_implicit_euler;
  bool enable_bilinear = true;  // test hook: disable b_m for linear instances

  // Storage knobs.
  std::size_t store_stride = 1;   // keep fields every k steps (0: endpoints only)
  std::size_t ledger_stride = 1;  // scalar ledger every k steps
  bool record_increments = false;
  bool with_convolution = false;
  double variation_gamma = 1.0;  // exponent for the eta norms in the ledger

  int workers = 1;

  std::size_t steps() const;          // T / dt, must be integral within rounding
  std::size_t steps_for(double t) const;
  void validate() const;
};

// Per-step scalar series along a path; always cheap enough to keep even for
// long runs. cum_a2[i] is the left-endpoint Riemann sum of |AX|^2 ds up to
// the row's time.
struct TrajectoryLedger {
  std::vector<double> t;
  std::vector<double> x_h;     // |X|
  std::vector<double> x_v;     // |(-A)^{1/2} X|
  std::vector<double> x_a;     // |AX|
  std::vector<double> cum_a2;  // int_0^t |AX|^2 ds
  std::vector<double> z_a;     // |AZ| (when Z is co-integrated)
  std::vector<double> eta_g;   // |(-A)^gamma eta|
  std::vector<double> eta_gp;  // |(-A)^{gamma+1/2} eta|
};

struct Trajectory {
  std::vector<double> times;  // times of the stored fields
  std::vector<SpectralField> states;
  std::vector<SpectralField> variation;    // empty if not co-integrated
  std::vector<SpectralField> convolution;  // empty if not co-integrated
  // Standard-normal draws per step (dim values each); empty unless recorded.
  std::vector<std::vector<double>> increments;
  TrajectoryLedger ledger;

  double dt = 0.0;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  int cutoff = 0;
  double variation_gamma = 1.0;

  const SpectralField& initial() const { return states.front(); }
  const SpectralField& final_state() const { return states.back(); }
};

// Time-indexed forcing for the controlled deterministic system.
class ForcingPath {
 public:
  static ForcingPath zero();
  static ForcingPath constant(SpectralField f);
  static ForcingPath sampled(std::vector<SpectralField> per_step, double dt);

  // Forcing to use on step n (over [t_n, t_{n+1})); nullptr means zero.
  const SpectralField* at_step(std::size_t n) const;
  double dt() const { return dt_; }
  std::size_t size() const { return samples_.size(); }

 private:
  std::vector<SpectralField> samples_;
  bool constant_ = false;
  double dt_ = 0.0;
};

// Pre-step quantities of the state consumed by a step; what the Monte Carlo
// functionals need without storing paths.
struct StepStats {
  double x_h_sq = 0.0;
  double x_v_sq = 0.0;
  double x_a_sq = 0.0;
  double eta_g_sq = 0.0;   // |(-A)^gamma eta|^2
  double eta_gp_sq = 0.0;  // |(-A)^{gamma+1/2} eta|^2
  double eta_a_sq = 0.0;
  double ax_aeta = 0.0;          // (A X, A eta)
  double inv_eta_dot_dw = 0.0;   // (Phi^{-1}(X) eta, dW)
};

// One-step engine with preallocated scratch. Not thread-safe; create one
// per worker. Pure given exclusive access: identical inputs give identical
// outputs.
class Integrator {
 public:
  explicit Integrator(const SimConfig& cfg);

  const SimConfig& config() const { return cfg_; }
  int dim() const { return dim_; }

  struct StepOptions {
    bool with_inverse = false;  // fill inv_eta_dot_dw (needs eta and noise)
  };

  // Advance x (and optionally eta, z) one step using standard normals xi.
  // Fills `stats` (if non-null) with pre-step quantities. Throws
  // blow_up_error when |AX| crosses the guard after the step.
  void step(SpectralField& x, std::span<const double> xi, SpectralField* eta,
            SpectralField* z, StepStats* stats, const StepOptions& opts);
  void step(SpectralField& x, std::span<const double> xi, SpectralField* eta,
            SpectralField* z, StepStats* stats);

  // Deterministic step with an explicit forcing override (replaces cfg
  // forcing; nullptr means zero forcing).
  void step_deterministic(SpectralField& x, const SpectralField* forcing,
                          StepStats* stats = nullptr);

  double graph_norm(const SpectralField& x) const;

  std::size_t steps_taken() const { return steps_taken_; }
  void reset_step_count() { steps_taken_ = 0; }

 private:
  void core_step(SpectralField& x, std::span<const double> xi, SpectralField* eta,
                 SpectralField* z, StepStats* stats, const StepOptions& opts,
                 const SpectralField* forcing_override, bool use_override);
  void resolve_in_place(SpectralField& f) const;

  SimConfig cfg_;
  int dim_;
  double sqrt_dt_;
  BilinearWorkspace ws_;
  // Per-mode tables.
  std::vector<double> resolve_factor_;  // 1 / (1 + mu dt)
  std::vector<double> mu_sq_;           // per mode
  // Per-basis-coordinate tables.
  std::vector<double> bmu_, bmu_sq_, w_gamma_, w_gamma_p_;
  // Scratch.
  std::vector<double> xc_, ec_, noise_c_, eta_noise_c_, inv_c_;
  NoiseOperator::DiagonalScratch diag_scratch_;
  SpectralField drift_, noise_f_, eta_drift_, eta_noise_f_;
  std::size_t steps_taken_ = 0;
};

// Integrate the SDE from P_m x0 over [0, cfg.T]. Each replica derives its
// noise from (cfg.seed, replica, step); identical (seed, config) means a
// bit-identical trajectory.
Trajectory simulate(const SpectralField& x0, const SimConfig& cfg,
                    std::uint64_t replica = 0);

// Same, co-integrating the first variation started from P_m h under the
// same increments.
Trajectory simulate_with_variation(const SpectralField& x0, const SpectralField& h,
                                   const SimConfig& cfg, std::uint64_t replica = 0);

// Zero-noise dynamics dX/dt = AX + b_m(X) + forcing(t) with the same
// scheme (Phi == 0); `horizon` may differ from cfg.T.
Trajectory deterministic_solve(const SpectralField& x0, const ForcingPath& forcing,
                               double horizon, const SimConfig& cfg);

// Re-integrate under the increments stored in `traj`, optionally from a
// different initial state. Grid and cutoff must match.
Trajectory replay(const Trajectory& traj, const SimConfig& cfg,
                  const SpectralField* x0_override = nullptr);

}  // namespace spde
