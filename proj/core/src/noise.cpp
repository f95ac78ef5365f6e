#include "spde/noise.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "spde/errors.hpp"
#include "spde/rng.hpp"

namespace spde {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

double window_1d(double u) {
  // C^2 bump supported on (-1, 1).
  if (u <= -1.0 || u >= 1.0) return 0.0;
  const double w = 1.0 - u * u;
  return w * w * w;
}

void require_space(const NoiseOperator& op, const SpectralField& f, const char* who) {
  if (!f.has_space() || f.space()->cutoff() != op.space()->cutoff()) {
    throw std::invalid_argument(std::string(who) + ": field space mismatch");
  }
}

}  // namespace

NoiseOperator::NoiseOperator(SpacePtr space, double alpha, double c, KappaSpec kappa,
                             NoiseAssumptionDecl decl, double strength)
    : space_(std::move(space)),
      alpha_(alpha),
      c_(c),
      strength_(strength),
      kappa_(kappa),
      decl_(decl) {
  if (!(alpha_ > 1.25 && alpha_ < 1.5)) {
    throw std::invalid_argument(
        "NoiseOperator: alpha outside (5/4, 3/2), see noise assumptions");
  }
  if (c_ < 0.0) throw std::invalid_argument("NoiseOperator: coupling c must be >= 0");
  if (!(strength_ > 0.0)) throw std::invalid_argument("NoiseOperator: strength must be > 0");

  const int dim = space_->dim();
  base_diag_.resize(dim);
  mult_scale_.resize(dim);
  for (int n = 0; n < dim; ++n) {
    const double mu = space_->basis_eigenvalue(n);
    base_diag_[n] = std::pow(mu, -alpha_);
    mult_scale_[n] =
        std::pow(mu, -1.5) * std::pow(static_cast<double>(n + 1), -kappa_.lambda_decay);
  }

  if (kappa_.variant == KappaSpec::Variant::integral_kernel) {
    const int grid = kappa_.kernel_grid;
    if (grid < 4) throw std::invalid_argument("NoiseOperator: kernel_grid too small");
    kernel_points_ = static_cast<std::size_t>(grid) * grid * grid;

    // Fixed divergence-free profile: the first real eigenmode.
    SpectralField profile = basis_field(space_, 0);
    kernel_profile_coords_.assign(dim, 0.0);
    space_->to_coords(profile, kernel_profile_coords_);

    kernel_window_.resize(kernel_points_);
    kernel_basis_grid_.assign(static_cast<std::size_t>(dim) * kernel_points_, 0.0);
    const double quad_weight = 1.0 / static_cast<double>(kernel_points_);
    const double half = kTwoPi / 2.0;
    std::size_t j = 0;
    for (int a = 0; a < grid; ++a) {
      for (int b = 0; b < grid; ++b) {
        for (int cc = 0; cc < grid; ++cc, ++j) {
          const Vec3d xi = {kTwoPi * (a + 0.5) / grid, kTwoPi * (b + 0.5) / grid,
                            kTwoPi * (cc + 0.5) / grid};
          kernel_window_[j] = quad_weight * window_1d((xi[0] - half) / half) *
                              window_1d((xi[1] - half) / half) *
                              window_1d((xi[2] - half) / half);
          // Probe component (y) of each basis field at this grid point.
          for (int n = 0; n < dim; ++n) {
            const auto& entry = space_->basis()[n];
            const WaveVector k = space_->modes()[entry.rep_mode];
            const Vec3d& eps = space_->polarization(entry.rep_mode, entry.polarization);
            const double phase = k.x * xi[0] + k.y * xi[1] + k.z * xi[2];
            const double prof = entry.sine ? std::sin(phase) : std::cos(phase);
            kernel_basis_grid_[static_cast<std::size_t>(n) * kernel_points_ + j] =
                std::sqrt(2.0) * prof * eps[1];
          }
        }
      }
    }
  }

  // Invertibility at construction ("c small"): for the multiplier variant
  // the diagonal entries are mu^{-alpha} + c mu^{-3/2} lambda_n kappa_n with
  // |kappa_n| <= 1, so every entry must stay positive in the worst case.
  if (kappa_.variant == KappaSpec::Variant::multiplier) {
    for (int n = 0; n < dim; ++n) {
      if (base_diag_[n] - c_ * mult_scale_[n] <= 0.0) {
        throw std::invalid_argument(
            "NoiseOperator: coupling c too large, operator can degenerate");
      }
    }
  }
}

bool NoiseOperator::is_diagonal() const {
  return c_ == 0.0 || kappa_.variant != KappaSpec::Variant::integral_kernel;
}

void NoiseOperator::diagonal(std::span<const double> x_coords,
                             std::span<double> out) const {
  const int dim = space_->dim();
  if (c_ == 0.0 || kappa_.variant == KappaSpec::Variant::zero) {
    for (int n = 0; n < dim; ++n) out[n] = strength_ * base_diag_[n];
    return;
  }
  if (kappa_.variant != KappaSpec::Variant::multiplier) {
    throw std::logic_error("NoiseOperator::diagonal: operator is not diagonal");
  }
  for (int n = 0; n < dim; ++n) {
    out[n] = strength_ * (base_diag_[n] + c_ * mult_scale_[n] * std::tanh(x_coords[n]));
  }
}

void NoiseOperator::prepare_state(std::span<const double> x_coords,
                                  DiagonalScratch& scratch) const {
  if (!is_diagonal()) {
    throw std::logic_error("prepare_state: operator is not diagonal");
  }
  const int dim = space_->dim();
  scratch.diag.resize(dim);
  scratch.dsech.resize(dim);
  if (c_ == 0.0 || kappa_.variant == KappaSpec::Variant::zero) {
    for (int n = 0; n < dim; ++n) {
      scratch.diag[n] = strength_ * base_diag_[n];
      scratch.dsech[n] = 0.0;
    }
    return;
  }
  for (int n = 0; n < dim; ++n) {
    const double th = std::tanh(x_coords[n]);
    scratch.diag[n] = strength_ * (base_diag_[n] + c_ * mult_scale_[n] * th);
    scratch.dsech[n] = strength_ * c_ * mult_scale_[n] * (1.0 - th * th);
  }
}

void NoiseOperator::apply_prepared(const DiagonalScratch& scratch,
                                   std::span<const double> w,
                                   std::span<double> out) const {
  const int dim = space_->dim();
  for (int n = 0; n < dim; ++n) out[n] = scratch.diag[n] * w[n];
}

void NoiseOperator::inverse_prepared(const DiagonalScratch& scratch,
                                     std::span<const double> h,
                                     std::span<double> out) const {
  const int dim = space_->dim();
  for (int n = 0; n < dim; ++n) {
    if (std::abs(scratch.diag[n]) < 1e-300) {
      throw degenerate_noise_error("inverse_apply: diagonal entry vanished");
    }
    out[n] = h[n] / scratch.diag[n];
  }
}

void NoiseOperator::derivative_prepared(const DiagonalScratch& scratch,
                                        std::span<const double> h,
                                        std::span<const double> w,
                                        std::span<double> out) const {
  const int dim = space_->dim();
  for (int n = 0; n < dim; ++n) out[n] = scratch.dsech[n] * h[n] * w[n];
}

void NoiseOperator::grid_component(std::span<const double> coords,
                                   std::vector<double>& out) const {
  out.assign(kernel_points_, 0.0);
  const int dim = space_->dim();
  for (int n = 0; n < dim; ++n) {
    const double cn = coords[n];
    if (cn == 0.0) continue;
    const double* row = &kernel_basis_grid_[static_cast<std::size_t>(n) * kernel_points_];
    for (std::size_t j = 0; j < kernel_points_; ++j) out[j] += cn * row[j];
  }
}

std::vector<double> NoiseOperator::kernel_state_vector(
    std::span<const double> x_coords) const {
  std::vector<double> x_grid;
  grid_component(x_coords, x_grid);
  std::vector<double> weights(kernel_points_);
  for (std::size_t j = 0; j < kernel_points_; ++j) {
    weights[j] = kernel_window_[j] * std::tanh(x_grid[j]);
  }
  const int dim = space_->dim();
  std::vector<double> g(dim, 0.0);
  for (int n = 0; n < dim; ++n) {
    const double* row = &kernel_basis_grid_[static_cast<std::size_t>(n) * kernel_points_];
    double sum = 0.0;
    for (std::size_t j = 0; j < kernel_points_; ++j) sum += weights[j] * row[j];
    g[n] = sum;
  }
  return g;
}

std::vector<double> NoiseOperator::kernel_derivative_vector(
    std::span<const double> x_coords, std::span<const double> h) const {
  std::vector<double> x_grid, h_grid;
  grid_component(x_coords, x_grid);
  grid_component(h, h_grid);
  std::vector<double> weights(kernel_points_);
  for (std::size_t j = 0; j < kernel_points_; ++j) {
    const double th = std::tanh(x_grid[j]);
    weights[j] = kernel_window_[j] * (1.0 - th * th) * h_grid[j];
  }
  const int dim = space_->dim();
  std::vector<double> u(dim, 0.0);
  for (int n = 0; n < dim; ++n) {
    const double* row = &kernel_basis_grid_[static_cast<std::size_t>(n) * kernel_points_];
    double sum = 0.0;
    for (std::size_t j = 0; j < kernel_points_; ++j) sum += weights[j] * row[j];
    u[n] = sum;
  }
  return u;
}

void NoiseOperator::apply_coords(std::span<const double> x_coords,
                                 std::span<const double> w, std::span<double> out) const {
  const int dim = space_->dim();
  switch (kappa_.variant) {
    case KappaSpec::Variant::zero:
      for (int n = 0; n < dim; ++n) out[n] = strength_ * base_diag_[n] * w[n];
      return;
    case KappaSpec::Variant::multiplier:
      if (c_ == 0.0) {
        for (int n = 0; n < dim; ++n) out[n] = strength_ * base_diag_[n] * w[n];
      } else {
        for (int n = 0; n < dim; ++n) {
          out[n] = strength_ *
                   (base_diag_[n] + c_ * mult_scale_[n] * std::tanh(x_coords[n])) * w[n];
        }
      }
      return;
    case KappaSpec::Variant::integral_kernel: {
      double weight = 0.0;
      if (c_ != 0.0) {
        const std::vector<double> g = kernel_state_vector(x_coords);
        for (int n = 0; n < dim; ++n) weight += g[n] * w[n];
      }
      for (int n = 0; n < dim; ++n) {
        out[n] = strength_ *
                 (base_diag_[n] * w[n] + c_ * weight * kernel_profile_coords_[n]);
      }
      return;
    }
  }
}

void NoiseOperator::inverse_apply_coords(std::span<const double> x_coords,
                                         std::span<const double> h,
                                         std::span<double> out) const {
  const int dim = space_->dim();
  if (is_diagonal()) {
    std::vector<double> diag(dim);
    diagonal(x_coords, diag);
    for (int n = 0; n < dim; ++n) {
      if (std::abs(diag[n]) < 1e-300) {
        throw degenerate_noise_error("inverse_apply: diagonal entry vanished");
      }
      out[n] = h[n] / diag[n];
    }
    return;
  }

  // Dense solve on the assembled Galerkin matrix.
  const std::vector<double> m = assemble_matrix(x_coords);
  Eigen::Map<const Eigen::MatrixXd> mat(m.data(), dim, dim);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(mat);
  if (!lu.isInvertible()) {
    throw degenerate_noise_error("inverse_apply: Galerkin matrix numerically singular");
  }
  Eigen::Map<const Eigen::VectorXd> rhs(h.data(), dim);
  Eigen::VectorXd sol = lu.solve(rhs);
  for (int n = 0; n < dim; ++n) out[n] = sol[n];
}

void NoiseOperator::derivative_apply_coords(std::span<const double> x_coords,
                                            std::span<const double> h,
                                            std::span<const double> w,
                                            std::span<double> out) const {
  const int dim = space_->dim();
  if (c_ == 0.0 || kappa_.variant == KappaSpec::Variant::zero) {
    for (int n = 0; n < dim; ++n) out[n] = 0.0;
    return;
  }
  if (kappa_.variant == KappaSpec::Variant::multiplier) {
    for (int n = 0; n < dim; ++n) {
      const double th = std::tanh(x_coords[n]);
      out[n] = strength_ * c_ * mult_scale_[n] * (1.0 - th * th) * h[n] * w[n];
    }
    return;
  }
  const std::vector<double> u = kernel_derivative_vector(x_coords, h);
  double weight = 0.0;
  for (int n = 0; n < dim; ++n) weight += u[n] * w[n];
  for (int n = 0; n < dim; ++n) {
    out[n] = strength_ * c_ * weight * kernel_profile_coords_[n];
  }
}

std::vector<double> NoiseOperator::assemble_matrix(std::span<const double> x_coords) const {
  const int dim = space_->dim();
  std::vector<double> m(static_cast<std::size_t>(dim) * dim, 0.0);
  if (is_diagonal()) {
    std::vector<double> diag(dim);
    diagonal(x_coords, diag);
    for (int n = 0; n < dim; ++n) m[static_cast<std::size_t>(n) * dim + n] = diag[n];
    return m;
  }
  const std::vector<double> g = kernel_state_vector(x_coords);
  for (int n = 0; n < dim; ++n) {
    double* col = &m[static_cast<std::size_t>(n) * dim];
    for (int i = 0; i < dim; ++i) {
      col[i] = strength_ * c_ * kernel_profile_coords_[i] * g[n];
    }
    col[n] += strength_ * base_diag_[n];
  }
  return m;
}

double NoiseOperator::smoothness_trace(std::span<const double> x_coords, double g) const {
  const int dim = space_->dim();
  double sum = 0.0;
  if (is_diagonal()) {
    std::vector<double> diag(dim);
    diagonal(x_coords, diag);
    for (int n = 0; n < dim; ++n) {
      sum += std::pow(space_->basis_eigenvalue(n), 1.0 + g) * diag[n] * diag[n];
    }
    return sum;
  }
  // Phi e_n = strength (base_n e_n + c gvec_n v); expand the weighted norm.
  const std::vector<double> gvec = kernel_state_vector(x_coords);
  double v_weighted = 0.0;
  for (int i = 0; i < dim; ++i) {
    v_weighted += std::pow(space_->basis_eigenvalue(i), 1.0 + g) *
                  kernel_profile_coords_[i] * kernel_profile_coords_[i];
  }
  for (int n = 0; n < dim; ++n) {
    const double mu_w = std::pow(space_->basis_eigenvalue(n), 1.0 + g);
    sum += strength_ * strength_ *
           (base_diag_[n] * base_diag_[n] * mu_w +
            2.0 * c_ * base_diag_[n] * gvec[n] * mu_w * kernel_profile_coords_[n] +
            c_ * c_ * gvec[n] * gvec[n] * v_weighted);
  }
  return sum;
}

double NoiseOperator::inverse_witness(std::span<const double> x_coords, double r) const {
  const int dim = space_->dim();
  double worst = 0.0;
  if (is_diagonal()) {
    std::vector<double> diag(dim);
    diagonal(x_coords, diag);
    for (int n = 0; n < dim; ++n) {
      const double ratio =
          1.0 / (std::abs(diag[n]) * std::pow(space_->basis_eigenvalue(n), r));
      worst = std::max(worst, ratio);
    }
    return worst;
  }
  const std::vector<double> m = assemble_matrix(x_coords);
  Eigen::Map<const Eigen::MatrixXd> mat(m.data(), dim, dim);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(mat);
  if (!lu.isInvertible()) {
    throw degenerate_noise_error("inverse_witness: Galerkin matrix numerically singular");
  }
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(dim);
  for (int n = 0; n < dim; ++n) {
    unit[n] = 1.0;
    const Eigen::VectorXd sol = lu.solve(unit);
    unit[n] = 0.0;
    worst = std::max(worst, sol.norm() / std::pow(space_->basis_eigenvalue(n), r));
  }
  return worst;
}

double NoiseOperator::derivative_trace(std::span<const double> x_coords,
                                       std::span<const double> h) const {
  const int dim = space_->dim();
  if (c_ == 0.0 || kappa_.variant == KappaSpec::Variant::zero) return 0.0;
  double sum = 0.0;
  if (kappa_.variant == KappaSpec::Variant::multiplier) {
    // (Phi'(x) h) e_n has a single nonzero output component n.
    for (int n = 0; n < dim; ++n) {
      const double th = std::tanh(x_coords[n]);
      const double entry =
          strength_ * c_ * mult_scale_[n] * (1.0 - th * th) * h[n];
      sum += std::pow(space_->basis_eigenvalue(n), 2.0) * entry * entry;
    }
    return sum;
  }
  // Rank one: (Phi'(x)h) e_n = strength c u_n v.
  const std::vector<double> u = kernel_derivative_vector(x_coords, h);
  double v_weighted = 0.0, u_sq = 0.0;
  for (int i = 0; i < dim; ++i) {
    v_weighted += std::pow(space_->basis_eigenvalue(i), 2.0) *
                  kernel_profile_coords_[i] * kernel_profile_coords_[i];
    u_sq += u[i] * u[i];
  }
  return strength_ * strength_ * c_ * c_ * u_sq * v_weighted;
}

double NoiseOperator::trace_bound() const {
  const int dim = space_->dim();
  double sum = 0.0;
  for (int n = 0; n < dim; ++n) {
    double diag = base_diag_[n];
    if (kappa_.variant == KappaSpec::Variant::multiplier) diag += c_ * mult_scale_[n];
    sum += strength_ * strength_ * diag * diag;
  }
  if (kappa_.variant == KappaSpec::Variant::integral_kernel && c_ > 0.0) {
    // |kappa(x) e_n| <= |v| sum_j |win_j (e_n)_d|; bound the rank-one part by
    // Cauchy-Schwarz on the quadrature weights.
    double profile_sq = 0.0;
    for (double v : kernel_profile_coords_) profile_sq += v * v;
    double win_mass = 0.0;
    for (std::size_t j = 0; j < kernel_points_; ++j) win_mass += std::abs(kernel_window_[j]);
    double basis_sup = 0.0;
    for (double b : kernel_basis_grid_) basis_sup = std::max(basis_sup, std::abs(b));
    const double per_mode = c_ * win_mass * basis_sup;
    sum += strength_ * strength_ * profile_sq * per_mode * per_mode *
           static_cast<double>(dim);
  }
  return sum;
}

SpectralField apply_noise(const NoiseOperator& op, const SpectralField& x,
                          const SpectralField& w) {
  require_space(op, x, "apply_noise");
  require_space(op, w, "apply_noise");
  const int dim = op.space()->dim();
  std::vector<double> xc(dim), wc(dim), oc(dim);
  op.space()->to_coords(x, xc);
  op.space()->to_coords(w, wc);
  op.apply_coords(xc, wc, oc);
  SpectralField out(op.space());
  op.space()->from_coords(oc, out);
  return out;
}

SpectralField inverse_apply(const NoiseOperator& op, const SpectralField& x,
                            const SpectralField& h) {
  require_space(op, x, "inverse_apply");
  require_space(op, h, "inverse_apply");
  const int dim = op.space()->dim();
  std::vector<double> xc(dim), hc(dim), oc(dim);
  op.space()->to_coords(x, xc);
  op.space()->to_coords(h, hc);
  op.inverse_apply_coords(xc, hc, oc);
  SpectralField out(op.space());
  op.space()->from_coords(oc, out);
  return out;
}

SpectralField noise_derivative(const NoiseOperator& op, const SpectralField& x,
                               const SpectralField& h, const SpectralField& w) {
  require_space(op, x, "noise_derivative");
  require_space(op, h, "noise_derivative");
  require_space(op, w, "noise_derivative");
  const int dim = op.space()->dim();
  std::vector<double> xc(dim), hc(dim), wc(dim), oc(dim);
  op.space()->to_coords(x, xc);
  op.space()->to_coords(h, hc);
  op.space()->to_coords(w, wc);
  op.derivative_apply_coords(xc, hc, wc, oc);
  SpectralField out(op.space());
  op.space()->from_coords(oc, out);
  return out;
}

AssumptionReport validate_assumptions(const NoiseOperator& op,
                                      const std::vector<SpectralField>& sample_states,
                                      std::uint64_t probe_seed) {
  if (sample_states.empty()) {
    throw std::invalid_argument("validate_assumptions: nonempty sample set required");
  }
  const auto& space = op.space();
  const int dim = space->dim();
  const auto& decl = op.declared();

  AssumptionReport report;
  report.declared_m1 = decl.m1;
  report.g_margin = 2.0 * op.alpha() - 2.5 - decl.g;
  report.g_convergent = report.g_margin > 0.0;

  // Probe directions for the derivative bound: a spread of basis vectors
  // plus random mixtures.
  std::vector<std::vector<double>> probes;
  for (int n = 0; n < dim; n += std::max(1, dim / 16)) {
    std::vector<double> h(dim, 0.0);
    h[n] = 1.0;
    probes.push_back(std::move(h));
  }
  GaussianStream gs(derive_stream_seed(probe_seed, 17, 0));
  for (int rep = 0; rep < 4; ++rep) {
    std::vector<double> h(dim);
    for (auto& v : h) v = gs.next();
    probes.push_back(std::move(h));
  }

  std::vector<double> xc(dim);
  for (const auto& state : sample_states) {
    require_space(op, state, "validate_assumptions");
    space->to_coords(state, xc);

    AssumptionStateWitness w{0.0, 0.0, 0.0};
    w.trace_smoothness = op.smoothness_trace(xc, decl.g);
    w.inverse_bound = op.inverse_witness(xc, decl.r);
    for (const auto& h : probes) {
      double hnorm = 0.0;
      for (int i = 0; i < dim; ++i) {
        hnorm += std::pow(space->basis_eigenvalue(i), 2.0 * decl.delta) * h[i] * h[i];
      }
      w.derivative_bound =
          std::max(w.derivative_bound, op.derivative_trace(xc, h) / hnorm);
    }

    report.worst_trace = std::max(report.worst_trace, w.trace_smoothness);
    report.worst_inverse = std::max(report.worst_inverse, w.inverse_bound);
    report.worst_derivative = std::max(report.worst_derivative, w.derivative_bound);
    report.per_state.push_back(w);
  }

  report.within_declared = report.worst_trace <= decl.m1 &&
                           report.worst_inverse <= decl.m1 &&
                           report.worst_derivative <= decl.m1;
  return report;
}

}  // namespace spde
