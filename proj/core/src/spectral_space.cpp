#include "spde/spectral_space.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spde/rng.hpp"

namespace spde {

namespace {

Vec3d normalize(const Vec3d& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

Vec3d cross(const Vec3d& a, const Vec3d& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

constexpr double kSqrtHalf = 0.70710678118654752440;

}  // namespace

GalerkinSpace::GalerkinSpace(int cutoff) : cutoff_(cutoff) {
  if (cutoff < 1) {
    throw std::invalid_argument("GalerkinSpace: cutoff must be >= 1 (empty space)");
  }

  for (int kx = -cutoff; kx <= cutoff; ++kx) {
    for (int ky = -cutoff; ky <= cutoff; ++ky) {
      for (int kz = -cutoff; kz <= cutoff; ++kz) {
        WaveVector k{kx, ky, kz};
        if (!k.is_zero()) modes_.push_back(k);
      }
    }
  }
  std::sort(modes_.begin(), modes_.end());

  eigenvalues_.resize(modes_.size());
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    eigenvalues_[i] = static_cast<double>(modes_[i].norm_sq());
    index_.emplace(modes_[i], i);
  }

  conjugate_.resize(modes_.size());
  rep_rank_.assign(modes_.size(), npos);
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    conjugate_[i] = index_.at(-modes_[i]);
    if (modes_[i].is_representative()) {
      rep_rank_[i] = reps_.size();
      reps_.push_back(i);
    }
  }

  polarizations_.resize(reps_.size());
  for (std::size_t r = 0; r < reps_.size(); ++r) {
    const WaveVector k = modes_[reps_[r]];
    const Vec3d a = normalize({static_cast<double>(k.x), static_cast<double>(k.y),
                               static_cast<double>(k.z)});
    const Vec3d helper = std::abs(a[0]) < 0.9 ? Vec3d{1.0, 0.0, 0.0} : Vec3d{0.0, 1.0, 0.0};
    const Vec3d e1 = normalize(cross(a, helper));
    const Vec3d e2 = cross(a, e1);
    polarizations_[r] = {e1, e2};
  }

  basis_.reserve(4 * reps_.size());
  for (std::size_t r = 0; r < reps_.size(); ++r) {
    for (int pol = 0; pol < 2; ++pol) {
      basis_.push_back({reps_[r], pol, false});
      basis_.push_back({reps_[r], pol, true});
    }
  }
  basis_eigenvalues_.resize(basis_.size());
  for (std::size_t n = 0; n < basis_.size(); ++n) {
    basis_eigenvalues_[n] = eigenvalues_[basis_[n].rep_mode];
  }

  rep_data_.resize(reps_.size());
  for (std::size_t r = 0; r < reps_.size(); ++r) {
    RepData& rd = rep_data_[r];
    rd.mode3 = static_cast<std::uint32_t>(3 * reps_[r]);
    rd.conj3 = static_cast<std::uint32_t>(3 * conjugate_[reps_[r]]);
    for (int c = 0; c < 3; ++c) {
      rd.e1[c] = polarizations_[r][0][c];
      rd.e2[c] = polarizations_[r][1][c];
    }
  }
}

std::size_t GalerkinSpace::index_of(WaveVector k) const {
  auto it = index_.find(k);
  return it == index_.end() ? npos : it->second;
}

const Vec3d& GalerkinSpace::polarization(std::size_t rep_mode_index,
                                         int polarization) const {
  return polarizations_[rep_rank_[rep_mode_index]][polarization];
}

void GalerkinSpace::to_coords(const SpectralField& field, std::span<double> out) const {
  // For the representative k with coefficient u and polarization eps:
  //   x_cos = sqrt(2) Re(u . eps),  x_sin = -sqrt(2) Im(u . eps).
  const Complex* raw = field.raw().data();
  const double s2 = 2.0 * kSqrtHalf;
  double* o = out.data();
  for (const RepData& rd : rep_data_) {
    const Complex* u = raw + rd.mode3;
    const double re1 = u[0].real() * rd.e1[0] + u[1].real() * rd.e1[1] +
                       u[2].real() * rd.e1[2];
    const double im1 = u[0].imag() * rd.e1[0] + u[1].imag() * rd.e1[1] +
                       u[2].imag() * rd.e1[2];
    const double re2 = u[0].real() * rd.e2[0] + u[1].real() * rd.e2[1] +
                       u[2].real() * rd.e2[2];
    const double im2 = u[0].imag() * rd.e2[0] + u[1].imag() * rd.e2[1] +
                       u[2].imag() * rd.e2[2];
    o[0] = s2 * re1;
    o[1] = -s2 * im1;
    o[2] = s2 * re2;
    o[3] = -s2 * im2;
    o += 4;
  }
}

void GalerkinSpace::from_coords(std::span<const double> coords, SpectralField& out) const {
  Complex* raw = out.raw().data();
  const double* c = coords.data();
  for (const RepData& rd : rep_data_) {
    const double re1 = kSqrtHalf * c[0], im1 = -kSqrtHalf * c[1];
    const double re2 = kSqrtHalf * c[2], im2 = -kSqrtHalf * c[3];
    c += 4;
    Complex* u = raw + rd.mode3;
    Complex* v = raw + rd.conj3;
    for (int comp = 0; comp < 3; ++comp) {
      const double re = re1 * rd.e1[comp] + re2 * rd.e2[comp];
      const double im = im1 * rd.e1[comp] + im2 * rd.e2[comp];
      u[comp] = Complex(re, im);
      v[comp] = Complex(re, -im);
    }
  }
}

SpacePtr build_space(int cutoff) { return std::make_shared<GalerkinSpace>(cutoff); }

SpectralField::SpectralField(SpacePtr space)
    : space_(std::move(space)), data_(3 * space_->mode_count(), Complex(0.0)) {}

Vec3c SpectralField::coeff(WaveVector k) const {
  const std::size_t i = space_->index_of(k);
  if (i == GalerkinSpace::npos) return {Complex(0.0), Complex(0.0), Complex(0.0)};
  return coeff(i);
}

void SpectralField::set_zero() { std::fill(data_.begin(), data_.end(), Complex(0.0)); }

bool SpectralField::is_zero() const {
  for (const auto& c : data_) {
    if (c != Complex(0.0)) return false;
  }
  return true;
}

SpectralField& SpectralField::operator+=(const SpectralField& other) {
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& other) {
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

SpectralField& SpectralField::operator*=(double scalar) {
  for (auto& c : data_) c *= scalar;
  return *this;
}

void SpectralField::axpy(double scalar, const SpectralField& other) {
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scalar * other.data_[i];
}

SpectralField fractional_power(const SpectralField& field, double gamma) {
  SpectralField out = field;
  fractional_power_in_place(out, gamma);
  return out;
}

void fractional_power_in_place(SpectralField& field, double gamma) {
  const GalerkinSpace& space = *field.space();
  for (std::size_t m = 0; m < space.mode_count(); ++m) {
    const double factor = std::pow(space.eigenvalue(m), gamma);
    field.at(m, 0) *= factor;
    field.at(m, 1) *= factor;
    field.at(m, 2) *= factor;
  }
}

double sobolev_norm(const SpectralField& field, double gamma) {
  const GalerkinSpace& space = *field.space();
  double sum = 0.0;
  for (std::size_t m = 0; m < space.mode_count(); ++m) {
    const double w = std::pow(space.eigenvalue(m), 2.0 * gamma);
    sum += w * (std::norm(field.at(m, 0)) + std::norm(field.at(m, 1)) +
                std::norm(field.at(m, 2)));
  }
  return std::sqrt(sum);
}

double inner_product(const SpectralField& a, const SpectralField& b) {
  if (a.space()->cutoff() != b.space()->cutoff()) {
    throw std::invalid_argument("inner_product: fields on different spaces");
  }
  double sum = 0.0;
  const auto ra = a.raw();
  const auto rb = b.raw();
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sum += ra[i].real() * rb[i].real() + ra[i].imag() * rb[i].imag();
  }
  return sum;
}

SpectralField project(const SpectralField& field, const SpacePtr& space) {
  if (field.space() == space) return field;
  SpectralField out(space);
  const GalerkinSpace& src = *field.space();
  for (std::size_t m = 0; m < src.mode_count(); ++m) {
    const std::size_t j = space->index_of(src.modes()[m]);
    if (j != GalerkinSpace::npos) out.set_coeff(j, field.coeff(m));
  }
  return out;
}

double divergence_residual(const SpectralField& field) {
  const GalerkinSpace& space = *field.space();
  double worst = 0.0;
  for (std::size_t m = 0; m < space.mode_count(); ++m) {
    const WaveVector k = space.modes()[m];
    const Vec3c u = field.coeff(m);
    const Complex div = static_cast<double>(k.x) * u[0] +
                        static_cast<double>(k.y) * u[1] +
                        static_cast<double>(k.z) * u[2];
    worst = std::max(worst, std::abs(div));
  }
  return worst;
}

double reality_residual(const SpectralField& field) {
  const GalerkinSpace& space = *field.space();
  double worst = 0.0;
  for (std::size_t m : space.representative_indices()) {
    const std::size_t mc = space.conjugate_index(m);
    for (int c = 0; c < 3; ++c) {
      worst = std::max(worst, std::abs(field.at(m, c) - std::conj(field.at(mc, c))));
    }
  }
  return worst;
}

void check_field_invariants(const SpectralField& field, double tol) {
  const double scale = 1.0 + sobolev_norm(field, 0.0);
  if (divergence_residual(field) > tol * scale) {
    throw std::logic_error("SpectralField: divergence-free constraint violated");
  }
  if (reality_residual(field) > tol * scale) {
    throw std::logic_error("SpectralField: reality constraint violated");
  }
}

SpectralField random_field(const SpacePtr& space, std::uint64_t seed, double sigma,
                           double decay) {
  GaussianStream gs(derive_stream_seed(seed, 0x5eedf1e1dULL, 0));
  std::vector<double> coords(space->dim());
  for (int n = 0; n < space->dim(); ++n) {
    coords[n] = sigma * std::pow(space->basis_eigenvalue(n), -decay) * gs.next();
  }
  SpectralField out(space);
  space->from_coords(coords, out);
  return out;
}

SpectralField basis_field(const SpacePtr& space, std::size_t n, double amplitude) {
  std::vector<double> coords(space->dim(), 0.0);
  coords[n] = amplitude;
  SpectralField out(space);
  space->from_coords(coords, out);
  return out;
}

Vec3d evaluate_physical(const SpectralField& field, const Vec3d& xi) {
  const GalerkinSpace& space = *field.space();
  Vec3d value{0.0, 0.0, 0.0};
  for (std::size_t m = 0; m < space.mode_count(); ++m) {
    const WaveVector k = space.modes()[m];
    const double phase = k.x * xi[0] + k.y * xi[1] + k.z * xi[2];
    const Complex e(std::cos(phase), std::sin(phase));
    const Vec3c u = field.coeff(m);
    for (int c = 0; c < 3; ++c) value[c] += (u[c] * e).real();
  }
  return value;
}

}  // namespace spde
