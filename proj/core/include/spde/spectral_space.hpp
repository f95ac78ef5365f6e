#pragma once

// Divergence-free Fourier eigenbasis of the Stokes operator on the
// 2*pi-periodic 3-torus, with zero-mean fields. On this domain the Stokes
// operator -A is diagonal: the mode k carries eigenvalue |k|^2, so
// fractional powers, Sobolev norms and Galerkin projectors are exact
// coefficient-wise operations.

#include <array>
#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "spde/wavevector.hpp"

namespace spde {

using Complex = std::complex<double>;
using Vec3c = std::array<Complex, 3>;
using Vec3d = std::array<double, 3>;

class SpectralField;

// Retained-mode set for a sup-norm cutoff, together with the eigenvalue
// table of -A and the real orthonormal eigenbasis used for coordinates.
// Immutable after construction and safe to share across threads.
class GalerkinSpace {
 public:
  // One real basis element: a cos- or sin-profile of one polarization of
  // one conjugate mode pair. The basis is orthonormal for the H inner
  // product and spans exactly the divergence-free fields on the mode set.
  struct BasisEntry {
    std::size_t rep_mode;  // index into modes() of the representative k
    int polarization;      // 0 or 1
    bool sine;             // false: sqrt(2) cos(k.xi) eps, true: sqrt(2) sin(k.xi) eps
  };

  explicit GalerkinSpace(int cutoff);

  int cutoff() const { return cutoff_; }
  const std::vector<WaveVector>& modes() const { return modes_; }
  std::size_t mode_count() const { return modes_.size(); }

  // Real degrees of freedom: 4 per conjugate pair (2 polarizations x 2
  // phases), i.e. 2 * mode_count().
  int dim() const { return static_cast<int>(basis_.size()); }

  double eigenvalue(std::size_t mode_index) const { return eigenvalues_[mode_index]; }

  bool contains(WaveVector k) const { return index_.find(k) != index_.end(); }
  // Returns mode index or npos.
  std::size_t index_of(WaveVector k) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t conjugate_index(std::size_t mode_index) const {
    return conjugate_[mode_index];
  }

  const std::vector<std::size_t>& representative_indices() const { return reps_; }

  const std::vector<BasisEntry>& basis() const { return basis_; }
  double basis_eigenvalue(std::size_t n) const { return basis_eigenvalues_[n]; }

  // Unit polarization vectors orthogonal to k (and to each other).
  const Vec3d& polarization(std::size_t rep_mode_index, int polarization) const;

  // Isometries between a divergence-free real field and its coordinates in
  // the real eigenbasis. |field|_H^2 == sum of squared coordinates.
  void to_coords(const SpectralField& field, std::span<double> out) const;
  void from_coords(std::span<const double> coords, SpectralField& out) const;

 private:
  int cutoff_;
  std::vector<WaveVector> modes_;
  std::vector<double> eigenvalues_;
  std::vector<std::size_t> conjugate_;
  std::vector<std::size_t> reps_;
  std::unordered_map<WaveVector, std::size_t, WaveVectorHash> index_;
  std::vector<std::array<Vec3d, 2>> polarizations_;  // per representative order
  std::vector<std::size_t> rep_rank_;                // mode index -> rank in reps_
  std::vector<BasisEntry> basis_;
  std::vector<double> basis_eigenvalues_;

  // Flat per-representative table for the coordinate transforms.
  struct RepData {
    std::uint32_t mode3;  // 3 * representative mode index
    std::uint32_t conj3;  // 3 * conjugate mode index
    double e1[3];
    double e2[3];
  };
  std::vector<RepData> rep_data_;
};

using SpacePtr = std::shared_ptr<const GalerkinSpace>;

SpacePtr build_space(int cutoff);

// Velocity field stored as Fourier coefficients on the retained modes of
// one Galerkin space. Invariants: k . coeff(k) = 0 (divergence-free) and
// coeff(-k) = conj(coeff(k)) (real-valued field).
class SpectralField {
 public:
  SpectralField() = default;
  explicit SpectralField(SpacePtr space);

  const SpacePtr& space() const { return space_; }
  bool has_space() const { return static_cast<bool>(space_); }

  Complex& at(std::size_t mode_index, int component) {
    return data_[3 * mode_index + component];
  }
  const Complex& at(std::size_t mode_index, int component) const {
    return data_[3 * mode_index + component];
  }

  Vec3c coeff(std::size_t mode_index) const {
    return {data_[3 * mode_index], data_[3 * mode_index + 1], data_[3 * mode_index + 2]};
  }
  void set_coeff(std::size_t mode_index, const Vec3c& value) {
    data_[3 * mode_index] = value[0];
    data_[3 * mode_index + 1] = value[1];
    data_[3 * mode_index + 2] = value[2];
  }

  // Lookup by wavevector; zero for modes outside the space.
  Vec3c coeff(WaveVector k) const;

  std::span<Complex> raw() { return data_; }
  std::span<const Complex> raw() const { return data_; }

  void set_zero();
  bool is_zero() const;

  SpectralField& operator+=(const SpectralField& other);
  SpectralField& operator-=(const SpectralField& other);
  SpectralField& operator*=(double scalar);
  // this += scalar * other
  void axpy(double scalar, const SpectralField& other);

  friend SpectralField operator+(SpectralField a, const SpectralField& b) {
    a += b;
    return a;
  }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) {
    a -= b;
    return a;
  }
  friend SpectralField operator*(double s, SpectralField f) {
    f *= s;
    return f;
  }

 private:
  SpacePtr space_;
  std::vector<Complex> data_;  // layout: [mode * 3 + component]
};

// (-A)^gamma applied coefficient-wise; any real gamma is allowed because
// the spectrum is bounded away from zero.
SpectralField fractional_power(const SpectralField& field, double gamma);
void fractional_power_in_place(SpectralField& field, double gamma);

// |(-A)^gamma field|. gamma = 0 gives the H norm, 1/2 the V norm, 1 the
// D(A) graph norm |Ax|.
double sobolev_norm(const SpectralField& field, double gamma);

// H inner product (real, since fields are real-valued).
double inner_product(const SpectralField& a, const SpectralField& b);

// Galerkin projector P_m: retain the coefficients whose wavevector lies in
// the target space. Idempotent and self-adjoint.
SpectralField project(const SpectralField& field, const SpacePtr& space);

// Structural checks. Throw std::logic_error on violation beyond `tol`.
double divergence_residual(const SpectralField& field);
double reality_residual(const SpectralField& field);
void check_field_invariants(const SpectralField& field, double tol = 1e-10);

// Gaussian random field: coordinates are independent N(0, sigma^2 *
// mu_n^{-2*decay}) draws, so `decay` controls spectral smoothness.
SpectralField random_field(const SpacePtr& space, std::uint64_t seed,
                           double sigma = 1.0, double decay = 0.0);

// The n-th real basis field, scaled.
SpectralField basis_field(const SpacePtr& space, std::size_t n, double amplitude = 1.0);

// Physical-space evaluation u(xi) by direct Fourier summation (used by
// quadrature cross-checks and the integral-kernel noise variant).
Vec3d evaluate_physical(const SpectralField& field, const Vec3d& xi);

}  // namespace spde
