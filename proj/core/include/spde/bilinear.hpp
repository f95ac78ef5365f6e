#pragma once

// Leray-projected convective nonlinearity b(x,y) = -P((x.grad)y) and its
// Galerkin truncation b_m(x,y) = P_m b(x,y), computed by exact Fourier
// convolution over the retained mode interactions. At desk-scale cutoffs
// the full interaction sum is exact; there is no aliasing because products
// are formed in coefficient space.

#include <memory>

#include "spde/spectral_space.hpp"

namespace spde {

// Per-worker scratch: the precomputed interaction table (all mode pairs
// p + q = k with p, q, k retained and k a representative) plus an
// accumulation buffer. The table is built once per space; the operation is
// pure given exclusive workspace access.
class BilinearWorkspace {
 public:
  explicit BilinearWorkspace(SpacePtr space);

  const SpacePtr& space() const { return space_; }
  std::size_t interaction_count() const { return entries_.size(); }

 private:
  friend void bilinear_into(const SpectralField&, const SpectralField&,
                            BilinearWorkspace&, SpectralField&);
  friend void bilinear_first_variation_into(const SpectralField&, const SpectralField&,
                                            BilinearWorkspace&, SpectralField&);

  struct Entry {
    std::uint32_t p;    // mode index of the x factor
    std::uint32_t q;    // mode index of the y factor
    double qx, qy, qz;  // wavevector of the y factor, as doubles
  };
  struct OutRange {
    std::uint32_t rep;  // representative mode index (position in modes())
    std::uint32_t begin;
    std::uint32_t end;
  };

  SpacePtr space_;
  std::vector<Entry> entries_;     // grouped by output mode
  std::vector<OutRange> ranges_;   // one per representative
};

// b_m(x, y): bilinear in each argument, output re-projected onto the
// workspace space. Inputs must live on that space.
void bilinear_into(const SpectralField& x, const SpectralField& y,
                   BilinearWorkspace& ws, SpectralField& out);
SpectralField bilinear(const SpectralField& x, const SpectralField& y,
                       BilinearWorkspace& ws);
inline SpectralField bilinear(const SpectralField& x, BilinearWorkspace& ws) {
  return bilinear(x, x, ws);
}

// b_m(x, eta) + b_m(eta, x): the derivative of b_m at x applied to eta,
// fused into one pass over the interaction table.
void bilinear_first_variation_into(const SpectralField& x, const SpectralField& eta,
                                   BilinearWorkspace& ws, SpectralField& out);

// Independent oracle: explicit double sum over all mode pairs, no
// interaction table, no reality shortcut. Small supports only.
SpectralField bilinear_direct(const SpectralField& x, const SpectralField& y);

// Smooth cutoff profile: 1 on [0,1], cubic smoothstep decay on [1,2],
// 0 on [2, inf). theta(1.5) = 1/2 exactly.
double cutoff_profile(double s);

// theta(|Ax| / R) * b_m(x, x).
SpectralField cutoff_bilinear(const SpectralField& x, double radius,
                              BilinearWorkspace& ws);

}  // namespace spde
