#include "spde/bilinear.hpp"

#include <algorithm>
#include <stdexcept>

#include "spde/errors.hpp"

namespace spde {

namespace {

void require_same_space(const SpectralField& f, const BilinearWorkspace& ws,
                        const char* who) {
  if (!f.has_space() || f.space()->cutoff() != ws.space()->cutoff()) {
    throw std::invalid_argument(std::string(who) +
                                ": input not supported on the workspace space");
  }
}

// Leray projection and sign: out_k = -(v - k (k.v)/|k|^2), mirrored to -k.
inline void project_and_store(const GalerkinSpace& space, std::size_t rep,
                              Complex v0, Complex v1, Complex v2, SpectralField& out) {
  const WaveVector k = space.modes()[rep];
  const double inv_mu = 1.0 / space.eigenvalue(rep);
  const Complex kdotv = static_cast<double>(k.x) * v0 +
                        static_cast<double>(k.y) * v1 +
                        static_cast<double>(k.z) * v2;
  const Complex lambda = kdotv * inv_mu;
  const Vec3c b = {-(v0 - static_cast<double>(k.x) * lambda),
                   -(v1 - static_cast<double>(k.y) * lambda),
                   -(v2 - static_cast<double>(k.z) * lambda)};
  out.set_coeff(rep, b);
  out.set_coeff(space.conjugate_index(rep),
                {std::conj(b[0]), std::conj(b[1]), std::conj(b[2])});
}

}  // namespace

BilinearWorkspace::BilinearWorkspace(SpacePtr space) : space_(std::move(space)) {
  const auto& modes = space_->modes();
  for (std::size_t m : space_->representative_indices()) {
    const WaveVector k = modes[m];
    const auto begin = static_cast<std::uint32_t>(entries_.size());
    for (std::size_t p = 0; p < modes.size(); ++p) {
      const WaveVector q = k - modes[p];
      if (q.is_zero()) continue;
      const std::size_t qi = space_->index_of(q);
      if (qi == GalerkinSpace::npos) continue;
      entries_.push_back({static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(qi),
                          static_cast<double>(q.x), static_cast<double>(q.y),
                          static_cast<double>(q.z)});
    }
    ranges_.push_back({static_cast<std::uint32_t>(m), begin,
                       static_cast<std::uint32_t>(entries_.size())});
  }
}

void bilinear_into(const SpectralField& x, const SpectralField& y,
                   BilinearWorkspace& ws, SpectralField& out) {
  require_same_space(x, ws, "bilinear");
  require_same_space(y, ws, "bilinear");
  const GalerkinSpace& space = *ws.space_;
  const Complex* xr = x.raw().data();
  const Complex* yr = y.raw().data();
  const auto* entries = ws.entries_.data();

  for (const auto& range : ws.ranges_) {
    Complex a0(0.0), a1(0.0), a2(0.0);
    for (std::uint32_t e = range.begin; e < range.end; ++e) {
      const auto& en = entries[e];
      // ((x.grad)y)^(k) accumulates i (x^(p) . q) y^(q).
      const Complex dot = xr[3 * en.p] * en.qx + xr[3 * en.p + 1] * en.qy +
                          xr[3 * en.p + 2] * en.qz;
      const Complex s(-dot.imag(), dot.real());
      a0 += s * yr[3 * en.q];
      a1 += s * yr[3 * en.q + 1];
      a2 += s * yr[3 * en.q + 2];
    }
    project_and_store(space, range.rep, a0, a1, a2, out);
  }
}

SpectralField bilinear(const SpectralField& x, const SpectralField& y,
                       BilinearWorkspace& ws) {
  SpectralField out(ws.space());
  bilinear_into(x, y, ws, out);
  return out;
}

void bilinear_first_variation_into(const SpectralField& x, const SpectralField& eta,
                                   BilinearWorkspace& ws, SpectralField& out) {
  require_same_space(x, ws, "bilinear_first_variation");
  require_same_space(eta, ws, "bilinear_first_variation");
  const GalerkinSpace& space = *ws.space_;
  const Complex* xr = x.raw().data();
  const Complex* er = eta.raw().data();
  const auto* entries = ws.entries_.data();

  for (const auto& range : ws.ranges_) {
    Complex a0(0.0), a1(0.0), a2(0.0);
    for (std::uint32_t e = range.begin; e < range.end; ++e) {
      const auto& en = entries[e];
      const Complex dot_x = xr[3 * en.p] * en.qx + xr[3 * en.p + 1] * en.qy +
                            xr[3 * en.p + 2] * en.qz;
      const Complex dot_e = er[3 * en.p] * en.qx + er[3 * en.p + 1] * en.qy +
                            er[3 * en.p + 2] * en.qz;
      const Complex sx(-dot_x.imag(), dot_x.real());
      const Complex se(-dot_e.imag(), dot_e.real());
      a0 += sx * er[3 * en.q] + se * xr[3 * en.q];
      a1 += sx * er[3 * en.q + 1] + se * xr[3 * en.q + 1];
      a2 += sx * er[3 * en.q + 2] + se * xr[3 * en.q + 2];
    }
    project_and_store(space, range.rep, a0, a1, a2, out);
  }
}

SpectralField bilinear_direct(const SpectralField& x, const SpectralField& y) {
  if (x.space()->cutoff() != y.space()->cutoff()) {
    throw std::invalid_argument("bilinear_direct: operands on different spaces");
  }
  const GalerkinSpace& space = *x.space();
  if (space.mode_count() > 800) {
    throw resource_limit_error("bilinear_direct: support too large for the direct sum");
  }

  SpectralField out(x.space());
  const auto& modes = space.modes();
  std::vector<Vec3c> accum(modes.size(),
                           Vec3c{Complex(0.0), Complex(0.0), Complex(0.0)});
  for (std::size_t p = 0; p < modes.size(); ++p) {
    const Vec3c xp = x.coeff(p);
    if (xp[0] == Complex(0.0) && xp[1] == Complex(0.0) && xp[2] == Complex(0.0)) continue;
    for (std::size_t q = 0; q < modes.size(); ++q) {
      const std::size_t k = space.index_of(modes[p] + modes[q]);
      if (k == GalerkinSpace::npos) continue;
      const WaveVector qv = modes[q];
      const Complex dot = xp[0] * static_cast<double>(qv.x) +
                          xp[1] * static_cast<double>(qv.y) +
                          xp[2] * static_cast<double>(qv.z);
      const Complex s = Complex(0.0, 1.0) * dot;
      const Vec3c yq = y.coeff(q);
      accum[k][0] += s * yq[0];
      accum[k][1] += s * yq[1];
      accum[k][2] += s * yq[2];
    }
  }
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const WaveVector k = modes[m];
    const Vec3c& v = accum[m];
    const Complex kdotv = static_cast<double>(k.x) * v[0] +
                          static_cast<double>(k.y) * v[1] +
                          static_cast<double>(k.z) * v[2];
    const Complex lambda = kdotv / space.eigenvalue(m);
    out.set_coeff(m, {-(v[0] - static_cast<double>(k.x) * lambda),
                      -(v[1] - static_cast<double>(k.y) * lambda),
                      -(v[2] - static_cast<double>(k.z) * lambda)});
  }
  return out;
}

double cutoff_profile(double s) {
  if (s <= 1.0) return 1.0;
  if (s >= 2.0) return 0.0;
  const double u = s - 1.0;
  return 1.0 - u * u * (3.0 - 2.0 * u);
}

SpectralField cutoff_bilinear(const SpectralField& x, double radius,
                              BilinearWorkspace& ws) {
  if (!(radius > 0.0)) {
    throw std::invalid_argument("cutoff_bilinear: radius must be positive");
  }
  const double theta = cutoff_profile(sobolev_norm(x, 1.0) / radius);
  SpectralField out(ws.space());
  if (theta == 0.0) return out;
  bilinear_into(x, x, ws, out);
  out *= theta;
  return out;
}

}  // namespace spde
