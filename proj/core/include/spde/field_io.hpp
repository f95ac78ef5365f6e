#pragma once

// SpectralField serialization. Both layouts are flat record streams of
// (wavevector triple, 6 reals) and round-trip exactly:
//
//   JSON:   {"cutoff": m, "modes": [{"k": [kx,ky,kz],
//            "re": [r0,r1,r2], "im": [i0,i1,i2]}, ...]}
//
//   binary: magic "SPDEFLD1" (8 bytes), int32 cutoff, uint64 record count,
//           then per record: int32 k[3], float64 re[3], float64 im[3],
//           all little-endian.

#include <iosfwd>
#include <string>

#include "spde/spectral_space.hpp"

namespace spde {

std::string field_to_json(const SpectralField& field);
SpectralField field_from_json(const std::string& text);

void write_field_binary(std::ostream& out, const SpectralField& field);
SpectralField read_field_binary(std::istream& in);

void save_field(const std::string& path, const SpectralField& field);
SpectralField load_field(const std::string& path);

}  // namespace spde
