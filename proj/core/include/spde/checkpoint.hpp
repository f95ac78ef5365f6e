#pragma once

// Binary checkpoints for trajectories and control paths, resume-capable and
// byte-deterministic.
//
// Trajectory layout (little-endian):
//   magic "SPDETRJ1", int32 cutoff, float64 dt, uint64 steps, uint64 seed,
//   uint64 replica, float64 variation_gamma, uint32 flags
//   (1 = variation, 2 = convolution, 4 = increments),
//   uint64 stored_count, stored times, stored state fields
//   (mode_count * 6 float64 each, in the space's mode order),
//   [variation fields], [convolution fields],
//   [uint64 dim, steps * dim float64 increments],
//   uint64 ledger_rows, then the ledger columns that are present.
//
// Because the per-step noise streams are derived statelessly from
// (seed, replica, step), a checkpointed run can be resumed or replayed
// without any generator state.

#include <string>

#include "spde/control.hpp"
#include "spde/sde.hpp"

namespace spde {

void save_trajectory(const std::string& path, const Trajectory& traj);
Trajectory load_trajectory(const std::string& path);

void save_control_path(const std::string& path, const ControlPath& cp);
ControlPath load_control_path(const std::string& path);

}  // namespace spde
