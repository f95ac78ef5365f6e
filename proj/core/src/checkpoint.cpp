#include "spde/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace spde {

namespace {

constexpr char kTrajMagic[8] = {'S', 'P', 'D', 'E', 'T', 'R', 'J', '1'};
constexpr char kCtlMagic[8] = {'S', 'P', 'D', 'E', 'C', 'T', 'L', '1'};

constexpr std::uint32_t kFlagVariation = 1;
constexpr std::uint32_t kFlagConvolution = 2;
constexpr std::uint32_t kFlagIncrements = 4;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated stream");
  return v;
}

void put_field(std::ostream& out, const SpectralField& f) {
  const auto raw = f.raw();
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(Complex)));
}

void get_field(std::istream& in, SpectralField& f) {
  auto raw = f.raw();
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(Complex)));
  if (!in) throw std::runtime_error("checkpoint: truncated field data");
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
  put<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_doubles(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated array");
  return v;
}

}  // namespace

void save_trajectory(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_trajectory: cannot open " + path);

  out.write(kTrajMagic, sizeof(kTrajMagic));
  put<std::int32_t>(out, traj.cutoff);
  put<double>(out, traj.dt);
  put<std::uint64_t>(out, traj.steps);
  put<std::uint64_t>(out, traj.seed);
  put<std::uint64_t>(out, traj.replica);
  put<double>(out, traj.variation_gamma);
  std::uint32_t flags = 0;
  if (!traj.variation.empty()) flags |= kFlagVariation;
  if (!traj.convolution.empty()) flags |= kFlagConvolution;
  if (!traj.increments.empty()) flags |= kFlagIncrements;
  put<std::uint32_t>(out, flags);

  put<std::uint64_t>(out, traj.states.size());
  put_doubles(out, traj.times);
  for (const auto& f : traj.states) put_field(out, f);
  for (const auto& f : traj.variation) put_field(out, f);
  for (const auto& f : traj.convolution) put_field(out, f);

  if (!traj.increments.empty()) {
    put<std::uint64_t>(out, traj.increments.front().size());
    for (const auto& step : traj.increments) {
      out.write(reinterpret_cast<const char*>(step.data()),
                static_cast<std::streamsize>(step.size() * sizeof(double)));
    }
  }

  put_doubles(out, traj.ledger.t);
  put_doubles(out, traj.ledger.x_h);
  put_doubles(out, traj.ledger.x_v);
  put_doubles(out, traj.ledger.x_a);
  put_doubles(out, traj.ledger.cum_a2);
  put_doubles(out, traj.ledger.z_a);
  put_doubles(out, traj.ledger.eta_g);
  put_doubles(out, traj.ledger.eta_gp);
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_trajectory: cannot open " + path);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kTrajMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("load_trajectory: bad magic");
  }

  Trajectory traj;
  traj.cutoff = get<std::int32_t>(in);
  traj.dt = get<double>(in);
  traj.steps = get<std::uint64_t>(in);
  traj.seed = get<std::uint64_t>(in);
  traj.replica = get<std::uint64_t>(in);
  traj.variation_gamma = get<double>(in);
  const auto flags = get<std::uint32_t>(in);

  const auto space = build_space(traj.cutoff);
  const auto stored = get<std::uint64_t>(in);
  traj.times = get_doubles(in);
  traj.states.assign(stored, SpectralField(space));
  for (auto& f : traj.states) get_field(in, f);
  if (flags & kFlagVariation) {
    traj.variation.assign(stored, SpectralField(space));
    for (auto& f : traj.variation) get_field(in, f);
  }
  if (flags & kFlagConvolution) {
    traj.convolution.assign(stored, SpectralField(space));
    for (auto& f : traj.convolution) get_field(in, f);
  }
  if (flags & kFlagIncrements) {
    const auto dim = get<std::uint64_t>(in);
    traj.increments.assign(traj.steps, std::vector<double>(dim));
    for (auto& step : traj.increments) {
      in.read(reinterpret_cast<char*>(step.data()),
              static_cast<std::streamsize>(dim * sizeof(double)));
      if (!in) throw std::runtime_error("load_trajectory: truncated increments");
    }
  }

  traj.ledger.t = get_doubles(in);
  traj.ledger.x_h = get_doubles(in);
  traj.ledger.x_v = get_doubles(in);
  traj.ledger.x_a = get_doubles(in);
  traj.ledger.cum_a2 = get_doubles(in);
  traj.ledger.z_a = get_doubles(in);
  traj.ledger.eta_g = get_doubles(in);
  traj.ledger.eta_gp = get_doubles(in);
  return traj;
}

void save_control_path(const std::string& path, const ControlPath& cp) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_control_path: cannot open " + path);

  out.write(kCtlMagic, sizeof(kCtlMagic));
  put<std::int32_t>(out, cp.cutoff);
  put<double>(out, cp.dt);
  put<double>(out, cp.t_star);
  put<double>(out, cp.horizon);
  put<double>(out, cp.radius);
  put<std::uint64_t>(out, cp.total_steps);
  put<std::uint64_t>(out, cp.n_star);
  put_field(out, cp.pivot);
  put_field(out, cp.target);
  put_doubles(out, cp.sample_times);
  put<std::uint64_t>(out, cp.xbar_samples.size());
  for (const auto& f : cp.xbar_samples) put_field(out, f);
}

ControlPath load_control_path(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_control_path: cannot open " + path);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCtlMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("load_control_path: bad magic");
  }

  ControlPath cp;
  cp.cutoff = get<std::int32_t>(in);
  cp.dt = get<double>(in);
  cp.t_star = get<double>(in);
  cp.horizon = get<double>(in);
  cp.radius = get<double>(in);
  cp.total_steps = get<std::uint64_t>(in);
  cp.n_star = get<std::uint64_t>(in);
  const auto space = build_space(cp.cutoff);
  cp.pivot = SpectralField(space);
  get_field(in, cp.pivot);
  cp.target = SpectralField(space);
  get_field(in, cp.target);
  cp.sample_times = get_doubles(in);
  const auto nx = get<std::uint64_t>(in);
  cp.xbar_samples.assign(nx, SpectralField(space));
  for (auto& f : cp.xbar_samples) get_field(in, f);
  return cp;
}

}  // namespace spde
