#pragma once

// Experiment configuration: a JSON document with four sections (space, sde,
// noise, experiment, output), every field defaulted, parameter windows
// enforced at parse time, and a canonical serialization whose FNV-1a hash
// stamps every output artifact.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spde/noise.hpp"
#include "spde/sde.hpp"

namespace spde {

struct ForcingSpec {
  // "zero" or "basis" (a list of real-eigenbasis coordinates).
  std::string type = "zero";
  std::vector<std::pair<int, double>> basis_entries;
};

struct RunConfig {
  struct Space {
    int cutoff = 2;
  } space;

  struct Sde {
    double dt = 1e-3;
    double T = 1.0;
    std::optional<std::uint64_t> seed;  // mandatory for stochastic subcommands
    double guard = 1e6;
    bool enable_bilinear = true;
    int workers = 1;
    std::size_t store_stride = 1;
    std::size_t ledger_stride = 1;
    ForcingSpec forcing;
  } sde;

  struct Noise {
    double alpha = 1.3;
    double c = 0.05;
    double strength = 1.0;
    std::string kappa_variant = "multiplier";  // zero | multiplier | integral_kernel
    double lambda_decay = 1.0;
    int kernel_grid = 12;
    double m1 = 100.0;
    double g = 0.05;
    double r = 1.3;
    double delta = 0.5;
  } noise;

  struct Experiment {
    std::string phi = "norm-sq";
    double t = 0.5;
    double k_damp = 10.0;
    std::size_t samples = 1000;
    std::size_t n_outer = 1000;
    std::size_t n_inner = 1000;
    std::string estimate = "pathwise-energy";  // verify subcommand target
    double t_long = 500.0;
    double burn_in = 50.0;
    double stride = 1.0;
    double epsilon = 0.1;
    double horizon = 3.0;
    std::string target_file;      // control target (binary field file)
    std::string direction = "basis-0";  // gradient direction: basis-<n>
    double gamma = 1.0;
  } experiment;

  struct Output {
    std::string directory = "out";
    std::vector<std::string> formats = {"csv", "json"};
  } output;
};

// Parses a JSON document, resolves defaults and validates the parameter
// windows (alpha in (5/4,3/2), r in (1,3/2), g > 0, delta < 3/2, ...).
// Throws std::invalid_argument with the violated assumption named.
RunConfig parse_config(const std::string& json_text);

// Canonical serialization: fixed key order so that
// parse(serialize(cfg)) == cfg and the hash is stable.
std::string serialize_config(const RunConfig& cfg);

// FNV-1a 64-bit hash of the canonical serialization, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

// Dotted-path override, e.g. apply_override(cfg, "noise.alpha", "1.3").
// Values are parsed as JSON literals where possible.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Builders.
SpacePtr make_space(const RunConfig& cfg);
std::shared_ptr<NoiseOperator> make_noise(const RunConfig& cfg, const SpacePtr& space);
SpectralField make_forcing(const RunConfig& cfg, const SpacePtr& space);
SimConfig make_sim_config(const RunConfig& cfg);

constexpr const char* kVersion = "0.1.0";

}  // namespace spde
