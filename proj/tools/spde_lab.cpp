// spde-lab: command-line driver for the spectral simulation laboratory.
//
//   spde-lab <subcommand> [--config file] [--set key=value ...] [flags]
//
// Subcommands: simulate, estimate, gradient, voc-check, verify, ergodic,
// control, report. Every run resolves one configuration (defaults, file,
// overrides), stamps its hash into all outputs, and writes a manifest.
// Exit codes: 0 all checks pass, 1 check failure, 2 configuration error,
// 3 runtime or blow-up error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "spde/analysis.hpp"
#include "spde/checkpoint.hpp"
#include "spde/config.hpp"
#include "spde/control.hpp"
#include "spde/errors.hpp"
#include "spde/field_io.hpp"
#include "spde/manifest.hpp"
#include "spde/monte_carlo.hpp"

namespace fs = std::filesystem;
using namespace spde;

namespace {

struct RunContext {
  RunConfig cfg;
  SimConfig sim;
  std::string hash;
  fs::path outdir;
  RunManifest manifest;
  std::vector<CsvRow> rows;
  std::vector<std::string> reports_json;

  std::uint64_t seed() const { return cfg.sde.seed.value_or(0); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

void require_seed(const RunContext& ctx) {
  if (!ctx.cfg.sde.seed.has_value()) {
    throw std::invalid_argument(
        "a seed is mandatory for stochastic subcommands (--set sde.seed=<n>)");
  }
}

// Deterministic default initial state derived from the run seed.
SpectralField default_initial_state(const RunContext& ctx) {
  return random_field(ctx.sim.space, ctx.seed() ^ 0x1717f1e1dULL, 0.4, 0.5);
}

void add_check(RunContext& ctx, const std::string& name, bool pass) {
  ctx.manifest.checks.push_back({name, pass});
}

void add_report(RunContext& ctx, const EstimateReport& report) {
  ctx.reports_json.push_back(estimate_report_to_json(report));
  add_check(ctx, report.name, report.pass);
  CsvRow row;
  row.quantity = report.name + ".margin";
  row.value = report.margin;
  row.samples = static_cast<std::int64_t>(report.samples);
  row.seed = ctx.seed();
  row.config_hash = ctx.hash;
  row.check = report.name;
  ctx.rows.push_back(row);
  for (const auto& [key, value] : report.witnesses) {
    CsvRow w;
    w.quantity = report.name + "." + key;
    w.value = value;
    w.samples = static_cast<std::int64_t>(report.samples);
    w.seed = ctx.seed();
    w.config_hash = ctx.hash;
    w.check = report.name;
    ctx.rows.push_back(w);
  }
}

int finalize(RunContext& ctx, int exit_code) {
  ctx.manifest.finished_at = iso8601_now();
  ctx.manifest.exit_code = exit_code;

  std::ostringstream csv;
  csv << csv_header() << '\n';
  for (const auto& row : ctx.rows) csv << csv_line(row) << '\n';
  const fs::path csv_path = ctx.outdir / "rows.csv";
  write_file(csv_path, csv.str());
  ctx.manifest.outputs.push_back(csv_path.string());

  for (std::size_t i = 0; i < ctx.reports_json.size(); ++i) {
    const fs::path path = ctx.outdir / ("report_" + std::to_string(i) + ".json");
    write_file(path, ctx.reports_json[i]);
    ctx.manifest.outputs.push_back(path.string());
  }

  const fs::path manifest_path = ctx.outdir / "manifest.json";
  write_file(manifest_path, manifest_to_json(ctx.manifest));
  std::cout << "manifest: " << manifest_path.string() << " (exit " << exit_code << ")\n";
  return exit_code;
}

// ---------------------------------------------------------------------------

int run_simulate(RunContext& ctx, const std::string& initial_file) {
  require_seed(ctx);
  ctx.sim.record_increments = true;
  ctx.sim.with_convolution = true;
  const SpectralField x0 = initial_file.empty() ? default_initial_state(ctx)
                                                : load_field(initial_file);
  const Trajectory traj = simulate(x0, ctx.sim);

  const fs::path ckpt = ctx.outdir / "trajectory.bin";
  save_trajectory(ckpt.string(), traj);
  ctx.manifest.outputs.push_back(ckpt.string());

  auto scalar = [&](const std::string& name, double value) {
    CsvRow row;
    row.quantity = name;
    row.value = value;
    row.samples = 1;
    row.seed = ctx.seed();
    row.config_hash = ctx.hash;
    row.check = "simulate";
    ctx.rows.push_back(row);
  };
  scalar("final.h_norm", traj.ledger.x_h.back());
  scalar("final.v_norm", traj.ledger.x_v.back());
  scalar("final.a_norm", traj.ledger.x_a.back());
  scalar("final.cum_a2", traj.ledger.cum_a2.back());
  add_check(ctx, "simulate", true);
  return finalize(ctx, 0);
}

int run_estimate(RunContext& ctx, const std::string& initial_file, bool k_sweep) {
  require_seed(ctx);
  const Observable phi = observable_by_name(ctx.cfg.experiment.phi);
  const SpectralField x = initial_file.empty() ? SpectralField(ctx.sim.space)
                                               : load_field(initial_file);
  std::vector<double> k_values{ctx.cfg.experiment.k_damp};
  if (k_sweep) k_values = {1.0, 10.0, 100.0};

  for (double k_damp : k_values) {
    const McEstimate est = estimate_feynman_kac(phi, k_damp, ctx.cfg.experiment.t, x,
                                                ctx.sim, ctx.cfg.experiment.samples);
    std::ostringstream name;
    name << "estimate." << phi.name << "@t=" << ctx.cfg.experiment.t << ";K=" << k_damp;
    ctx.rows.push_back(csv_from_estimate(name.str(), est, ctx.hash, "estimate"));
    add_check(ctx, name.str(), est.valid);
    if (!est.valid) return finalize(ctx, 1);
  }
  return finalize(ctx, 0);
}

int run_gradient(RunContext& ctx, const std::string& initial_file, bool k_sweep) {
  require_seed(ctx);
  const Observable phi = observable_by_name(ctx.cfg.experiment.phi);
  const SpectralField x = initial_file.empty() ? SpectralField(ctx.sim.space)
                                               : load_field(initial_file);
  const std::string& dir = ctx.cfg.experiment.direction;
  if (dir.rfind("basis-", 0) != 0) {
    throw std::invalid_argument("experiment.direction must look like basis-<n>");
  }
  const int n = std::stoi(dir.substr(6));
  if (n < 0 || n >= ctx.sim.space->dim()) {
    throw std::invalid_argument("direction index out of range for this space");
  }
  const SpectralField h = basis_field(ctx.sim.space, static_cast<std::size_t>(n));

  std::vector<double> k_values{ctx.cfg.experiment.k_damp};
  if (k_sweep) k_values = {1.0, 10.0, 100.0};
  for (double k_damp : k_values) {
    const McEstimate est = estimate_bel_gradient(phi, k_damp, ctx.cfg.experiment.t, x,
                                                 h, ctx.sim, ctx.cfg.experiment.samples);
    std::ostringstream name;
    name << "gradient." << phi.name << "." << dir << "@t=" << ctx.cfg.experiment.t
         << ";K=" << k_damp;
    ctx.rows.push_back(csv_from_estimate(name.str(), est, ctx.hash, "gradient"));
    add_check(ctx, name.str(), est.valid);
    if (!est.valid) return finalize(ctx, 1);
  }
  return finalize(ctx, 0);
}

int run_voc_check(RunContext& ctx, const std::string& initial_file) {
  require_seed(ctx);
  const Observable phi = observable_by_name(ctx.cfg.experiment.phi);
  const SpectralField x = initial_file.empty() ? default_initial_state(ctx)
                                               : load_field(initial_file);
  const VocReport voc = check_variation_of_constants(
      phi, ctx.cfg.experiment.k_damp, ctx.cfg.experiment.t, x, ctx.sim,
      ctx.cfg.experiment.n_outer, ctx.cfg.experiment.n_inner);

  auto push = [&](const std::string& name, double value, double se) {
    CsvRow row;
    row.quantity = name;
    row.value = value;
    row.stderr_ = se;
    row.samples = static_cast<std::int64_t>(ctx.cfg.experiment.n_outer);
    row.seed = ctx.seed();
    row.config_hash = ctx.hash;
    row.check = "voc-check";
    ctx.rows.push_back(row);
  };
  push("voc.left", voc.left, voc.left_se);
  push("voc.right", voc.right, voc.right_se);
  push("voc.residual", voc.residual, voc.combined_se);
  const bool pass = voc.within(3.0);
  add_check(ctx, "voc-check", pass);
  return finalize(ctx, pass ? 0 : 1);
}

int run_verify(RunContext& ctx) {
  require_seed(ctx);
  const std::string& which = ctx.cfg.experiment.estimate;
  const std::size_t n = ctx.cfg.experiment.samples;
  const auto& space = ctx.sim.space;
  const SpectralField x0 = default_initial_state(ctx);

  if (which == "pathwise-energy") {
    SimConfig cfg = ctx.sim;
    cfg.with_convolution = true;
    cfg.store_stride = 0;
    std::vector<Trajectory> paths;
    paths.reserve(n);
    for (std::uint64_t rep = 0; rep < n; ++rep) paths.push_back(simulate(x0, cfg, rep));
    add_report(ctx, check_pathwise_energy(paths, {1, 2, 5, 10, 50, 100}));
  } else if (which == "variation-bound") {
    SimConfig cfg = ctx.sim;
    cfg.store_stride = 0;
    const SpectralField h = basis_field(space, 0);
    std::vector<Trajectory> pairs;
    pairs.reserve(n);
    for (std::uint64_t rep = 0; rep < n; ++rep) {
      pairs.push_back(simulate_with_variation(x0, h, cfg, rep));
    }
    add_report(ctx, check_variation_bound(pairs, cfg.variation_gamma, {1, 5, 10, 50}));
  } else if (which == "gradient-scaling") {
    std::vector<double> t_grid;
    for (double t : {0.05, 0.1, 0.2, 0.5, 1.0}) {
      if (t <= ctx.sim.T + 1e-12) t_grid.push_back(t);
    }
    std::vector<GradientScalingProbe> probes;
    probes.push_back({x0, basis_field(space, 0)});
    probes.push_back({SpectralField(space), random_field(space, ctx.seed() ^ 0x9e1, 1.0)});
    add_report(ctx, check_gradient_scaling(observable_by_name(ctx.cfg.experiment.phi),
                                           ctx.cfg.experiment.gamma,
                                           ctx.cfg.experiment.k_damp, t_grid,
                                           std::move(probes), ctx.sim, n));
  } else if (which == "time-modulus") {
    const double beta =
        0.8 * std::min(ctx.cfg.noise.g / 2.0, 0.5);
    add_report(ctx, check_time_modulus(observable_by_name("exp-neg-norm-sq"), x0,
                                       {{0.1, 0.2}, {0.5, 0.6}}, beta, ctx.sim, n));
  } else if (which == "space-modulus") {
    SpectralField other = x0;
    other.axpy(0.05, basis_field(space, 0));
    std::vector<std::pair<SpectralField, SpectralField>> pairs{{x0, other}};
    add_report(ctx, check_space_modulus(observable_by_name("exp-neg-norm-sq"),
                                        ctx.cfg.experiment.t, pairs,
                                        ctx.cfg.experiment.gamma, ctx.sim, n));
  } else if (which == "z-regularity") {
    SimConfig cfg = ctx.sim;
    cfg.with_convolution = true;
    cfg.store_stride = 8;
    const double eps = 0.4 * ctx.cfg.noise.g;
    const double beta = 0.8 * std::min(ctx.cfg.noise.g / 2.0 - eps, 0.5);
    std::vector<std::size_t> gaps{1, 2, 4, 8, 16};
    ZRegularityAccumulator acc(eps, 1, gaps);
    const SpectralField zero(space);
    for (std::uint64_t rep = 0; rep < n; ++rep) acc.add_path(simulate(zero, cfg, rep));
    add_report(ctx, acc.finalize(beta));
  } else if (which == "moment-bounds") {
    SimConfig cfg = ctx.sim;
    cfg.store_stride = 10;
    MomentBoundsAccumulator acc(1.0, cfg.noise ? cfg.noise->trace_bound() : 0.0);
    for (std::uint64_t rep = 0; rep < n; ++rep) acc.add_path(simulate(x0, cfg, rep));
    add_report(ctx, acc.finalize());
  } else if (which == "assumptions") {
    std::vector<SpectralField> states{SpectralField(space), x0,
                                      random_field(space, ctx.seed() ^ 0x5a5a, 1.0)};
    const AssumptionReport report = validate_assumptions(*ctx.sim.noise, states);
    EstimateReport er;
    er.name = "assumptions";
    er.samples = states.size();
    er.seed = ctx.seed();
    er.add("worst_trace", report.worst_trace);
    er.add("worst_inverse", report.worst_inverse);
    er.add("worst_derivative", report.worst_derivative);
    er.add("declared_m1", report.declared_m1);
    er.add("g_margin", report.g_margin);
    er.pass = report.within_declared && report.g_convergent;
    er.margin = std::min({report.declared_m1 - report.worst_trace,
                          report.declared_m1 - report.worst_inverse,
                          report.declared_m1 - report.worst_derivative,
                          report.g_margin});
    er.details = report.g_convergent
                     ? "trace/inverse/derivative witnesses vs declared bound"
                     : "g too large: infinite-cutoff trace diverges";
    add_report(ctx, er);
  } else if (which == "chapman-kolmogorov") {
    add_report(ctx, check_chapman_kolmogorov(
                        {"cos-coord-0", "sin-coord-1", "cos-sum-01"},
                        ctx.cfg.experiment.t, ctx.cfg.experiment.t, x0, ctx.sim, n,
                        ctx.cfg.experiment.n_outer, ctx.cfg.experiment.n_inner));
  } else if (which == "galerkin-consistency") {
    add_report(ctx, galerkin_consistency(observable_by_name(ctx.cfg.experiment.phi),
                                         ctx.cfg.experiment.t, x0,
                                         {ctx.cfg.space.cutoff, ctx.cfg.space.cutoff + 1},
                                         ctx.sim, n));
  } else {
    throw std::invalid_argument(
        "unknown estimate '" + which +
        "' (pathwise-energy, variation-bound, gradient-scaling, time-modulus, "
        "space-modulus, z-regularity, moment-bounds, assumptions, "
        "chapman-kolmogorov, galerkin-consistency)");
  }
  return finalize(ctx, ctx.manifest.all_pass() ? 0 : 1);
}

int run_ergodic(RunContext& ctx) {
  require_seed(ctx);
  const std::vector<SpectralField> initial_conditions{
      SpectralField(ctx.sim.space), default_initial_state(ctx)};
  const ErgodicResult result = ergodic_averages(
      initial_conditions, ctx.sim, ctx.cfg.experiment.t_long,
      ctx.cfg.experiment.burn_in, ctx.cfg.experiment.stride);
  add_report(ctx, result.report);
  return finalize(ctx, result.report.pass ? 0 : 1);
}

int run_control(RunContext& ctx, const std::string& target_file,
                const std::string& start_file, std::size_t reach_samples) {
  const SpectralField target = target_file.empty() ? SpectralField(ctx.sim.space)
                                                   : load_field(target_file);
  const SpectralField start = start_file.empty() ? default_initial_state(ctx)
                                                 : load_field(start_file);
  const ControlPath cp =
      build_control(start, target, ctx.cfg.experiment.horizon, ctx.sim);
  const fs::path ckpt = ctx.outdir / "control.bin";
  save_control_path(ckpt.string(), cp);
  ctx.manifest.outputs.push_back(ckpt.string());

  const ReachabilityReport report =
      verify_reachability(cp, start, target, ctx.cfg.experiment.epsilon, ctx.sim);

  EstimateReport er;
  er.name = "reachability";
  er.seed = ctx.seed();
  er.add("distance", report.distance);
  er.add("epsilon", report.epsilon);
  er.add("sup_graph_norm", report.sup_graph_norm);
  er.add("radius", report.radius);
  er.add("t_star", cp.t_star);
  er.add("cutoff_inactive", report.cutoff_inactive ? 1.0 : 0.0);
  er.pass = report.hit && !report.guard_breached;
  er.margin = report.epsilon - report.distance;
  er.details = report.guard_breached
                   ? "guard breached at t=" + std::to_string(report.first_breach_time)
                   : "terminal D(A) distance " + std::to_string(report.distance);
  add_report(ctx, er);

  if (reach_samples > 0) {
    require_seed(ctx);
    const ReachProbability probability = stochastic_reach_probability(
        cp, start, target, ctx.cfg.experiment.epsilon, ctx.sim, reach_samples);
    CsvRow row = csv_from_estimate("reach.frequency", probability.estimate, ctx.hash,
                                   "reachability");
    ctx.rows.push_back(row);
    CsvRow lb;
    lb.quantity = "reach.lower_confidence";
    lb.value = probability.lower_confidence;
    lb.samples = probability.trials;
    lb.seed = ctx.seed();
    lb.config_hash = ctx.hash;
    lb.check = "reachability";
    ctx.rows.push_back(lb);
  }
  return finalize(ctx, er.pass ? 0 : 1);
}

int run_report(RunContext& ctx, const std::vector<std::string>& manifest_files) {
  std::vector<RunManifest> manifests;
  for (const auto& path : manifest_files) {
    manifests.push_back(manifest_from_json(read_file(path)));
  }
  const std::string table = summarize_manifests(manifests);
  std::cout << table;
  write_file(ctx.outdir / "summary.txt", table);
  write_file(ctx.outdir / "summary.json", summarize_manifests_json(manifests));
  ctx.manifest.outputs.push_back((ctx.outdir / "summary.json").string());
  bool all_pass = true;
  for (const auto& m : manifests) {
    all_pass = all_pass && m.all_pass();
  }
  add_check(ctx, "report-aggregation", all_pass);
  return finalize(ctx, all_pass ? 0 : 1);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral stochastic Navier-Stokes laboratory"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_file;
  std::vector<std::string> overrides;
  std::string output_dir;
  app.add_option("--config", config_file, "JSON configuration file")
      ->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "dotted override, e.g. --set noise.alpha=1.3");
  app.add_option("--output", output_dir, "output directory (overrides config)");

  // Shared experiment flags.
  std::string phi, estimate_name, target_file, start_file, initial_file, direction;
  double t = -1.0, k_damp = -1.0, t_long = -1.0, burn_in = -1.0, stride = -1.0;
  double epsilon = -1.0, horizon = -1.0;
  std::int64_t samples = -1, seed = -1;
  std::size_t reach_samples = 0;
  bool k_sweep = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--phi", phi, "observable name");
    sub->add_option("--t", t, "time horizon of the estimate");
    sub->add_option("--k-damp", k_damp, "damping constant K");
    sub->add_option("--samples", samples, "Monte Carlo replicas");
    sub->add_option("--seed", seed, "stream seed");
  };

  CLI::App* simulate_cmd = app.add_subcommand("simulate", "integrate one trajectory");
  simulate_cmd->add_option("--seed", seed, "stream seed");
  simulate_cmd->add_option("--initial", initial_file, "initial state (field file)");

  CLI::App* estimate_cmd = app.add_subcommand("estimate", "semigroup / damped estimate");
  add_common(estimate_cmd);
  estimate_cmd->add_option("--initial", initial_file, "initial state (field file)");
  estimate_cmd->add_flag("--k-sweep", k_sweep, "sweep K over {1, 10, 100}");

  CLI::App* gradient_cmd = app.add_subcommand("gradient", "directional derivative");
  add_common(gradient_cmd);
  gradient_cmd->add_option("--initial", initial_file, "initial state (field file)");
  gradient_cmd->add_option("--direction", direction, "direction, e.g. basis-0");
  gradient_cmd->add_flag("--k-sweep", k_sweep, "sweep K over {1, 10, 100}");

  CLI::App* voc_cmd = app.add_subcommand("voc-check", "variation-of-constants residual");
  add_common(voc_cmd);
  voc_cmd->add_option("--initial", initial_file, "initial state (field file)");

  CLI::App* verify_cmd = app.add_subcommand("verify", "estimate verification harness");
  verify_cmd->add_option("--estimate", estimate_name, "harness name");
  verify_cmd->add_option("--samples", samples, "sample budget");
  verify_cmd->add_option("--seed", seed, "stream seed");

  CLI::App* ergodic_cmd = app.add_subcommand("ergodic", "long-run averaging");
  ergodic_cmd->add_option("--t-long", t_long, "chain horizon");
  ergodic_cmd->add_option("--burn-in", burn_in, "burn-in time");
  ergodic_cmd->add_option("--stride", stride, "thinning stride");
  ergodic_cmd->add_option("--seed", seed, "stream seed");

  CLI::App* control_cmd = app.add_subcommand("control", "deterministic steering");
  control_cmd->add_option("--target", target_file, "target state (field file)");
  control_cmd->add_option("--start", start_file, "start state (field file)");
  control_cmd->add_option("--epsilon", epsilon, "target ball radius in D(A)");
  control_cmd->add_option("--horizon", horizon, "steering horizon T");
  control_cmd->add_option("--reach-samples", reach_samples,
                          "also estimate the stochastic hit probability");
  control_cmd->add_option("--seed", seed, "stream seed");

  CLI::App* report_cmd = app.add_subcommand("report", "aggregate manifests");
  std::vector<std::string> manifest_files;
  report_cmd->add_option("manifests", manifest_files, "manifest.json files");

  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    sub->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);

  try {
    RunContext ctx;
    ctx.cfg = parse_config(config_file.empty() ? "" : read_file(config_file));
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
      }
      apply_override(ctx.cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    // Flag-level overrides win over the config document.
    if (!phi.empty()) ctx.cfg.experiment.phi = phi;
    if (t >= 0.0) ctx.cfg.experiment.t = t;
    if (k_damp >= 0.0) ctx.cfg.experiment.k_damp = k_damp;
    if (samples >= 0) ctx.cfg.experiment.samples = static_cast<std::size_t>(samples);
    if (seed >= 0) ctx.cfg.sde.seed = static_cast<std::uint64_t>(seed);
    if (!estimate_name.empty()) ctx.cfg.experiment.estimate = estimate_name;
    if (t_long >= 0.0) ctx.cfg.experiment.t_long = t_long;
    if (burn_in >= 0.0) ctx.cfg.experiment.burn_in = burn_in;
    if (stride >= 0.0) ctx.cfg.experiment.stride = stride;
    if (epsilon >= 0.0) ctx.cfg.experiment.epsilon = epsilon;
    if (horizon >= 0.0) ctx.cfg.experiment.horizon = horizon;
    if (!direction.empty()) ctx.cfg.experiment.direction = direction;
    if (!output_dir.empty()) ctx.cfg.output.directory = output_dir;

    // The estimate horizon must be reachable within the simulation horizon.
    if (ctx.cfg.experiment.t > ctx.cfg.sde.T) ctx.cfg.sde.T = ctx.cfg.experiment.t;

    ctx.sim = make_sim_config(ctx.cfg);
    ctx.hash = config_hash(ctx.cfg);
    ctx.outdir = fs::path(ctx.cfg.output.directory);
    // SPDE_LAB_OUTPUT_ROOT prefixes relative output directories.
    if (const char* root = std::getenv("SPDE_LAB_OUTPUT_ROOT");
        root != nullptr && ctx.outdir.is_relative()) {
      ctx.outdir = fs::path(root) / ctx.outdir;
    }
    fs::create_directories(ctx.outdir);
    write_file(ctx.outdir / "config.json", serialize_config(ctx.cfg));

    ctx.manifest.subcommand = app.get_subcommands().front()->get_name();
    ctx.manifest.config_hash = ctx.hash;
    ctx.manifest.version = kVersion;
    ctx.manifest.seed = ctx.seed();
    ctx.manifest.started_at = iso8601_now();

    if (simulate_cmd->parsed()) return run_simulate(ctx, initial_file);
    if (estimate_cmd->parsed()) return run_estimate(ctx, initial_file, k_sweep);
    if (gradient_cmd->parsed()) return run_gradient(ctx, initial_file, k_sweep);
    if (voc_cmd->parsed()) return run_voc_check(ctx, initial_file);
    if (verify_cmd->parsed()) return run_verify(ctx);
    if (ergodic_cmd->parsed()) return run_ergodic(ctx);
    if (control_cmd->parsed()) {
      return run_control(ctx, target_file, start_file, reach_samples);
    }
    if (report_cmd->parsed()) return run_report(ctx, manifest_files);
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const blow_up_error& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 3;
  } catch (const degenerate_noise_error& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 3;
  } catch (const construction_failed_error& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 3;
  } catch (const resource_limit_error& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 3;
  }
}
