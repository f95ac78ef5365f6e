#include "spde/config.hpp"

#include <stdexcept>

#include <json.hpp>

namespace spde {

namespace {

using Json = nlohmann::ordered_json;

template <typename T>
void read_into(const nlohmann::json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

void validate(const RunConfig& cfg) {
  if (cfg.space.cutoff < 1) {
    throw std::invalid_argument("config: space.cutoff must be >= 1 (empty space)");
  }
  if (!(cfg.sde.dt > 0.0)) throw std::invalid_argument("config: sde.dt must be positive");
  if (cfg.sde.T < 0.0) throw std::invalid_argument("config: sde.T must be nonnegative");
  if (!(cfg.noise.alpha > 1.25 && cfg.noise.alpha < 1.5)) {
    throw std::invalid_argument(
        "config: alpha outside (5/4,3/2), see noise assumptions");
  }
  if (!(cfg.noise.r > 1.0 && cfg.noise.r < 1.5)) {
    throw std::invalid_argument("config: r outside (1,3/2), see noise assumptions");
  }
  if (!(cfg.noise.g > 0.0)) {
    throw std::invalid_argument("config: g must be positive, see noise assumptions");
  }
  if (!(cfg.noise.delta < 1.5)) {
    throw std::invalid_argument("config: delta must be < 3/2, see noise assumptions");
  }
  if (cfg.noise.c < 0.0) throw std::invalid_argument("config: noise.c must be >= 0");
  if (!(cfg.noise.strength > 0.0)) {
    throw std::invalid_argument("config: noise.strength must be positive");
  }
  if (!(cfg.noise.lambda_decay > 0.5)) {
    throw std::invalid_argument(
        "config: kappa.lambda_decay must exceed 1/2 for a square-summable sequence");
  }
  if (cfg.noise.kappa_variant != "zero" && cfg.noise.kappa_variant != "multiplier" &&
      cfg.noise.kappa_variant != "integral_kernel") {
    throw std::invalid_argument("config: unknown kappa.variant");
  }
  if (cfg.sde.workers < 1) throw std::invalid_argument("config: sde.workers must be >= 1");
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  RunConfig cfg;
  nlohmann::json doc;
  if (!json_text.empty()) {
    try {
      doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::invalid_argument(std::string("config parse error: ") + e.what());
    }
  } else {
    doc = nlohmann::json::object();
  }

  if (doc.contains("space")) {
    read_into(doc["space"], "cutoff", cfg.space.cutoff);
  }
  if (doc.contains("sde")) {
    const auto& s = doc["sde"];
    read_into(s, "dt", cfg.sde.dt);
    read_into(s, "T", cfg.sde.T);
    if (s.contains("seed")) cfg.sde.seed = s.at("seed").get<std::uint64_t>();
    read_into(s, "guard", cfg.sde.guard);
    read_into(s, "enable_bilinear", cfg.sde.enable_bilinear);
    read_into(s, "workers", cfg.sde.workers);
    read_into(s, "store_stride", cfg.sde.store_stride);
    read_into(s, "ledger_stride", cfg.sde.ledger_stride);
    if (s.contains("forcing")) {
      const auto& f = s["forcing"];
      read_into(f, "type", cfg.sde.forcing.type);
      if (f.contains("entries")) {
        for (const auto& e : f["entries"]) {
          cfg.sde.forcing.basis_entries.emplace_back(e.at("n").get<int>(),
                                                     e.at("value").get<double>());
        }
      }
    }
  }
  if (doc.contains("noise")) {
    const auto& n = doc["noise"];
    read_into(n, "alpha", cfg.noise.alpha);
    read_into(n, "c", cfg.noise.c);
    read_into(n, "strength", cfg.noise.strength);
    read_into(n, "m1", cfg.noise.m1);
    read_into(n, "g", cfg.noise.g);
    read_into(n, "r", cfg.noise.r);
    read_into(n, "delta", cfg.noise.delta);
    if (n.contains("kappa")) {
      const auto& k = n["kappa"];
      read_into(k, "variant", cfg.noise.kappa_variant);
      read_into(k, "lambda_decay", cfg.noise.lambda_decay);
      read_into(k, "kernel_grid", cfg.noise.kernel_grid);
    }
  }
  if (doc.contains("experiment")) {
    const auto& e = doc["experiment"];
    read_into(e, "phi", cfg.experiment.phi);
    read_into(e, "t", cfg.experiment.t);
    read_into(e, "k_damp", cfg.experiment.k_damp);
    read_into(e, "samples", cfg.experiment.samples);
    read_into(e, "n_outer", cfg.experiment.n_outer);
    read_into(e, "n_inner", cfg.experiment.n_inner);
    read_into(e, "estimate", cfg.experiment.estimate);
    read_into(e, "t_long", cfg.experiment.t_long);
    read_into(e, "burn_in", cfg.experiment.burn_in);
    read_into(e, "stride", cfg.experiment.stride);
    read_into(e, "epsilon", cfg.experiment.epsilon);
    read_into(e, "horizon", cfg.experiment.horizon);
    read_into(e, "target_file", cfg.experiment.target_file);
    read_into(e, "direction", cfg.experiment.direction);
    read_into(e, "gamma", cfg.experiment.gamma);
  }
  if (doc.contains("output")) {
    const auto& o = doc["output"];
    read_into(o, "directory", cfg.output.directory);
    read_into(o, "formats", cfg.output.formats);
  }

  validate(cfg);
  return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
  Json doc;
  doc["space"]["cutoff"] = cfg.space.cutoff;

  auto& s = doc["sde"];
  s["dt"] = cfg.sde.dt;
  s["T"] = cfg.sde.T;
  if (cfg.sde.seed) s["seed"] = *cfg.sde.seed;
  s["guard"] = cfg.sde.guard;
  s["enable_bilinear"] = cfg.sde.enable_bilinear;
  s["workers"] = cfg.sde.workers;
  s["store_stride"] = cfg.sde.store_stride;
  s["ledger_stride"] = cfg.sde.ledger_stride;
  s["forcing"]["type"] = cfg.sde.forcing.type;
  if (!cfg.sde.forcing.basis_entries.empty()) {
    auto& entries = s["forcing"]["entries"];
    entries = Json::array();
    for (const auto& [n, value] : cfg.sde.forcing.basis_entries) {
      entries.push_back({{"n", n}, {"value", value}});
    }
  }

  auto& n = doc["noise"];
  n["alpha"] = cfg.noise.alpha;
  n["c"] = cfg.noise.c;
  n["strength"] = cfg.noise.strength;
  n["kappa"]["variant"] = cfg.noise.kappa_variant;
  n["kappa"]["lambda_decay"] = cfg.noise.lambda_decay;
  n["kappa"]["kernel_grid"] = cfg.noise.kernel_grid;
  n["m1"] = cfg.noise.m1;
  n["g"] = cfg.noise.g;
  n["r"] = cfg.noise.r;
  n["delta"] = cfg.noise.delta;

  auto& e = doc["experiment"];
  e["phi"] = cfg.experiment.phi;
  e["t"] = cfg.experiment.t;
  e["k_damp"] = cfg.experiment.k_damp;
  e["samples"] = cfg.experiment.samples;
  e["n_outer"] = cfg.experiment.n_outer;
  e["n_inner"] = cfg.experiment.n_inner;
  e["estimate"] = cfg.experiment.estimate;
  e["t_long"] = cfg.experiment.t_long;
  e["burn_in"] = cfg.experiment.burn_in;
  e["stride"] = cfg.experiment.stride;
  e["epsilon"] = cfg.experiment.epsilon;
  e["horizon"] = cfg.experiment.horizon;
  e["target_file"] = cfg.experiment.target_file;
  e["direction"] = cfg.experiment.direction;
  e["gamma"] = cfg.experiment.gamma;

  auto& o = doc["output"];
  o["directory"] = cfg.output.directory;
  o["formats"] = cfg.output.formats;

  return doc.dump(2);
}

std::string config_hash(const RunConfig& cfg) {
  // Worker count and output destinations are execution details: results are
  // identical at any worker count, so they stay out of the experiment hash.
  RunConfig hashed = cfg;
  hashed.sde.workers = 1;
  hashed.output = RunConfig::Output{};
  const std::string canonical = serialize_config(hashed);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  // Rebuild through JSON so overrides share the parse-time validation.
  nlohmann::json doc = nlohmann::json::parse(serialize_config(cfg));
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  std::vector<std::string> parts;
  while (true) {
    const std::size_t dot = key.find('.', start);
    if (dot == std::string::npos) {
      parts.push_back(key.substr(start));
      break;
    }
    parts.push_back(key.substr(start, dot - start));
    start = dot + 1;
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    node = &(*node)[parts[i]];
  }
  nlohmann::json parsed_value;
  try {
    parsed_value = nlohmann::json::parse(value);
  } catch (const nlohmann::json::parse_error&) {
    parsed_value = value;  // fall back to a string literal
  }
  (*node)[parts.back()] = parsed_value;
  cfg = parse_config(doc.dump());
}

SpacePtr make_space(const RunConfig& cfg) { return build_space(cfg.space.cutoff); }

std::shared_ptr<NoiseOperator> make_noise(const RunConfig& cfg, const SpacePtr& space) {
  KappaSpec kappa;
  if (cfg.noise.kappa_variant == "zero") {
    kappa.variant = KappaSpec::Variant::zero;
  } else if (cfg.noise.kappa_variant == "multiplier") {
    kappa.variant = KappaSpec::Variant::multiplier;
  } else {
    kappa.variant = KappaSpec::Variant::integral_kernel;
  }
  kappa.lambda_decay = cfg.noise.lambda_decay;
  kappa.kernel_grid = cfg.noise.kernel_grid;
  NoiseAssumptionDecl decl;
  decl.m1 = cfg.noise.m1;
  decl.g = cfg.noise.g;
  decl.r = cfg.noise.r;
  decl.delta = cfg.noise.delta;
  return std::make_shared<NoiseOperator>(space, cfg.noise.alpha, cfg.noise.c, kappa,
                                         decl, cfg.noise.strength);
}

SpectralField make_forcing(const RunConfig& cfg, const SpacePtr& space) {
  SpectralField f(space);
  if (cfg.sde.forcing.type == "zero") return f;
  if (cfg.sde.forcing.type != "basis") {
    throw std::invalid_argument("config: unknown forcing.type (zero | basis)");
  }
  std::vector<double> coords(space->dim(), 0.0);
  for (const auto& [n, value] : cfg.sde.forcing.basis_entries) {
    if (n < 0 || n >= space->dim()) {
      throw std::invalid_argument("config: forcing basis index out of range");
    }
    coords[n] = value;
  }
  space->from_coords(coords, f);
  return f;
}

SimConfig make_sim_config(const RunConfig& cfg) {
  SimConfig sim;
  sim.space = make_space(cfg);
  sim.dt = cfg.sde.dt;
  sim.T = cfg.sde.T;
  sim.noise = make_noise(cfg, sim.space);
  const SpectralField f = make_forcing(cfg, sim.space);
  if (!f.is_zero()) sim.forcing = f;
  sim.seed = cfg.sde.seed.value_or(0);
  sim.guard = cfg.sde.guard;
  sim.enable_bilinear = cfg.sde.enable_bilinear;
  sim.store_stride = cfg.sde.store_stride;
  sim.ledger_stride = cfg.sde.ledger_stride;
  sim.workers = cfg.sde.workers;
  sim.variation_gamma = cfg.experiment.gamma;
  return sim;
}

}  // namespace spde
