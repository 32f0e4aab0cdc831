#include "twofluid/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "twofluid/errors.hpp"
#include "twofluid/util.hpp"

namespace twofluid {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("value for '" + key + "' is not a number: '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(x);
  } catch (const std::exception&) {
    throw ConfigError("value for '" + key + "' is not an integer: '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::uint64_t>(x);
  } catch (const std::exception&) {
    throw ConfigError("value for '" + key + "' is not an unsigned integer: '" +
                      v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string w = lower(v);
  if (w == "true" || w == "1" || w == "yes" || w == "on") return true;
  if (w == "false" || w == "0" || w == "no" || w == "off") return false;
  throw ConfigError("value for '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& key,
                                      const std::string& v) {
  std::vector<double> out;
  for (const auto& piece : split(v, ',')) out.push_back(parse_double(key, piece));
  return out;
}

// Multi-indices are written as digit strings, one per index, separated by
// semicolons: "10; 20" means α = (1,0) and (2,0).
std::vector<std::array<int, 3>> parse_alpha_list(const std::string& key,
                                                 const std::string& v) {
  std::vector<std::array<int, 3>> out;
  for (const auto& piece : split(v, ';')) {
    if (piece.empty() || piece.size() > 3)
      throw ConfigError("multi-index in '" + key +
                        "' must be 1-3 digits: '" + piece + "'");
    std::array<int, 3> a{0, 0, 0};
    for (std::size_t i = 0; i < piece.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(piece[i])))
        throw ConfigError("multi-index in '" + key +
                          "' must be digits only: '" + piece + "'");
      a[i] = piece[i] - '0';
    }
    out.push_back(a);
  }
  return out;
}

void apply_closure(ClosureSpec& c, const std::string& key,
                   const std::string& v) {
  if (key == "gamma_plus") c.gamma_plus = parse_double(key, v);
  else if (key == "gamma_minus") c.gamma_minus = parse_double(key, v);
  else if (key == "amp_plus") c.amp_plus = parse_double(key, v);
  else if (key == "amp_minus") c.amp_minus = parse_double(key, v);
  else if (key == "alpha_plus_bar") c.alpha_plus_bar = parse_double(key, v);
  else if (key == "fprime1") c.fprime1 = parse_double(key, v);
  else if (key == "profile") {
    const std::string w = lower(v);
    if (w != "constant" && w != "power")
      throw ConfigError("closure profile must be 'constant' or 'power', got '" +
                        v + "'");
    c.profile = w;
  } else if (key == "profile_exponent") c.profile_exponent = parse_double(key, v);
  else throw ConfigError("unknown key '" + key + "' in section [closure]");
}

void apply_grid(GridSpec& g, const std::string& key, const std::string& v) {
  if (key == "dim") g.dim = parse_int(key, v);
  else if (key == "n") g.n = parse_int(key, v);
  else if (key == "lambda") g.lambda = parse_double(key, v);
  else throw ConfigError("unknown key '" + key + "' in section [grid]");
}

void apply_integrator(IntegratorConfig& it, const std::string& key,
                      const std::string& v) {
  if (key == "scheme") {
    const std::string w = lower(v);
    if (w == "etd1") it.scheme = Scheme::ETD1;
    else if (w == "etdrk2") it.scheme = Scheme::ETDRK2;
    else throw ConfigError("integrator scheme must be 'etd1' or 'etdrk2', got '" +
                           v + "'");
  } else if (key == "dt") it.dt = parse_double(key, v);
  else if (key == "cfl_safety") it.cfl_safety = parse_double(key, v);
  else if (key == "snapshot_every") it.snapshot_every = parse_int(key, v);
  else if (key == "balanced_mass") it.balanced_mass = parse_bool(key, v);
  else if (key == "linear_only") it.linear_only = parse_bool(key, v);
  else if (key == "blowup_threshold") it.blowup_threshold = parse_double(key, v);
  else if (key == "r_floor") it.r_floor = parse_double(key, v);
  else if (key == "r_ceil") it.r_ceil = parse_double(key, v);
  else throw ConfigError("unknown key '" + key + "' in section [integrator]");
}

void apply_experiment(ExperimentConfig& e, const std::string& key,
                      const std::string& v) {
  if (key == "kind") {
    const std::string w = lower(v);
    if (w != "limit-sweep" && w != "decay-sweep" && w != "dispersion" &&
        w != "stability-scan")
      throw ConfigError(
          "experiment kind must be one of limit-sweep, decay-sweep, "
          "dispersion, stability-scan; got '" + v + "'");
    e.kind = w;
  } else if (key == "label") e.label = trim(v);
  else if (key == "kappas") e.kappas = parse_double_list(key, v);
  else if (key == "kappa") e.kappa = parse_double(key, v);
  else if (key == "p") e.p = parse_double(key, v);
  else if (key == "sigma1") e.sigma1 = parse_double(key, v);
  else if (key == "alphas") e.alphas = parse_alpha_list(key, v);
  else if (key == "fprimes") e.fprimes = parse_double_list(key, v);
  else if (key == "horizon") e.horizon = parse_double(key, v);
  else if (key == "amplitude") e.amplitude = parse_double(key, v);
  else if (key == "seed") e.seed = parse_u64(key, v);
  else if (key == "window_lo") e.window_lo = parse_double(key, v);
  else if (key == "window_hi") e.window_hi = parse_double(key, v);
  else if (key == "ref_discrepancy") e.ref_discrepancy = parse_double(key, v);
  else if (key == "limit_slope_factor") e.limit_slope_factor = parse_double(key, v);
  else if (key == "decay_rel_tol") e.decay_rel_tol = parse_double(key, v);
  else if (key == "heat_rel_tol") e.heat_rel_tol = parse_double(key, v);
  else if (key == "dispersion_rel_tol") e.dispersion_rel_tol = parse_double(key, v);
  else if (key == "instability_rel_tol") e.instability_rel_tol = parse_double(key, v);
  else if (key == "snapshots_min") e.snapshots_min = parse_int(key, v);
  else throw ConfigError("unknown key '" + key + "' in section [experiment]");
}

}  // namespace

ClosureModel build_model(const ClosureSpec& spec) {
  CapillarityProfile m = CapillarityProfile::constant();
  if (spec.profile == "power") m = CapillarityProfile::power(spec.profile_exponent);
  else if (spec.profile != "constant")
    throw ConfigError("closure profile must be 'constant' or 'power', got '" +
                      spec.profile + "'");
  return make_model(PressureLaw::gamma_law(spec.gamma_plus, spec.amp_plus),
                    PressureLaw::gamma_law(spec.gamma_minus, spec.amp_minus),
                    spec.fprime1, m, spec.alpha_plus_bar);
}

double delta_exponent(int dim, double p) {
  if (dim < 2) throw OutOfRange("dimension must be at least 2");
  if (p <= 2.0)
    throw OutOfRange("integrability exponent p must exceed 2");
  if (dim >= 3 && p > 2.0 * dim / (dim - 2.0))
    throw OutOfRange("integrability exponent p exceeds the critical 2d/(d-2)");
  return (dim / 2.0 - dim / p) / 4.0;
}

void validate_config(const ExperimentConfig& cfg) {
  // Grid/closure constructibility (Grid and make_model validate themselves).
  (void)cfg.grid.build();
  (void)build_model(cfg.closure);
  if (cfg.integrator.dt <= 0.0)
    throw ConfigError("integrator dt must be positive");
  if (cfg.horizon <= 0.0) throw ConfigError("experiment horizon must be positive");
  if (cfg.amplitude < 0.0) throw ConfigError("amplitude must be non-negative");
  if (cfg.snapshots_min < 3)
    throw ConfigError("snapshots_min must be at least 3");
  if (cfg.window_hi != 0.0 && cfg.window_hi <= cfg.window_lo)
    throw ConfigError("window_hi must exceed window_lo when set");

  const int d = cfg.grid.dim;
  if (cfg.kind == "limit-sweep") {
    if (cfg.kappas.size() < 3)
      throw ConfigError("limit-sweep needs at least 3 kappa values");
    for (std::size_t i = 0; i + 1 < cfg.kappas.size(); ++i)
      if (!(cfg.kappas[i] < cfg.kappas[i + 1]))
        throw ConfigError("kappa list must be strictly increasing");
    if (cfg.kappas.front() <= 0.0)
      throw ConfigError("kappa values must be positive");
    (void)delta_exponent(d, cfg.p);  // validates p for this dimension
  } else if (cfg.kind == "decay-sweep") {
    if (cfg.kappa <= 0.0) throw ConfigError("kappa must be positive");
    if (cfg.sigma1 < -d / 2.0 || cfg.sigma1 >= d / 2.0 - 1.0)
      throw ConfigError("sigma1 must lie in [-d/2, d/2 - 1)");
    if (cfg.alphas.empty())
      throw ConfigError("decay-sweep needs at least one multi-index");
    for (const auto& a : cfg.alphas)
      for (int i = d; i < 3; ++i)
        if (a[i] != 0)
          throw ConfigError("multi-index has a component beyond dimension " +
                            std::to_string(d));
  } else if (cfg.kind == "dispersion") {
    if (cfg.kappa <= 0.0) throw ConfigError("kappa must be positive");
  } else if (cfg.kind == "stability-scan") {
    if (cfg.fprimes.empty())
      throw ConfigError("stability-scan needs at least one fprime1 value");
  } else {
    throw ConfigError("unknown experiment kind '" + cfg.kind + "'");
  }
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    // Strip inline comments introduced by " #".
    if (auto pos = line.find(" #"); pos != std::string::npos)
      line = line.substr(0, pos);
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("malformed section header at line " +
                          std::to_string(lineno) + ": '" + line + "'");
      section = lower(trim(line.substr(1, line.size() - 2)));
      if (section != "closure" && section != "grid" &&
          section != "integrator" && section != "experiment")
        throw ConfigError("unknown section [" + section + "] at line " +
                          std::to_string(lineno));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected 'key = value' at line " +
                        std::to_string(lineno) + ": '" + line + "'");
    const std::string key = lower(trim(line.substr(0, eq)));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("empty key at line " + std::to_string(lineno));
    if (section.empty())
      throw ConfigError("key '" + key + "' appears before any section header");
    try {
      if (section == "closure") apply_closure(cfg.closure, key, val);
      else if (section == "grid") apply_grid(cfg.grid, key, val);
      else if (section == "integrator")
        apply_integrator(cfg.integrator, key, val);
      else apply_experiment(cfg, key, val);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (line " +
                        std::to_string(lineno) + ")");
    }
  }
  validate_config(cfg);
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string canonical_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  auto kv = [&os](const char* k, const std::string& v) {
    os << k << '=' << v << '\n';
  };
  auto kd = [&](const char* k, double v) { kv(k, format_g17(v)); };
  auto ki = [&](const char* k, long long v) { kv(k, std::to_string(v)); };

  os << "[closure]\n";
  kd("gamma_plus", cfg.closure.gamma_plus);
  kd("gamma_minus", cfg.closure.gamma_minus);
  kd("amp_plus", cfg.closure.amp_plus);
  kd("amp_minus", cfg.closure.amp_minus);
  kd("alpha_plus_bar", cfg.closure.alpha_plus_bar);
  kd("fprime1", cfg.closure.fprime1);
  kv("profile", cfg.closure.profile);
  kd("profile_exponent", cfg.closure.profile_exponent);

  os << "[grid]\n";
  ki("dim", cfg.grid.dim);
  ki("n", cfg.grid.n);
  kd("lambda", cfg.grid.lambda);

  os << "[integrator]\n";
  kv("scheme", cfg.integrator.scheme == Scheme::ETD1 ? "etd1" : "etdrk2");
  kd("dt", cfg.integrator.dt);
  kd("cfl_safety", cfg.integrator.cfl_safety);
  ki("snapshot_every", cfg.integrator.snapshot_every);
  kv("balanced_mass", cfg.integrator.balanced_mass ? "true" : "false");
  kv("linear_only", cfg.integrator.linear_only ? "true" : "false");
  kd("blowup_threshold", cfg.integrator.blowup_threshold);
  kd("r_floor", cfg.integrator.r_floor);
  kd("r_ceil", cfg.integrator.r_ceil);

  os << "[experiment]\n";
  kv("kind", cfg.kind);
  kv("label", cfg.label);
  {
    std::string s;
    for (std::size_t i = 0; i < cfg.kappas.size(); ++i)
      s += (i ? "," : "") + format_g17(cfg.kappas[i]);
    kv("kappas", s);
  }
  kd("kappa", cfg.kappa);
  kd("p", cfg.p);
  kd("sigma1", cfg.sigma1);
  {
    std::string s;
    for (std::size_t i = 0; i < cfg.alphas.size(); ++i) {
      if (i) s += ";";
      for (int c = 0; c < 3; ++c) s += static_cast<char>('0' + cfg.alphas[i][c]);
    }
    kv("alphas", s);
  }
  {
    std::string s;
    for (std::size_t i = 0; i < cfg.fprimes.size(); ++i)
      s += (i ? "," : "") + format_g17(cfg.fprimes[i]);
    kv("fprimes", s);
  }
  kd("horizon", cfg.horizon);
  kd("amplitude", cfg.amplitude);
  ki("seed", static_cast<long long>(cfg.seed));
  kd("window_lo", cfg.window_lo);
  kd("window_hi", cfg.window_hi);
  kd("ref_discrepancy", cfg.ref_discrepancy);
  kd("limit_slope_factor", cfg.limit_slope_factor);
  kd("decay_rel_tol", cfg.decay_rel_tol);
  kd("heat_rel_tol", cfg.heat_rel_tol);
  kd("dispersion_rel_tol", cfg.dispersion_rel_tol);
  kd("instability_rel_tol", cfg.instability_rel_tol);
  ki("snapshots_min", cfg.snapshots_min);
  return os.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  return hex64(fnv1a(canonical_text(cfg)));
}

}  // namespace twofluid
