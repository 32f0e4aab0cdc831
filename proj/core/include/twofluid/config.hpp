#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "twofluid/closure.hpp"
#include "twofluid/grid.hpp"
#include "twofluid/solver.hpp"

namespace twofluid {

// Closure ingredients in plain-number form, buildable from a config file.
struct ClosureSpec {
  double gamma_plus = 1.0;
  double gamma_minus = 1.0;
  double amp_plus = 1.0;        // pressure amplitude: P(s) = amp·s^γ
  double amp_minus = 1.0;
  double alpha_plus_bar = 0.5;  // equilibrium volume fraction of the + phase
  double fprime1 = -1.0;        // capillary-pressure slope at equilibrium
  std::string profile = "constant";  // capillarity profile: constant | power
  double profile_exponent = 1.0;     // exponent when profile == power
};

ClosureModel build_model(const ClosureSpec& spec);

struct GridSpec {
  int dim = 2;
  int n = 256;
  double lambda = 16.0;
  Grid build() const { return Grid(dim, n, lambda); }
};

// Full experiment description: closure + grid + integrator + kind-specific
// parameters + verdict thresholds (thresholds are data, not code).
struct ExperimentConfig {
  ClosureSpec closure;
  GridSpec grid;
  IntegratorConfig integrator;

  std::string kind = "limit-sweep";  // limit-sweep | decay-sweep | dispersion
                                     // | stability-scan
  std::string label;

  std::vector<double> kappas{16.0, 64.0, 256.0, 1024.0};
  double kappa = 100.0;   // single-κ experiments (dispersion, decay)
  double p = 4.0;         // dispersive integrability exponent
  double sigma1 = -1.0;   // initial spectral regularity for decay sweeps
  std::vector<std::array<int, 3>> alphas{{1, 0, 0}, {2, 0, 0}};
  std::vector<double> fprimes{-3.0, -1.5, -1.0, -0.5, -0.25, 0.25, 0.5};

  double horizon = 2.0;
  double amplitude = 1.0;
  std::uint64_t seed = 1;
  double window_lo = 0.0;  // 0/0 means auto-selected window
  double window_hi = 0.0;
  double ref_discrepancy = 0.0;  // optional initial P u − v mismatch knob

  // Verdict thresholds (defaults match the acceptance gates).
  double limit_slope_factor = 0.5;   // pass when slope ≤ −factor·δ
  double decay_rel_tol = 0.15;
  double heat_rel_tol = 0.05;
  double dispersion_rel_tol = 0.10;
  double instability_rel_tol = 0.05;
  int snapshots_min = 8;
};

// The incompressible-limit rate exponent δ for dimension d and exponent p:
// δ = (d/2 − d/p)/4, with p restricted to (2, ∞) when d = 2 and to
// (2, 2d/(d−2)] when d ≥ 3.  Throws OutOfRange outside those ranges.
double delta_exponent(int dim, double p);

// Parse the structured key-value format (sections [closure], [grid],
// [integrator], [experiment]; `key = value` lines; full-line comments start
// with '#' or ';').  Unknown sections or keys raise ConfigError; all
// invariants are validated before returning.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Re-validate an already-built config (kind, κ list, p, σ₁ ranges...).
void validate_config(const ExperimentConfig& cfg);

// Canonical text form (every field, fixed order, 17-digit floats): two configs
// serialize identically iff they are equal.  The provenance hash is FNV-1a of
// this serialization.
std::string canonical_text(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace twofluid
