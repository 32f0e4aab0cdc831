#pragma once

#include <cstddef>
#include <string>

#include "twofluid/config.hpp"
#include "twofluid/report.hpp"
#include "twofluid/solver.hpp"

namespace twofluid {

// Library name + version, stamped into every report's provenance footer.
std::string build_identifier();

// Worker threads for a sweep: min(TWOFLUID_THREADS if set, hardware
// concurrency, number of tasks), at least 1.
int worker_count(std::size_t tasks);

// Shared initial data for the incompressible-limit sweep: a random solenoidal
// background plus spatially coherent acoustic packets in (n±, Qu±), identical
// across κ; references start at v± = P u±(0) (scaled down when the optional
// discrepancy knob is nonzero).
SimulationState make_limit_state(const Grid& grid, double kappa,
                                 double amplitude, std::uint64_t seed,
                                 double ref_discrepancy);

// Sweep the κ list with shared initial data and fit the reference error E(κ)
// and the dispersive quadrature D(κ) against κ.
ExperimentReport run_limit_sweep(const ExperimentConfig& cfg);

// Evolve rough random data and fit ‖D^α w(t)‖_{L²} decay exponents against t
// in the fit window, after running the pure-heat control through the same
// pipeline.
ExperimentReport run_decay_sweep(const ExperimentConfig& cfg);

// Free oscillatory propagation of a frequency-localized packet; fits the L^∞
// decay exponent over a one-decade time window.
ExperimentReport run_dispersion(const ExperimentConfig& cfg);

// Closure coefficients, stability verdicts, and maximal resolved growth rates
// across a list of interphase-pressure slopes f'(1).
ExperimentReport run_stability_scan(const ExperimentConfig& cfg);

// Dispatch on cfg.kind (validates the config first).
ExperimentReport run_experiment(const ExperimentConfig& cfg);

}  // namespace twofluid
