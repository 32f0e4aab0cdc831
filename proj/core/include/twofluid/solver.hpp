#pragma once

// Time integration on the periodic box: the two-phase perturbation system in
// (n±, u±) variables next to the incompressible reference flow.  The stiff
// constant-coefficient linear part is integrated exactly through cached
// per-mode exponentials; nonlinear terms are evaluated pseudo-spectrally with
// 2/3 dealiasing and coupled by exponential time differencing (ETD1 or the
// two-stage ETDRK2 corrector).

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "twofluid/closure.hpp"
#include "twofluid/grid.hpp"

namespace twofluid {

// Bundle of the four evolved fields (scalar densities, vector velocities);
// used for states, right-hand sides, and propagator input/output.
struct FieldQuad {
  GridField n_plus, n_minus, u_plus, u_minus;
};

FieldQuad make_quad(const Grid& grid);

struct SimulationState {
  double t = 0.0;
  double kappa = 1.0;
  GridField n_plus, n_minus;  // perturbation densities (scalars)
  GridField u_plus, u_minus;  // perturbation velocities (d components)
  bool has_reference = false;
  GridField v_plus, v_minus;  // divergence-free reference velocities
  // Conserved-mean bookkeeping, recorded when the state is created.
  double mean_n_plus = 0.0, mean_n_minus = 0.0;
  std::array<double, 3> mean_u_plus{}, mean_u_minus{};
};

// Zero perturbation (the equilibrium) at capillarity strength κ.
SimulationState make_state(const Grid& grid, double kappa,
                           bool with_reference = false);

// Random dyadic-band initial data: velocities at regularity d/2−1, densities
// one derivative smoother, references v± = P u±(0).
SimulationState make_initial_state(const Grid& grid, double kappa,
                                   double amplitude, std::uint64_t seed,
                                   bool with_reference = true);

// Re-record the conserved means from the current fields.
void record_means(SimulationState& state);

enum class Scheme { ETD1, ETDRK2 };

struct IntegratorConfig {
  Scheme scheme = Scheme::ETDRK2;
  double dt = 1e-2;               // must be positive
  double cfl_safety = 0.5;        // advective bound is monitored, not enforced
  int snapshot_every = 10;        // diagnostics cadence in steps
  bool balanced_mass = false;     // divergence-balanced ψ̃ term; n-means pinned
  bool linear_only = false;       // drop the nonlinearity entirely
  double blowup_threshold = 1e8;  // sup-norm guard
  double r_floor = 0.05;          // working range for R = L⁻¹(κ^{-1/2}n):
  double r_ceil = 20.0;           //   leaving [r_floor, r_ceil] is a breach
};

// Largest advectively stable step dx / max|u| over all velocity fields
// (infinite when every velocity vanishes).
double advective_cfl(const SimulationState& state);

// Physical nonlinearities with the auxiliary reference terms cancelled:
// density transport and dilation, velocity advection, the density-dependent
// viscosity and pressure corrections, and the capillary (gradient-square and
// ψ̃Δn) terms.  Products are formed in physical space and dealiased; the
// constant-coefficient linear part is excluded.  Throws PositivityBreach when
// the reconstructed density ratio leaves the working range.
FieldQuad nonlinear_rhs(const SimulationState& state, const ClosureModel& model,
                        const IntegratorConfig& cfg);

// Relative spectral residue of the ψ̃⁺·div u⁺ product recomputed on a
// zero-padded (2N) grid: the monitored aliasing level of the composite terms.
double alias_residual_check(const SimulationState& state,
                            const ClosureModel& model,
                            const IntegratorConfig& cfg);

// Per-mode exact exponentials e^{L(ξ)dt} and the ETD weights φ₁, φ₂ of the
// full linear symbol.  Internally the compressible 4×4 block (densities and
// longitudinal velocities) is exponentiated by eigendecomposition — falling
// back to scaling-and-squaring on an augmented matrix when the eigenvector
// condition number exceeds 1e8 — and the transverse directions carry scalar
// heat factors.  Unstable coefficient sets are admitted with a warning.
class LinearPropagator {
 public:
  LinearPropagator(const Grid& grid, double kappa,
                   const ClosureCoefficients& co, double dt);

  const Grid& grid() const { return grid_; }
  double dt() const { return dt_; }
  double kappa() const { return kappa_; }
  std::size_t fallback_count() const { return fallback_; }

  // Full (2+2d)×(2+2d) matrices for one lattice site, assembled on demand.
  Eigen::MatrixXcd full_matrix(std::size_t site) const;  // e^{L(ξ)dt}
  Eigen::MatrixXcd full_phi1(std::size_t site) const;    // φ₁(L(ξ)dt)
  Eigen::MatrixXcd full_phi2(std::size_t site) const;    // φ₂(L(ξ)dt)

  FieldQuad apply_exp(const FieldQuad& w) const;
  FieldQuad apply_phi1(const FieldQuad& w) const;
  FieldQuad apply_phi2(const FieldQuad& w) const;

 private:
  FieldQuad apply(const FieldQuad& w, int which) const;
  Eigen::MatrixXcd assemble_full(std::size_t site, int which) const;

  Grid grid_;
  double kappa_ = 1.0, dt_ = 0.0;
  std::vector<Eigen::Matrix4d> e4_, p14_, p24_;  // compressible blocks
  std::vector<double> et_, p1t_, p2t_;           // transverse heat scalars
  std::size_t fallback_ = 0;
};

// One ETD step: w ← e^{LΔt}w + Δt φ₁ N(w), plus the ETDRK2 corrector
// Δt φ₂ (N(w*) − N(w)) when configured.  Advances t, dealiases the state, and
// guards against blow-up and positivity loss.  The propagator must match the
// grid and Δt.
void etd_step(SimulationState& state, const ClosureModel& model,
              const LinearPropagator& prop, const IntegratorConfig& cfg);

// Advance the reference flow: exact heat factor, Leray-projected advection
// nonlinearity, same ETD scheme; the result is re-projected so the fields
// stay divergence-free.
void ns_reference_step(SimulationState& state, const IntegratorConfig& cfg);

struct DiagnosticPoint {
  double t = 0.0;
  std::vector<std::pair<std::string, double>> values;  // fixed column order
};

// Look up one observable in a diagnostics row (NaN when absent).
double diagnostic_value(const DiagnosticPoint& p, const std::string& name);

struct DiagnosticsRequest {
  int every_steps = 0;    // 0 → use the integrator snapshot cadence
  double split_p = 4.0;   // p of the mixed-norm split observable
  bool besov = true;      // dyadic-band norms and reference error
  bool lyapunov = true;   // per-block energies (skipped when unstable)
  std::vector<std::array<int, 3>> derivative_orders;  // L² of D^α fields
  std::function<void(const SimulationState&, std::size_t step)> on_snapshot;
};

struct SimulationResult {
  SimulationState final_state;
  std::vector<DiagnosticPoint> series;
  std::string failure;  // empty on clean completion
  std::size_t steps = 0;
};

// March both systems to the horizon, recording scheduled diagnostics.  On
// BlowUp or PositivityBreach the partial trajectory is returned with the
// failure message set instead of propagating the exception.
SimulationResult run_simulation(SimulationState initial,
                                const ClosureModel& model, IntegratorConfig cfg,
                                double horizon,
                                const DiagnosticsRequest& diag = {});

}  // namespace twofluid
