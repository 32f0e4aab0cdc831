#pragma once

// Per-frequency linear theory for the two-phase system: symbols of the
// linearized equations, their closed-form eigenvalues, the diagonalizing
// linear combinations, dispersive multipliers and z-variables, the oscillatory
// semigroup, and the dyadic Lyapunov functional with its equivalence bounds.

#include <Eigen/Dense>
#include <utility>

#include "twofluid/closure.hpp"
#include "twofluid/grid.hpp"
#include "twofluid/littlewood_paley.hpp"

namespace twofluid {

// Reduced 2×2 acoustic block acting on (N̂, M̂):
//   [[0, −√κ|ξ|], [r|ξ|/√κ + √κ|ξ|³, −2|ξ|²]]
Eigen::Matrix2d assemble_reduced_symbol(double xi_abs, double kappa, double r);

// λ±(ξ) = −|ξ|² ± √((1−κ)|ξ|⁴ − r|ξ|²); for κ > 1 and r > 0 the radicand is
// negative at every |ξ| > 0, so the pair is complex conjugate with real part
// exactly −|ξ|².
std::pair<cd, cd> eigenvalues_closed_form(double xi_abs, double kappa, double r);

// Full linear block on (n̂⁺, n̂⁻, û⁺, û⁻) ∈ C^{2+2d}:
//   ∂_t n̂± = −√κ i ξ·û±
//   ∂_t û⁺ = −iξ[(β₁/√κ + √κ|ξ|²) n̂⁺ + (β₂/√κ) n̂⁻] − (|ξ|² I + ξξᵀ) û⁺
//   ∂_t û⁻ = −iξ[(β₃/√κ) n̂⁺ + (β₄/√κ + √κ|ξ|²) n̂⁻] − (|ξ|² I + ξξᵀ) û⁻
// Restricted to û ∥ ξ and recombined it block-diagonalizes into A₊ ⊕ A₋;
// the û ⟂ ξ subspace evolves by −|ξ|².  Throws DegenerateRoots when the two
// branch roots collide (|r₊ − r₋| < 1e-10).
Eigen::MatrixXcd assemble_full_symbol(const Eigen::VectorXd& xi, double kappa,
                                      const ClosureCoefficients& co);

// The branch combinations N₁⁺ = β₃n⁺ + (r₊−β₁)n⁻, N₂⁻ = β₃n⁺ + (r₋−β₁)n⁻ and
// the same recipe applied to the gradient parts of the velocities.
struct DiagonalizedFields {
  GridField N1, N2;  // scalars
  GridField M1, M2;  // vectors
  double beta3 = 0, rp_shift = 0, rm_shift = 0;  // (β₃, r₊−β₁, r₋−β₁)
};

DiagonalizedFields diagonalize_fields(const GridField& n_plus,
                                      const GridField& n_minus,
                                      const GridField& qu_plus,
                                      const GridField& qu_minus,
                                      const ClosureCoefficients& co);

// Exact inverse of the branch combinations (divides by β₃(r₊ − r₋)).
void recombine_fields(const DiagonalizedFields& dz, const ClosureCoefficients& co,
                      GridField* n_plus, GridField* n_minus, GridField* qu_plus,
                      GridField* qu_minus);

// U(ξ) = √(|ξ|²/(rκ⁻¹+|ξ|²)), H(ξ) = √(|ξ|²(rκ⁻¹+|ξ|²)), sampled on the
// lattice; both vanish at the mean mode, which is excluded throughout.
struct DispersiveMultipliers {
  Grid grid;
  double kappa = 1, r = 1;
  std::vector<double> U, H;
};

DispersiveMultipliers dispersive_multipliers(const Grid& grid, double kappa,
                                             double r);

// z = U⁻¹∇N + i QM (complex vector field); real and imaginary parts recover
// the two ingredients exactly.
GridField z_variables(const GridField& N, const GridField& QM,
                      const DispersiveMultipliers& mult);

// Oscillatory semigroup: per-mode phase e^{i(r₁|ξ|² + √(|ξ|²(r₂+r₃κ|ξ|²))) t},
// an L² isometry; viscous=true multiplies by e^{−|ξ|²t} (contraction).
GridField propagate_semigroup(const GridField& f, double t, double kappa,
                              double r1, double r2, double r3, bool viscous);

// Extremal eigenvalues of the three 2×2 Gram matrices of the block energy:
// the (κ^{-1/2}n⁺, κ^{-1/2}n⁻) form and the two (∇n, u) forms with the δ₁
// cross term.  c_lower > 0 iff the functional is positive definite.
struct GramBounds {
  double c_lower = 0, C_upper = 0;
};

GramBounds lyapunov_gram_bounds(const ClosureCoefficients& co, double kappa,
                                double delta1);

// Largest δ₁ ∈ {1, 1/2, 1/4, ...} that keeps a ≥10% positivity margin on the
// Gram matrices and makes the per-mode energy non-increasing along the linear
// flow across the whole frequency lattice.
double default_delta1(const ClosureCoefficients& co, double kappa,
                      const Grid& grid);

// Block energy
//   E_j = (β₁/2β₂)‖κ^{-1/2}n_j⁺‖² + (β₄/2β₃)‖κ^{-1/2}n_j⁻‖² + κ⁻¹∫n_j⁺n_j⁻
//       + (1/2β₂)(‖∇n_j⁺‖² + ‖u_j⁺‖²) + (1/2β₃)(‖∇n_j⁻‖² + ‖u_j⁻‖²)
//       + (δ₁/√κ)[(1/β₂)∫u_j⁺·∇n_j⁺ + (1/β₃)∫u_j⁻·∇n_j⁻]
// with every field filtered through Δ̇_j first.  Throws NotStable when the
// coefficients sit outside the stability window.
double lyapunov_energy(const GridField& n_plus, const GridField& n_minus,
                       const GridField& u_plus, const GridField& u_minus,
                       const DyadicBank& bank, int j,
                       const ClosureCoefficients& co, double kappa,
                       double delta1);

}  // namespace twofluid
