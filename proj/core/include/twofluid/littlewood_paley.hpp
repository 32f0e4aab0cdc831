#pragma once

// Homogeneous dyadic frequency decomposition on a periodic lattice.  The
// mollifier pair is explicit: with g(x) = exp(-1/x) for x > 0 (else 0),
//   χ(t) = g(4/3 - t) / (g(4/3 - t) + g(t - 3/4)),   φ(t) = χ(t/2) - χ(t),
// so χ ≡ 1 on |ξ| ≤ 3/4, χ ≡ 0 on |ξ| ≥ 4/3, and the dilates φ(2^{-j}·)
// telescope to a partition of unity on an annulus of lattice frequencies.

#include <cstdint>
#include <vector>

#include "twofluid/grid.hpp"

namespace twofluid {

double bump_chi(double t);  // χ(t)
double bump_phi(double t);  // φ(t) = χ(t/2) − χ(t)

class DyadicBank {
 public:
  const Grid& grid() const { return grid_; }
  int j_min() const { return j_min_; }
  int j_max() const { return j_max_; }
  int blocks() const { return j_max_ - j_min_ + 1; }

  // φ(2^{-j}|ξ|) sampled on the lattice for one block.
  const std::vector<double>& mask(int j) const;
  // Σ_j φ(2^{-j}|ξ|) over the bank's range.
  const std::vector<double>& coverage() const { return coverage_; }

  // Frequencies with coverage within 1e-12 of 1 span [4/3·2^{j_min}, 3/2·2^{j_max}].
  double covered_lo() const;
  double covered_hi() const;

 private:
  friend DyadicBank build_dyadic_bank(const Grid&, int, int);
  Grid grid_;
  int j_min_ = 0, j_max_ = 0;
  std::vector<std::vector<double>> masks_;
  std::vector<double> coverage_;
};

// Defaults: j_min = −log₂Λ (first block that sees the lowest nonzero lattice
// frequency) and j_max = log₂(n/Λ) − 3 (last block whose support clears the
// Nyquist frequency).  Throws NyquistViolation when 2^{j_max}·8/3 reaches the
// lattice edge, OutOfRange when fewer than 3 blocks remain.
DyadicBank build_dyadic_bank(const Grid& grid, int j_min = INT32_MIN,
                             int j_max = INT32_MIN);

// Band-pass Δ̇_j u (all components).
GridField dyadic_block(const DyadicBank& bank, const GridField& u, int j);
// Low-pass multiplier χ(2^{-j}ξ) (everything strictly below block j).
GridField low_cutoff(const DyadicBank& bank, const GridField& u, int j);

// Homogeneous Besov norm ‖u‖ = ℓ^r over j of 2^{js}‖Δ̇_j u‖_{L^p}; r may be
// infinity.  The ξ=0 mode is invisible to every block and is ignored.  Throws
// BandTooNarrow when more than 1% of the spectral energy (mean excluded) sits
// at frequencies the bank does not fully cover.
double besov_norm(const DyadicBank& bank, const GridField& u, double s, double p,
                  double r);

// ‖D^k Δ̇_j u‖_{L^q} / (2^{j(k+d(1/p−1/q))} ‖Δ̇_j u‖_{L^p}) with D^k the radial
// |ξ|^k multiplier.  Throws ZeroBlock when the block carries no energy.
double bernstein_probe(const DyadicBank& bank, const GridField& u, int j, int k,
                       double p, double q);

// Deterministic random field with block norms 2^{jσ}‖Δ̇_j u‖_{L²} ≈ amplitude
// across the covered range: coefficient magnitudes |ξ|^{−(σ+d/2)}, unit-modulus
// phases drawn per (seed, mode, component), Hermitian symmetry built in.
GridField random_besov_field(const Grid& grid, double sigma, std::uint64_t seed,
                             int comps = 1, double amplitude = 1.0);

}  // namespace twofluid
