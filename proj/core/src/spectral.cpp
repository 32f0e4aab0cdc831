#include "twofluid/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <set>
#include <string>

#include "twofluid/errors.hpp"
#include "twofluid/util.hpp"

namespace twofluid {

Eigen::Matrix2d assemble_reduced_symbol(double xi_abs, double kappa, double r) {
  const double x = xi_abs, rk = std::sqrt(kappa);
  Eigen::Matrix2d a;
  a << 0.0, -rk * x, r * x / rk + rk * x * x * x, -2.0 * x * x;
  return a;
}

std::pair<cd, cd> eigenvalues_closed_form(double xi_abs, double kappa, double r) {
  const double x2 = xi_abs * xi_abs;
  const double rad = (1.0 - kappa) * x2 * x2 - r * x2;
  if (rad >= 0.0) {
    const double s = std::sqrt(rad);
    return {cd{-x2 + s, 0.0}, cd{-x2 - s, 0.0}};
  }
  const double s = std::sqrt(-rad);
  return {cd{-x2, s}, cd{-x2, -s}};
}

Eigen::MatrixXcd assemble_full_symbol(const Eigen::VectorXd& xi, double kappa,
                                      const ClosureCoefficients& co) {
  if (std::fabs(co.r_plus - co.r_minus) < 1e-10)
    throw DegenerateRoots("branch roots coincide: r+ = " + format_g17(co.r_plus) +
                          ", r- = " + format_g17(co.r_minus));
  const int d = static_cast<int>(xi.size());
  const double rk = std::sqrt(kappa);
  const double x2 = xi.squaredNorm();
  const int m = 2 + 2 * d;
  Eigen::MatrixXcd L = Eigen::MatrixXcd::Zero(m, m);
  const cd mi{0.0, -1.0};  // −i

  for (int a = 0; a < d; ++a) {
    // ∂_t n± = −√κ i ξ·u±
    L(0, 2 + a) = mi * rk * xi(a);
    L(1, 2 + d + a) = mi * rk * xi(a);
    // pressure + capillary forcing on the velocities
    L(2 + a, 0) = mi * xi(a) * (co.beta1 / rk + rk * x2);
    L(2 + a, 1) = mi * xi(a) * (co.beta2 / rk);
    L(2 + d + a, 0) = mi * xi(a) * (co.beta3 / rk);
    L(2 + d + a, 1) = mi * xi(a) * (co.beta4 / rk + rk * x2);
    // −(|ξ|² I + ξξᵀ) on each velocity
    for (int b = 0; b < d; ++b) {
      const double visc = (a == b ? x2 : 0.0) + xi(a) * xi(b);
      L(2 + a, 2 + b) -= visc;
      L(2 + d + a, 2 + d + b) -= visc;
    }
  }
  return L;
}

// ---------------------------------------------------------------------------

namespace {

// out = ca·a + cb·b on spectral data.
GridField combine(const GridField& a, const GridField& b, double ca, double cb) {
  GridField out(a.grid(), a.comps(), a.is_real() && b.is_real());
  for (int c = 0; c < a.comps(); ++c) {
    const cd* pa = a.spec(c);
    const cd* pb = b.spec(c);
    cd* po = out.spec(c);
    for (std::size_t s = 0; s < a.points(); ++s) po[s] = ca * pa[s] + cb * pb[s];
  }
  out.mark_spec_valid();
  return out;
}

}  // namespace

DiagonalizedFields diagonalize_fields(const GridField& n_plus,
                                      const GridField& n_minus,
                                      const GridField& qu_plus,
                                      const GridField& qu_minus,
                                      const ClosureCoefficients& co) {
  if (std::fabs(co.r_plus - co.r_minus) < 1e-10)
    throw DegenerateRoots("branch roots coincide; the combinations are singular");
  DiagonalizedFields dz;
  dz.beta3 = co.beta3;
  dz.rp_shift = co.r_plus - co.beta1;
  dz.rm_shift = co.r_minus - co.beta1;
  dz.N1 = combine(n_plus, n_minus, dz.beta3, dz.rp_shift);
  dz.N2 = combine(n_plus, n_minus, dz.beta3, dz.rm_shift);
  dz.M1 = combine(qu_plus, qu_minus, dz.beta3, dz.rp_shift);
  dz.M2 = combine(qu_plus, qu_minus, dz.beta3, dz.rm_shift);
  return dz;
}

void recombine_fields(const DiagonalizedFields& dz, const ClosureCoefficients& co,
                      GridField* n_plus, GridField* n_minus, GridField* qu_plus,
                      GridField* qu_minus) {
  const double gap = co.r_plus - co.r_minus;
  if (std::fabs(gap) < 1e-10)
    throw DegenerateRoots("branch roots coincide; the combinations are singular");
  // X1 = β₃x + (r₊−β₁)y, X2 = β₃x + (r₋−β₁)y inverts to
  //   y = (X1 − X2)/(r₊−r₋),  x = [(β₁−r₋)X1 + (r₊−β₁)X2] / (β₃(r₊−r₋))
  const double cy1 = 1.0 / gap, cy2 = -1.0 / gap;
  const double cx1 = (co.beta1 - co.r_minus) / (co.beta3 * gap);
  const double cx2 = (co.r_plus - co.beta1) / (co.beta3 * gap);
  if (n_plus) *n_plus = combine(dz.N1, dz.N2, cx1, cx2);
  if (n_minus) *n_minus = combine(dz.N1, dz.N2, cy1, cy2);
  if (qu_plus) *qu_plus = combine(dz.M1, dz.M2, cx1, cx2);
  if (qu_minus) *qu_minus = combine(dz.M1, dz.M2, cy1, cy2);
}

// ---------------------------------------------------------------------------

DispersiveMultipliers dispersive_multipliers(const Grid& grid, double kappa,
                                             double r) {
  if (!(kappa > 0.0) || !(r > 0.0))
    throw OutOfRange("dispersive multipliers need positive kappa and r");
  DispersiveMultipliers m;
  m.grid = grid;
  m.kappa = kappa;
  m.r = r;
  const double rk = r / kappa;
  const std::size_t pts = grid.points();
  m.U.assign(pts, 0.0);
  m.H.assign(pts, 0.0);
  for (std::size_t s = 0; s < pts; ++s) {
    const double x2 = grid.xi_abs2(s);
    if (x2 == 0.0) continue;  // mean mode excluded
    m.U[s] = std::sqrt(x2 / (rk + x2));
    m.H[s] = std::sqrt(x2 * (rk + x2));
  }
  return m;
}

GridField z_variables(const GridField& N, const GridField& QM,
                      const DispersiveMultipliers& mult) {
  const Grid& g = N.grid();
  if (g != mult.grid || QM.grid() != g)
    throw OutOfRange("z-variables need matching grids");
  if (N.comps() != 1 || QM.comps() != g.dim())
    throw OutOfRange("z-variables take a scalar N and a dim-component QM");

  // W = U⁻¹∇N spectrally; the multiplier is radial so W stays real.
  GridField w(g, g.dim(), true);
  const cd* ns = N.spec(0);
  for (std::size_t s = 0; s < g.points(); ++s) {
    double xi[3];
    g.wavevector(s, xi);
    const double u = mult.U[s];
    for (int c = 0; c < g.dim(); ++c)
      w.spec(c)[s] = u > 0.0 ? cd{0.0, xi[c] / u} * ns[s] : cd{0.0, 0.0};
  }
  w.mark_spec_valid();

  GridField z(g, g.dim(), false);
  for (int c = 0; c < g.dim(); ++c) {
    const cd* pw = w.phys(c);
    const cd* pq = QM.phys(c);
    cd* pz = z.phys(c);
    for (std::size_t s = 0; s < g.points(); ++s)
      pz[s] = cd{pw[s].real(), pq[s].real()};
  }
  z.mark_phys_valid();
  return z;
}

GridField propagate_semigroup(const GridField& f, double t, double kappa,
                              double r1, double r2, double r3, bool viscous) {
  if (!(t >= 0.0)) throw OutOfRange("semigroup time must be nonnegative");
  const Grid& g = f.grid();
  GridField out(g, f.comps(), false);
  for (std::size_t s = 0; s < g.points(); ++s) {
    const double x2 = g.xi_abs2(s);
    const double phase = (r1 * x2 + std::sqrt(x2 * (r2 + r3 * kappa * x2))) * t;
    cd m{std::cos(phase), std::sin(phase)};
    if (viscous) m *= std::exp(-x2 * t);
    for (int c = 0; c < f.comps(); ++c) out.spec(c)[s] = m * f.spec(c)[s];
  }
  out.mark_spec_valid();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Symmetric 2×2 eigenvalues of [[a, c], [c, b]].
void sym2_eigs(double a, double b, double c, double* lo, double* hi) {
  const double mid = 0.5 * (a + b);
  const double rad = std::sqrt(0.25 * (a - b) * (a - b) + c * c);
  *lo = mid - rad;
  *hi = mid + rad;
}

// Per-mode energy weight matrix on (κ^{-1/2}n̂⁺, κ^{-1/2}n̂⁻, μ̂⁺, μ̂⁻).
Eigen::Matrix4d mode_weight(const ClosureCoefficients& co, double kappa,
                            double delta1, double x) {
  const double x2 = x * x;
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  q(0, 0) = (co.beta1 + kappa * x2) / (2.0 * co.beta2);
  q(1, 1) = (co.beta4 + kappa * x2) / (2.0 * co.beta3);
  q(0, 1) = q(1, 0) = 0.5;
  q(2, 2) = 1.0 / (2.0 * co.beta2);
  q(3, 3) = 1.0 / (2.0 * co.beta3);
  q(0, 2) = q(2, 0) = -delta1 * x / (2.0 * co.beta2);
  q(1, 3) = q(3, 1) = -delta1 * x / (2.0 * co.beta3);
  return q;
}

// Compressible linear generator in the same coordinates.
Eigen::Matrix4d mode_generator(const ClosureCoefficients& co, double kappa,
                               double x) {
  const double x2 = x * x;
  Eigen::Matrix4d l = Eigen::Matrix4d::Zero();
  l(0, 2) = -x;
  l(1, 3) = -x;
  l(2, 0) = co.beta1 * x + kappa * x2 * x;
  l(2, 1) = co.beta2 * x;
  l(3, 0) = co.beta3 * x;
  l(3, 1) = co.beta4 * x + kappa * x2 * x;
  l(2, 2) = l(3, 3) = -2.0 * x2;
  return l;
}

}  // namespace

GramBounds lyapunov_gram_bounds(const ClosureCoefficients& co, double kappa,
                                double delta1) {
  double nlo, nhi;
  sym2_eigs(co.beta1 / (2.0 * co.beta2), co.beta4 / (2.0 * co.beta3), 0.5, &nlo,
            &nhi);
  const double off = delta1 / (2.0 * std::sqrt(kappa));
  double plo, phi, mlo, mhi;
  sym2_eigs(0.5 / co.beta2, 0.5 / co.beta2, off / co.beta2, &plo, &phi);
  sym2_eigs(0.5 / co.beta3, 0.5 / co.beta3, off / co.beta3, &mlo, &mhi);
  GramBounds b;
  b.c_lower = std::min(nlo, std::min(plo, mlo));
  b.C_upper = std::max(nhi, std::max(phi, mhi));
  return b;
}

double default_delta1(const ClosureCoefficients& co, double kappa,
                      const Grid& grid) {
  if (!co.stable)
    throw NotStable("energy positivity requires coefficients inside the window");
  const double base = lyapunov_gram_bounds(co, kappa, 0.0).c_lower;
  if (!(base > 0.0))
    throw NotStable("Gram matrices not positive definite even at delta1 = 0");

  // Distinct |ξ| values of the lattice (the check is radial).
  std::set<long long> seen;
  std::vector<double> radii;
  for (std::size_t s = 0; s < grid.points(); ++s) {
    const double x2 = grid.xi_abs2(s);
    if (x2 == 0.0) continue;
    const long long key = std::llround(x2 * 4096.0 * grid.lambda() * grid.lambda());
    if (seen.insert(key).second) radii.push_back(std::sqrt(x2));
  }

  for (int k = 0; k <= 40; ++k) {
    const double delta1 = std::ldexp(1.0, -k);
    if (lyapunov_gram_bounds(co, kappa, delta1).c_lower < 0.1 * base) continue;
    bool monotone = true;
    for (double x : radii) {
      const Eigen::Matrix4d q = mode_weight(co, kappa, delta1, x);
      const Eigen::Matrix4d l = mode_generator(co, kappa, x);
      const Eigen::Matrix4d m = q * l + l.transpose() * q;
      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(m);
      const double scale = std::max(1.0, m.norm());
      if (es.eigenvalues().maxCoeff() > 1e-9 * scale) {
        monotone = false;
        break;
      }
    }
    if (monotone) return delta1;
  }
  throw NotStable("no admissible delta1 keeps the energy non-increasing");
}

double lyapunov_energy(const GridField& n_plus, const GridField& n_minus,
                       const GridField& u_plus, const GridField& u_minus,
                       const DyadicBank& bank, int j,
                       const ClosureCoefficients& co, double kappa,
                       double delta1) {
  if (!co.stable)
    throw NotStable("block energy is only meaningful inside the stability window");
  const Grid& g = bank.grid();
  if (n_plus.grid() != g || n_minus.grid() != g || u_plus.grid() != g ||
      u_minus.grid() != g)
    throw OutOfRange("block energy needs all fields on the bank's grid");
  if (n_plus.comps() != 1 || n_minus.comps() != 1 ||
      u_plus.comps() != g.dim() || u_minus.comps() != g.dim())
    throw OutOfRange("block energy takes scalar densities and vector velocities");

  const auto& mask = bank.mask(j);
  const double rk = std::sqrt(kappa);
  const int d = g.dim();
  double sum = 0.0, comp = 0.0;
  for (std::size_t s = 0; s < g.points(); ++s) {
    const double m2 = mask[s] * mask[s];
    if (m2 == 0.0) continue;
    double xi[3];
    g.wavevector(s, xi);
    const double x2 = g.xi_abs2(s);
    const cd np = n_plus.spec(0)[s];
    const cd nm = n_minus.spec(0)[s];
    double up2 = 0.0, um2 = 0.0, cross_p = 0.0, cross_m = 0.0;
    for (int c = 0; c < d; ++c) {
      const cd up = u_plus.spec(c)[s];
      const cd um = u_minus.spec(c)[s];
      up2 += std::norm(up);
      um2 += std::norm(um);
      cross_p += xi[c] * std::imag(up * std::conj(np));
      cross_m += xi[c] * std::imag(um * std::conj(nm));
    }
    double e = (co.beta1 / (2.0 * co.beta2 * kappa)) * std::norm(np) +
               (co.beta4 / (2.0 * co.beta3 * kappa)) * std::norm(nm) +
               std::real(np * std::conj(nm)) / kappa +
               (x2 / (2.0 * co.beta2)) * std::norm(np) +
               (x2 / (2.0 * co.beta3)) * std::norm(nm) +
               up2 / (2.0 * co.beta2) + um2 / (2.0 * co.beta3) +
               (delta1 / rk) * (cross_p / co.beta2 + cross_m / co.beta3);
    const double y = e * m2 - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum * g.volume();
}

}  // namespace twofluid
