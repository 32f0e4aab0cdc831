#include "twofluid/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

#include "twofluid/errors.hpp"
#include "twofluid/littlewood_paley.hpp"
#include "twofluid/spectral.hpp"
#include "twofluid/util.hpp"

namespace twofluid {
namespace {

const double kInf = std::numeric_limits<double>::infinity();
const double kNan = std::numeric_limits<double>::quiet_NaN();

GridField comp_of(const GridField& v, int c) {
  GridField r(v.grid(), 1, v.is_real());
  const cd* src = v.spec(c);
  std::copy(src, src + v.points(), r.spec(0));
  r.mark_spec_valid();
  return r;
}

void set_comp(GridField& v, int c, const GridField& s) {
  const cd* src = s.spec(0);
  std::copy(src, src + v.points(), v.spec(c));
}

// Pointwise a·b over the components of two real fields → scalar field.
GridField dot_field(const GridField& a, const GridField& b) {
  GridField r(a.grid(), 1, true);
  const std::size_t pts = a.points();
  cd* o = r.phys(0);
  std::fill(o, o + pts, cd{0.0, 0.0});
  for (int c = 0; c < a.comps(); ++c) {
    const cd* pa = a.phys(c);
    const cd* pb = b.phys(c);
    for (std::size_t s = 0; s < pts; ++s) o[s] += pa[s].real() * pb[s].real();
  }
  r.mark_phys_valid();
  return r;
}

GridField dmul(const GridField& a, const GridField& b) {
  GridField r = multiply(a, b);
  dealias_two_thirds(r);
  return r;
}

GridField ddot(const GridField& a, const GridField& b) {
  GridField r = dot_field(a, b);
  dealias_two_thirds(r);
  return r;
}

void quad_axpy(FieldQuad& y, double s, const FieldQuad& x) {
  const cd c{s, 0.0};
  axpy_spec(y.n_plus, c, x.n_plus);
  axpy_spec(y.n_minus, c, x.n_minus);
  axpy_spec(y.u_plus, c, x.u_plus);
  axpy_spec(y.u_minus, c, x.u_minus);
}

void quad_dealias(FieldQuad& q) {
  dealias_two_thirds(q.n_plus);
  dealias_two_thirds(q.n_minus);
  dealias_two_thirds(q.u_plus);
  dealias_two_thirds(q.u_minus);
}

double quad_sup(const FieldQuad& q) {
  double m = lebesgue_norm(q.n_plus, kInf);
  m = std::max(m, lebesgue_norm(q.n_minus, kInf));
  m = std::max(m, lebesgue_norm(q.u_plus, kInf));
  m = std::max(m, lebesgue_norm(q.u_minus, kInf));
  return m;
}

// ---------------------------------------------------------------------------
// Pointwise composite profiles and pressure-correction coefficients, with the
// positivity guard on the reconstructed density ratios.

struct CompositeSet {
  GridField psi_p, q_p, phi_p;
  GridField psi_m, q_m, phi_m;
  GridField g1, g2, g3, g4;
};

CompositeSet composite_fields(const SimulationState& st,
                              const ClosureModel& model,
                              const IntegratorConfig& cfg) {
  const Grid& g = st.n_plus.grid();
  const std::size_t pts = g.points();
  const double rk = std::sqrt(st.kappa);

  std::vector<double> yp(pts), ym(pts);
  const cd* np = st.n_plus.phys(0);
  const cd* nm = st.n_minus.phys(0);
  double lo = kInf, hi = -kInf;
  for (std::size_t s = 0; s < pts; ++s) {
    yp[s] = np[s].real() / rk;
    ym[s] = nm[s].real() / rk;
    lo = std::min(lo, std::min(yp[s], ym[s]));
    hi = std::max(hi, std::max(yp[s], ym[s]));
  }
  const double y_floor = fluctuation_forward(model, cfg.r_floor);
  const double y_ceil = fluctuation_forward(model, cfg.r_ceil);
  if (!(lo >= y_floor) || !(hi <= y_ceil))
    throw PositivityBreach(
        "density ratio left the working range [" + format_g17(cfg.r_floor) +
        ", " + format_g17(cfg.r_ceil) + "] (fluctuation span [" +
        format_g17(lo) + ", " + format_g17(hi) + "])");

  std::vector<double> rp(pts), rm(pts);
  fluctuation_inverse_array(model, yp.data(), pts, rp.data());
  fluctuation_inverse_array(model, ym.data(), pts, rm.data());

  auto wrap = [&](const std::vector<double>& a) {
    GridField f(g, 1, true);
    cd* o = f.phys(0);
    for (std::size_t s = 0; s < pts; ++s) o[s] = a[s];
    f.mark_phys_valid();
    return f;
  };

  CompositeSet out;
  std::vector<double> a(pts), b(pts), c(pts), d(pts);
  composites_from_R(model, rp.data(), pts, a.data(), b.data(), c.data());
  out.psi_p = wrap(a);
  out.q_p = wrap(b);
  out.phi_p = wrap(c);
  composites_from_R(model, rm.data(), pts, a.data(), b.data(), c.data());
  out.psi_m = wrap(a);
  out.q_m = wrap(b);
  out.phi_m = wrap(c);
  g_from_R(model, rp.data(), rm.data(), pts, a.data(), b.data(), c.data(),
           d.data());
  out.g1 = wrap(a);
  out.g2 = wrap(b);
  out.g3 = wrap(c);
  out.g4 = wrap(d);
  return out;
}

// ---------------------------------------------------------------------------
// φ-functions, cancellation-free near the origin.

cd expm1_c(cd z) {
  const double ex = std::expm1(z.real());
  const double cy = std::cos(z.imag());
  const double sy = std::sin(z.imag());
  const double sh = std::sin(0.5 * z.imag());
  return cd{ex * cy - 2.0 * sh * sh, (1.0 + ex) * sy};
}

cd phi1_c(cd z) {
  if (std::abs(z) < 1e-4)
    return 1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0)));
  return expm1_c(z) / z;
}

cd phi2_c(cd z) {
  if (std::abs(z) < 1e-2)
    return 0.5 +
           z * (1.0 / 6.0 +
                z * (1.0 / 24.0 +
                     z * (1.0 / 120.0 + z * (1.0 / 720.0 + z / 5040.0))));
  return (expm1_c(z) - z) / (z * z);
}

double phi1_r(double z) {
  if (std::fabs(z) < 1e-4)
    return 1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0)));
  return std::expm1(z) / z;
}

double phi2_r(double z) {
  if (std::fabs(z) < 1e-2)
    return 0.5 +
           z * (1.0 / 6.0 +
                z * (1.0 / 24.0 +
                     z * (1.0 / 120.0 + z * (1.0 / 720.0 + z / 5040.0))));
  return (std::expm1(z) - z) / (z * z);
}

// Scaling-and-squaring exponential (Taylor core at norm ≤ 1/4).
Eigen::MatrixXd expm_real(const Eigen::MatrixXd& m) {
  double nrm = 0.0;
  for (int i = 0; i < m.rows(); ++i) nrm = std::max(nrm, m.row(i).cwiseAbs().sum());
  int s = 0;
  while (nrm > 0.25) {
    nrm *= 0.5;
    ++s;
  }
  const Eigen::MatrixXd a = m / std::ldexp(1.0, s);
  Eigen::MatrixXd x = Eigen::MatrixXd::Identity(m.rows(), m.cols());
  Eigen::MatrixXd term = x;
  for (int k = 1; k <= 20; ++k) {
    term = (term * a) / static_cast<double>(k);
    x += term;
  }
  for (int k = 0; k < s; ++k) x = x * x;
  return x;
}

}  // namespace

// ---------------------------------------------------------------------------

FieldQuad make_quad(const Grid& grid) {
  return FieldQuad{GridField(grid, 1, true), GridField(grid, 1, true),
                   GridField(grid, grid.dim(), true),
                   GridField(grid, grid.dim(), true)};
}

SimulationState make_state(const Grid& grid, double kappa, bool with_reference) {
  if (!(kappa > 0.0)) throw OutOfRange("capillarity strength must be positive");
  SimulationState st;
  st.kappa = kappa;
  st.n_plus = GridField(grid, 1, true);
  st.n_minus = GridField(grid, 1, true);
  st.u_plus = GridField(grid, grid.dim(), true);
  st.u_minus = GridField(grid, grid.dim(), true);
  st.has_reference = with_reference;
  if (with_reference) {
    st.v_plus = GridField(grid, grid.dim(), true);
    st.v_minus = GridField(grid, grid.dim(), true);
  }
  record_means(st);
  return st;
}

SimulationState make_initial_state(const Grid& grid, double kappa,
                                   double amplitude, std::uint64_t seed,
                                   bool with_reference) {
  SimulationState st = make_state(grid, kappa, with_reference);
  const int d = grid.dim();
  const double s_u = 0.5 * d - 1.0;  // velocity regularity d/2 − 1
  const double s_n = 0.5 * d;        // densities one derivative smoother
  st.u_plus = random_besov_field(grid, s_u, hash_mix(seed, 1), d, amplitude);
  st.u_minus = random_besov_field(grid, s_u, hash_mix(seed, 2), d, amplitude);
  st.n_plus = random_besov_field(grid, s_n, hash_mix(seed, 3), 1, amplitude);
  st.n_minus = random_besov_field(grid, s_n, hash_mix(seed, 4), 1, amplitude);
  if (with_reference) {
    helmholtz_split(st.u_plus, &st.v_plus, nullptr);
    helmholtz_split(st.u_minus, &st.v_minus, nullptr);
  }
  record_means(st);
  return st;
}

void record_means(SimulationState& st) {
  st.mean_n_plus = field_mean(st.n_plus, 0).real();
  st.mean_n_minus = field_mean(st.n_minus, 0).real();
  for (int c = 0; c < st.u_plus.comps(); ++c) {
    st.mean_u_plus[c] = field_mean(st.u_plus, c).real();
    st.mean_u_minus[c] = field_mean(st.u_minus, c).real();
  }
}

double advective_cfl(const SimulationState& st) {
  double vmax = std::max(lebesgue_norm(st.u_plus, kInf),
                         lebesgue_norm(st.u_minus, kInf));
  if (st.has_reference && st.v_plus.comps() > 0)
    vmax = std::max(vmax, std::max(lebesgue_norm(st.v_plus, kInf),
                                   lebesgue_norm(st.v_minus, kInf)));
  if (vmax == 0.0) return kInf;
  return st.n_plus.grid().dx() / vmax;
}

// ---------------------------------------------------------------------------

FieldQuad nonlinear_rhs(const SimulationState& st, const ClosureModel& model,
                        const IntegratorConfig& cfg) {
  const Grid& g = st.n_plus.grid();
  const int d = g.dim();
  const double rk = std::sqrt(st.kappa);
  const CompositeSet cs = composite_fields(st, model, cfg);

  const GridField gradn_p = gradient(st.n_plus);
  const GridField gradn_m = gradient(st.n_minus);

  FieldQuad out = make_quad(g);
  for (int phase = 0; phase < 2; ++phase) {
    const GridField& n = phase == 0 ? st.n_plus : st.n_minus;
    const GridField& u = phase == 0 ? st.u_plus : st.u_minus;
    const GridField& psi = phase == 0 ? cs.psi_p : cs.psi_m;
    const GridField& qt = phase == 0 ? cs.q_p : cs.q_m;
    const GridField& ph = phase == 0 ? cs.phi_p : cs.phi_m;
    const GridField& ga = phase == 0 ? cs.g1 : cs.g3;
    const GridField& gb = phase == 0 ? cs.g2 : cs.g4;
    const GridField& gradn = phase == 0 ? gradn_p : gradn_m;
    GridField& dn = phase == 0 ? out.n_plus : out.n_minus;
    GridField& du = phase == 0 ? out.u_plus : out.u_minus;

    const GridField divu = divergence(u);
    const GridField lapn = laplacian(n);

    // Density: transport −u·∇n and dilation −√κ ψ̃ div u (either literally or
    // in the divergence-balanced split that pins the mean).
    dn = ddot(u, gradn);
    scale(dn, -1.0);
    if (cfg.balanced_mass) {
      GridField divpu = divergence(dmul(psi, u));
      axpy_spec(dn, cd{-rk, 0.0}, divpu);
      GridField upsi = ddot(u, gradient(psi));
      axpy_spec(dn, cd{rk, 0.0}, upsi);
    } else {
      GridField pdiv = dmul(psi, divu);
      axpy_spec(dn, cd{-rk, 0.0}, pdiv);
    }
    dealias_two_thirds(dn);
    if (cfg.balanced_mass) {
      dn.spec(0)[0] = cd{0.0, 0.0};
      dn.mark_spec_valid();
    }

    // Velocity advection −(u·∇)u.
    GridField advu(g, d, true);
    for (int i = 0; i < d; ++i)
      set_comp(advu, i, ddot(u, gradient(comp_of(u, i))));
    advu.mark_spec_valid();

    // (1 + Q̃) div(2 φ̃ 𝔻u) with 𝔻u the symmetric gradient.
    GridField viscdiv(g, d, true);
    for (int i = 0; i < d; ++i) {
      GridField acc(g, 1, true);
      const GridField ui = comp_of(u, i);
      for (int j = 0; j < d; ++j) {
        GridField sym = derivative(ui, j);
        axpy_spec(sym, cd{1.0, 0.0}, derivative(comp_of(u, j), i));
        axpy_spec(acc, cd{1.0, 0.0}, derivative(dmul(ph, sym), j));
      }
      set_comp(viscdiv, i, acc);
    }
    viscdiv.mark_spec_valid();
    GridField oneq = qt;
    {
      cd* p = oneq.phys(0);
      for (std::size_t s = 0; s < g.points(); ++s) p[s] += 1.0;
      oneq.mark_phys_valid();
    }
    const GridField visc1 = dmul(oneq, viscdiv);

    // Q̃ (Δu + ∇div u).
    GridField heat = laplacian(u);
    axpy_spec(heat, cd{1.0, 0.0}, gradient(divu));
    const GridField visc2 = dmul(qt, heat);

    // Pressure corrections −κ^{-1/2}(g̃_a ∇n⁺ + g̃_b ∇n⁻).
    const GridField pra = dmul(ga, gradn_p);
    const GridField prb = dmul(gb, gradn_m);

    // Capillary terms ∇(½|∇n|²) + √κ ∇(ψ̃ Δn).
    GridField half = ddot(gradn, gradn);
    scale(half, 0.5);
    const GridField kort1 = gradient(half);
    const GridField kort2 = gradient(dmul(psi, lapn));

    du = advu;
    scale(du, -1.0);
    axpy_spec(du, cd{1.0, 0.0}, visc1);
    axpy_spec(du, cd{1.0, 0.0}, visc2);
    axpy_spec(du, cd{-1.0 / rk, 0.0}, pra);
    axpy_spec(du, cd{-1.0 / rk, 0.0}, prb);
    axpy_spec(du, cd{1.0, 0.0}, kort1);
    axpy_spec(du, cd{rk, 0.0}, kort2);
    dealias_two_thirds(du);
  }
  return out;
}

double alias_residual_check(const SimulationState& st, const ClosureModel& model,
                            const IntegratorConfig& cfg) {
  const Grid& g = st.n_plus.grid();
  const CompositeSet cs = composite_fields(st, model, cfg);
  const GridField divu = divergence(st.u_plus);
  const GridField coarse = dmul(cs.psi_p, divu);

  // The same product on a zero-padded double lattice, truncated back.
  const Grid fine(g.dim(), 2 * g.n(), g.lambda());
  const int fn = fine.n();
  auto fine_index = [&](std::size_t s) {
    int ax[3];
    g.axes(s, ax);
    std::size_t f = 0;
    for (int a = 0; a < g.dim(); ++a) {
      const int k = g.kindex(ax[a]);
      f = f * fn + static_cast<std::size_t>(((k % fn) + fn) % fn);
    }
    return f;
  };
  auto pad = [&](const GridField& src) {
    GridField out(fine, 1, true);
    cd* o = out.spec(0);
    const cd* p = src.spec(0);
    for (std::size_t s = 0; s < g.points(); ++s) o[fine_index(s)] = p[s];
    out.mark_spec_valid();
    return out;
  };
  const GridField prod = multiply(pad(cs.psi_p), pad(divu));
  GridField back(g, 1, true);
  {
    cd* o = back.spec(0);
    const cd* p = prod.spec(0);
    for (std::size_t s = 0; s < g.points(); ++s) o[s] = p[fine_index(s)];
    back.mark_spec_valid();
  }
  dealias_two_thirds(back);

  double num = 0.0, den = 0.0;
  const cd* a = back.spec(0);
  const cd* b = coarse.spec(0);
  for (std::size_t s = 0; s < g.points(); ++s) {
    num += std::norm(a[s] - b[s]);
    den += std::norm(a[s]);
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

// ---------------------------------------------------------------------------

LinearPropagator::LinearPropagator(const Grid& grid, double kappa,
                                   const ClosureCoefficients& co, double dt)
    : grid_(grid), kappa_(kappa), dt_(dt) {
  if (!(dt > 0.0)) throw ConfigError("propagator needs a positive time step");
  if (!(kappa > 0.0)) throw OutOfRange("capillarity strength must be positive");
  if (!co.stable)
    std::fprintf(stderr,
                 "[propagator] coefficients outside the stability window; "
                 "running as an instability experiment\n");
  const std::size_t pts = grid.points();
  e4_.resize(pts);
  p14_.resize(pts);
  p24_.resize(pts);
  et_.resize(pts);
  p1t_.resize(pts);
  p2t_.resize(pts);
  const double rk = std::sqrt(kappa);

  for (std::size_t s = 0; s < pts; ++s) {
    const double x2 = grid.xi_abs2(s);
    const double zt = -x2 * dt;
    et_[s] = std::exp(zt);
    p1t_[s] = phi1_r(zt);
    p2t_[s] = phi2_r(zt);
    if (x2 == 0.0) {
      e4_[s].setIdentity();
      p14_[s].setIdentity();
      p24_[s] = 0.5 * Eigen::Matrix4d::Identity();
      continue;
    }
    const double x = std::sqrt(x2);
    Eigen::Matrix4d a;
    a << 0, 0, -rk * x, 0,
        0, 0, 0, -rk * x,
        (co.beta1 / rk) * x + rk * x * x2, (co.beta2 / rk) * x, -2.0 * x2, 0,
        (co.beta3 / rk) * x, (co.beta4 / rk) * x + rk * x * x2, 0, -2.0 * x2;
    a *= dt;

    const Eigen::EigenSolver<Eigen::Matrix4d> es(a);
    const Eigen::Matrix4cd v = es.eigenvectors();
    const Eigen::JacobiSVD<Eigen::Matrix4cd> svd(v);
    const double cond = svd.singularValues()(0) /
                        std::max(svd.singularValues()(3), 1e-300);
    if (cond <= 1e8) {
      Eigen::Vector4cd ee, f1, f2;
      for (int k = 0; k < 4; ++k) {
        const cd z = es.eigenvalues()(k);
        ee(k) = std::exp(z);
        f1(k) = phi1_c(z);
        f2(k) = phi2_c(z);
      }
      const Eigen::Matrix4cd vinv = v.inverse();
      e4_[s] = (v * ee.asDiagonal() * vinv).real();
      p14_[s] = (v * f1.asDiagonal() * vinv).real();
      p24_[s] = (v * f2.asDiagonal() * vinv).real();
    } else {
      // Defective (or nearly so): exponentiate the augmented block matrix
      // whose top row carries e^A, φ₁(A), φ₂(A).
      ++fallback_;
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(12, 12);
      m.topLeftCorner<4, 4>() = a;
      m.block<4, 4>(0, 4).setIdentity();
      m.block<4, 4>(4, 8).setIdentity();
      const Eigen::MatrixXd e = expm_real(m);
      e4_[s] = e.topLeftCorner<4, 4>();
      p14_[s] = e.block<4, 4>(0, 4);
      p24_[s] = e.block<4, 4>(0, 8);
    }
  }
}

FieldQuad LinearPropagator::apply(const FieldQuad& w, int which) const {
  const Grid& g = grid_;
  const int d = g.dim();
  if (w.n_plus.grid() != g || w.u_plus.comps() != d || w.u_minus.comps() != d)
    throw OutOfRange("propagator input does not live on the propagator grid");
  FieldQuad out = make_quad(g);
  const std::vector<Eigen::Matrix4d>& m4 =
      which == 0 ? e4_ : which == 1 ? p14_ : p24_;
  const std::vector<double>& mt = which == 0 ? et_ : which == 1 ? p1t_ : p2t_;

  const cd* np = w.n_plus.spec(0);
  const cd* nm = w.n_minus.spec(0);
  const cd* up[3] = {nullptr, nullptr, nullptr};
  const cd* um[3] = {nullptr, nullptr, nullptr};
  cd* onp = out.n_plus.spec(0);
  cd* onm = out.n_minus.spec(0);
  cd* oup[3] = {nullptr, nullptr, nullptr};
  cd* oum[3] = {nullptr, nullptr, nullptr};
  for (int c = 0; c < d; ++c) {
    up[c] = w.u_plus.spec(c);
    um[c] = w.u_minus.spec(c);
    oup[c] = out.u_plus.spec(c);
    oum[c] = out.u_minus.spec(c);
  }

  const cd iu{0.0, 1.0};
  for (std::size_t s = 0; s < g.points(); ++s) {
    const double x2 = g.xi_abs2(s);
    if (x2 == 0.0) {
      const double f = which == 2 ? 0.5 : 1.0;
      onp[s] = f * np[s];
      onm[s] = f * nm[s];
      for (int c = 0; c < d; ++c) {
        oup[c][s] = f * up[c][s];
        oum[c][s] = f * um[c][s];
      }
      continue;
    }
    double xi[3];
    g.wavevector(s, xi);
    const double x = std::sqrt(x2);

    cd dot_p{0.0, 0.0}, dot_m{0.0, 0.0};
    for (int c = 0; c < d; ++c) {
      dot_p += xi[c] * up[c][s];
      dot_m += xi[c] * um[c][s];
    }
    const cd mu_p = iu * dot_p / x;  // longitudinal amplitude
    const cd mu_m = iu * dot_m / x;

    const Eigen::Matrix4d& b = m4[s];
    const cd w0 = np[s], w1 = nm[s];
    const cd o0 = b(0, 0) * w0 + b(0, 1) * w1 + b(0, 2) * mu_p + b(0, 3) * mu_m;
    const cd o1 = b(1, 0) * w0 + b(1, 1) * w1 + b(1, 2) * mu_p + b(1, 3) * mu_m;
    const cd o2 = b(2, 0) * w0 + b(2, 1) * w1 + b(2, 2) * mu_p + b(2, 3) * mu_m;
    const cd o3 = b(3, 0) * w0 + b(3, 1) * w1 + b(3, 2) * mu_p + b(3, 3) * mu_m;
    onp[s] = o0;
    onm[s] = o1;
    for (int c = 0; c < d; ++c) {
      const double xh = xi[c] / x;
      const cd perp_p = up[c][s] + iu * xh * mu_p;  // û − (−i ξ̂ μ)
      const cd perp_m = um[c][s] + iu * xh * mu_m;
      oup[c][s] = -iu * xh * o2 + mt[s] * perp_p;
      oum[c][s] = -iu * xh * o3 + mt[s] * perp_m;
    }
  }
  out.n_plus.mark_spec_valid();
  out.n_minus.mark_spec_valid();
  out.u_plus.mark_spec_valid();
  out.u_minus.mark_spec_valid();
  return out;
}

FieldQuad LinearPropagator::apply_exp(const FieldQuad& w) const {
  return apply(w, 0);
}
FieldQuad LinearPropagator::apply_phi1(const FieldQuad& w) const {
  return apply(w, 1);
}
FieldQuad LinearPropagator::apply_phi2(const FieldQuad& w) const {
  return apply(w, 2);
}

Eigen::MatrixXcd LinearPropagator::assemble_full(std::size_t s,
                                                 int which) const {
  const int d = grid_.dim();
  const int m = 2 + 2 * d;
  const double x2 = grid_.xi_abs2(s);
  if (x2 == 0.0) {
    const double f = which == 2 ? 0.5 : 1.0;
    return f * Eigen::MatrixXcd::Identity(m, m);
  }
  double xi[3];
  grid_.wavevector(s, xi);
  const double x = std::sqrt(x2);
  Eigen::MatrixXcd basis = Eigen::MatrixXcd::Zero(m, 4);
  basis(0, 0) = 1.0;
  basis(1, 1) = 1.0;
  for (int c = 0; c < d; ++c) {
    basis(2 + c, 2) = cd{0.0, -xi[c] / x};
    basis(2 + d + c, 3) = cd{0.0, -xi[c] / x};
  }
  const Eigen::Matrix4d& blk =
      which == 0 ? e4_[s] : which == 1 ? p14_[s] : p24_[s];
  const double sc = which == 0 ? et_[s] : which == 1 ? p1t_[s] : p2t_[s];
  Eigen::MatrixXcd out = basis * blk.cast<cd>() * basis.adjoint();
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      const double tv = (a == b ? 1.0 : 0.0) - (xi[a] / x) * (xi[b] / x);
      out(2 + a, 2 + b) += sc * tv;
      out(2 + d + a, 2 + d + b) += sc * tv;
    }
  return out;
}

Eigen::MatrixXcd LinearPropagator::full_matrix(std::size_t s) const {
  return assemble_full(s, 0);
}
Eigen::MatrixXcd LinearPropagator::full_phi1(std::size_t s) const {
  return assemble_full(s, 1);
}
Eigen::MatrixXcd LinearPropagator::full_phi2(std::size_t s) const {
  return assemble_full(s, 2);
}

// ---------------------------------------------------------------------------

void etd_step(SimulationState& st, const ClosureModel& model,
              const LinearPropagator& prop, const IntegratorConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw ConfigError("time step must be positive");
  if (prop.grid() != st.n_plus.grid() || prop.dt() != cfg.dt ||
      prop.kappa() != st.kappa)
    throw ConfigError("propagator does not match the state and config");

  const FieldQuad w{st.n_plus, st.n_minus, st.u_plus, st.u_minus};
  FieldQuad next = prop.apply_exp(w);
  if (!cfg.linear_only) {
    const FieldQuad nw = nonlinear_rhs(st, model, cfg);
    const FieldQuad p1 = prop.apply_phi1(nw);
    quad_axpy(next, cfg.dt, p1);
    if (cfg.scheme == Scheme::ETDRK2) {
      SimulationState mid;
      mid.t = st.t + cfg.dt;
      mid.kappa = st.kappa;
      mid.n_plus = next.n_plus;
      mid.n_minus = next.n_minus;
      mid.u_plus = next.u_plus;
      mid.u_minus = next.u_minus;
      FieldQuad na = nonlinear_rhs(mid, model, cfg);
      quad_axpy(na, -1.0, nw);
      const FieldQuad p2 = prop.apply_phi2(na);
      quad_axpy(next, cfg.dt, p2);
    }
  }
  quad_dealias(next);

  const double sup = quad_sup(next);
  if (!std::isfinite(sup) || sup > cfg.blowup_threshold)
    throw BlowUp("solution sup-norm " + format_g17(sup) +
                 " exceeded the blow-up threshold at t = " +
                 format_g17(st.t + cfg.dt));

  st.n_plus = std::move(next.n_plus);
  st.n_minus = std::move(next.n_minus);
  st.u_plus = std::move(next.u_plus);
  st.u_minus = std::move(next.u_minus);
  st.t += cfg.dt;
}

void ns_reference_step(SimulationState& st, const IntegratorConfig& cfg) {
  if (!st.has_reference || st.v_plus.comps() == 0)
    throw ConfigError("state carries no reference fields");
  if (!(cfg.dt > 0.0)) throw ConfigError("time step must be positive");
  const Grid& g = st.v_plus.grid();
  const int d = g.dim();

  // −P(v·∇v), dealiased, mean pinned (the advection is an exact divergence
  // for solenoidal v).
  auto rhs = [&](const GridField& v) {
    GridField adv(g, d, true);
    for (int i = 0; i < d; ++i)
      set_comp(adv, i, ddot(v, gradient(comp_of(v, i))));
    adv.mark_spec_valid();
    scale(adv, -1.0);
    GridField proj(g, d, true);
    helmholtz_split(adv, &proj, nullptr);
    for (int c = 0; c < d; ++c) proj.spec(c)[0] = cd{0.0, 0.0};
    proj.mark_spec_valid();
    return proj;
  };
  auto heat_apply = [&](const GridField& f, int which) {
    GridField out(g, d, true);
    for (int c = 0; c < d; ++c) {
      const cd* p = f.spec(c);
      cd* o = out.spec(c);
      for (std::size_t s = 0; s < g.points(); ++s) {
        const double z = -g.xi_abs2(s) * cfg.dt;
        const double fac =
            which == 0 ? std::exp(z) : which == 1 ? phi1_r(z) : phi2_r(z);
        o[s] = fac * p[s];
      }
    }
    out.mark_spec_valid();
    return out;
  };

  for (GridField* vp : {&st.v_plus, &st.v_minus}) {
    GridField& v = *vp;
    GridField next = heat_apply(v, 0);
    if (!cfg.linear_only) {
      const GridField n1 = rhs(v);
      axpy_spec(next, cd{cfg.dt, 0.0}, heat_apply(n1, 1));
      if (cfg.scheme == Scheme::ETDRK2) {
        GridField diff = rhs(next);
        axpy_spec(diff, cd{-1.0, 0.0}, n1);
        axpy_spec(next, cd{cfg.dt, 0.0}, heat_apply(diff, 2));
      }
    }
    dealias_two_thirds(next);
    GridField proj(g, d, true);
    helmholtz_split(next, &proj, nullptr);
    const double sup = lebesgue_norm(proj, kInf);
    if (!std::isfinite(sup) || sup > cfg.blowup_threshold)
      throw BlowUp("reference flow sup-norm " + format_g17(sup) +
                   " exceeded the blow-up threshold");
    v = std::move(proj);
  }
}

// ---------------------------------------------------------------------------

double diagnostic_value(const DiagnosticPoint& p, const std::string& name) {
  for (const auto& kv : p.values)
    if (kv.first == name) return kv.second;
  return kNan;
}

namespace {

GridField apply_derivative_order(const GridField& f,
                                 const std::array<int, 3>& order) {
  GridField r = f;
  for (int axis = 0; axis < 3; ++axis)
    for (int k = 0; k < order[axis]; ++k) r = derivative(r, axis);
  return r;
}

std::string order_tag(const std::array<int, 3>& order) {
  return "d" + std::to_string(order[0]) + std::to_string(order[1]) +
         std::to_string(order[2]);
}

}  // namespace

SimulationResult run_simulation(SimulationState st, const ClosureModel& model,
                                IntegratorConfig cfg, double horizon,
                                const DiagnosticsRequest& diag) {
  if (!(cfg.dt > 0.0)) throw ConfigError("time step must be positive");
  if (!(horizon >= 0.0)) throw OutOfRange("horizon must be nonnegative");
  const Grid& g = st.n_plus.grid();
  const int d = g.dim();
  const ClosureCoefficients co = equilibrium_coefficients(model);
  const LinearPropagator prop(g, st.kappa, co, cfg.dt);

  if (st.has_reference && st.v_plus.comps() == 0) {
    st.v_plus = GridField(g, d, true);
    st.v_minus = GridField(g, d, true);
    helmholtz_split(st.u_plus, &st.v_plus, nullptr);
    helmholtz_split(st.u_minus, &st.v_minus, nullptr);
  }
  dealias_two_thirds(st.n_plus);
  dealias_two_thirds(st.n_minus);
  dealias_two_thirds(st.u_plus);
  dealias_two_thirds(st.u_minus);
  if (st.has_reference) {
    dealias_two_thirds(st.v_plus);
    dealias_two_thirds(st.v_minus);
  }

  std::optional<DyadicBank> bank;
  try {
    bank.emplace(build_dyadic_bank(g));
  } catch (const Error&) {
    // grid too small for a three-block decomposition: band diagnostics off
  }
  bool do_lyap = diag.lyapunov && co.stable && bank.has_value();
  double delta1 = 0.0;
  if (do_lyap) {
    try {
      delta1 = default_delta1(co, st.kappa, g);
    } catch (const Error&) {
      do_lyap = false;
    }
  }

  const int cadence =
      diag.every_steps > 0 ? diag.every_steps : std::max(1, cfg.snapshot_every);
  const long long nsteps =
      horizon <= 0.0
          ? 0
          : static_cast<long long>(std::ceil(horizon / cfg.dt - 1e-9));

  SimulationResult res;
  double alias_last = kNan;

  auto record = [&](std::size_t step) {
    DiagnosticPoint p;
    p.t = st.t;
    auto& vals = p.values;
    const double s1 = 0.5 * d - 1.0;
    const double rk = std::sqrt(st.kappa);
    auto bes = [&](const GridField& f, double ss, double pp) {
      if (!bank) return kNan;
      try {
        return besov_norm(*bank, f, ss, pp, 1.0);
      } catch (const Error&) {
        return kNan;
      }
    };
    if (diag.besov) {
      GridField sn = st.n_plus;
      scale(sn, 1.0 / rk);
      vals.push_back({"besov_n_plus", bes(sn, s1, 2.0)});
      sn = st.n_minus;
      scale(sn, 1.0 / rk);
      vals.push_back({"besov_n_minus", bes(sn, s1, 2.0)});
      const GridField gnp = gradient(st.n_plus);
      const GridField gnm = gradient(st.n_minus);
      vals.push_back({"besov_grad_n_plus", bes(gnp, s1, 2.0)});
      vals.push_back({"besov_grad_n_minus", bes(gnm, s1, 2.0)});
      vals.push_back({"besov_u_plus", bes(st.u_plus, s1, 2.0)});
      vals.push_back({"besov_u_minus", bes(st.u_minus, s1, 2.0)});

      const double sp = d / diag.split_p;
      for (int phase = 0; phase < 2; ++phase) {
        const GridField& u = phase == 0 ? st.u_plus : st.u_minus;
        const GridField& gn = phase == 0 ? gnp : gnm;
        GridField qu(g, d, true);
        helmholtz_split(u, nullptr, &qu);
        GridField stacked(g, 2 * d, true);
        for (int c = 0; c < d; ++c) {
          set_comp(stacked, c, comp_of(gn, c));
          set_comp(stacked, d + c, comp_of(qu, c));
        }
        stacked.mark_spec_valid();
        vals.push_back({phase == 0 ? "split_plus" : "split_minus",
                        bes(stacked, sp, diag.split_p)});
      }
      if (st.has_reference && st.v_plus.comps() > 0) {
        for (int phase = 0; phase < 2; ++phase) {
          const GridField& u = phase == 0 ? st.u_plus : st.u_minus;
          const GridField& v = phase == 0 ? st.v_plus : st.v_minus;
          GridField pu(g, d, true);
          helmholtz_split(u, &pu, nullptr);
          axpy_spec(pu, cd{-1.0, 0.0}, v);
          vals.push_back(
              {phase == 0 ? "ref_err_plus" : "ref_err_minus", bes(pu, s1, 2.0)});
        }
      }
    }
    for (const auto& order : diag.derivative_orders) {
      const std::string tag = order_tag(order);
      vals.push_back({"l2_" + tag + "_u_plus",
                      lebesgue_norm(apply_derivative_order(st.u_plus, order), 2.0)});
      vals.push_back({"l2_" + tag + "_u_minus",
                      lebesgue_norm(apply_derivative_order(st.u_minus, order), 2.0)});
      vals.push_back({"l2_" + tag + "_n_plus",
                      lebesgue_norm(apply_derivative_order(st.n_plus, order), 2.0)});
      vals.push_back({"l2_" + tag + "_n_minus",
                      lebesgue_norm(apply_derivative_order(st.n_minus, order), 2.0)});
    }
    if (do_lyap) {
      double total = 0.0;
      for (int j = bank->j_min(); j <= bank->j_max(); ++j) {
        const double e = lyapunov_energy(st.n_plus, st.n_minus, st.u_plus,
                                         st.u_minus, *bank, j, co, st.kappa,
                                         delta1);
        vals.push_back({"lyap_" + std::to_string(j), e});
        total += e;
      }
      vals.push_back({"lyap_total", total});
    }
    vals.push_back({"mean_drift_n_plus",
                    std::fabs(field_mean(st.n_plus).real() - st.mean_n_plus)});
    vals.push_back({"mean_drift_n_minus",
                    std::fabs(field_mean(st.n_minus).real() - st.mean_n_minus)});
    double udrift = 0.0;
    for (int c = 0; c < d; ++c) {
      udrift = std::max(udrift, std::fabs(field_mean(st.u_plus, c).real() -
                                          st.mean_u_plus[c]));
      udrift = std::max(udrift, std::fabs(field_mean(st.u_minus, c).real() -
                                          st.mean_u_minus[c]));
    }
    vals.push_back({"mean_drift_u", udrift});
    const double cfl = advective_cfl(st);
    vals.push_back(
        {"cfl_ratio", cfl == kInf ? 0.0 : cfg.dt / (cfg.cfl_safety * cfl)});
    vals.push_back({"alias_residual", alias_last});
    res.series.push_back(std::move(p));
    if (diag.on_snapshot) diag.on_snapshot(st, step);
  };

  record(0);
  for (long long k = 1; k <= nsteps; ++k) {
    try {
      etd_step(st, model, prop, cfg);
      if (st.has_reference) ns_reference_step(st, cfg);
      if (!cfg.linear_only && k % 100 == 0)
        alias_last = alias_residual_check(st, model, cfg);
    } catch (const BlowUp& e) {
      res.failure = e.what();
      break;
    } catch (const PositivityBreach& e) {
      res.failure = e.what();
      break;
    }
    res.steps = k;
    if (k % cadence == 0 || k == nsteps) record(k);
  }
  res.final_state = std::move(st);
  return res;
}

}  // namespace twofluid
