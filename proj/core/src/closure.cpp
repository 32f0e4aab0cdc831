#include "twofluid/closure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "twofluid/errors.hpp"

namespace twofluid {

namespace {
const double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_in_range(double v, const char* what) {
  if (!(v >= kDensityMin && v <= kDensityMax))
    throw OutOfRange(std::string(what) + " = " + std::to_string(v) +
                     " outside working range [1e-3, 1e6]");
}
}  // namespace

// ---------------------------------------------------------------------------
// PressureLaw

PressureLaw PressureLaw::gamma_law(double gamma, double amplitude) {
  if (!(gamma >= 1.0)) throw OutOfRange("gamma-law exponent must satisfy gamma >= 1");
  if (!(amplitude > 0.0)) throw OutOfRange("gamma-law amplitude must be positive");
  PressureLaw law;
  law.gamma_ = gamma;
  law.amp_ = amplitude;
  return law;
}

PressureLaw PressureLaw::tabulated(std::vector<double> s, std::vector<double> p) {
  if (s.size() != p.size() || s.size() < 2)
    throw OutOfRange("tabulated pressure law needs >= 2 matching samples");
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!(s[i] > s[i - 1])) throw OutOfRange("tabulated abscissae must increase");
    if (!(p[i] > p[i - 1]))
      throw NonMonotone("tabulated pressure values must increase strictly");
  }
  PressureLaw law;
  // Fritsch–Carlson slope limiting keeps the cubic interpolant monotone.
  const std::size_t n = s.size();
  std::vector<double> sec(n - 1), d(n);
  for (std::size_t i = 0; i + 1 < n; ++i) sec[i] = (p[i + 1] - p[i]) / (s[i + 1] - s[i]);
  d[0] = sec[0];
  d[n - 1] = sec[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = 0.5 * (sec[i - 1] + sec[i]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double a = d[i] / sec[i], b = d[i + 1] / sec[i];
    const double r2 = a * a + b * b;
    if (r2 > 9.0) {
      const double t = 3.0 / std::sqrt(r2);
      d[i] = t * a * sec[i];
      d[i + 1] = t * b * sec[i];
    }
  }
  law.tab_s_ = std::move(s);
  law.tab_p_ = std::move(p);
  law.tab_d_ = std::move(d);
  return law;
}

double PressureLaw::hermite(double s, bool deriv) const {
  const auto& xs = tab_s_;
  // Linear continuation with the end slopes outside the table.
  if (s <= xs.front())
    return deriv ? tab_d_.front() : tab_p_.front() + tab_d_.front() * (s - xs.front());
  if (s >= xs.back())
    return deriv ? tab_d_.back() : tab_p_.back() + tab_d_.back() * (s - xs.back());
  const auto it = std::upper_bound(xs.begin(), xs.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
  const double h = xs[i + 1] - xs[i], t = (s - xs[i]) / h;
  const double p0 = tab_p_[i], p1 = tab_p_[i + 1], m0 = tab_d_[i] * h, m1 = tab_d_[i + 1] * h;
  if (!deriv) {
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * p0 + (t3 - 2 * t2 + t) * m0 +
           (-2 * t3 + 3 * t2) * p1 + (t3 - t2) * m1;
  }
  const double t2 = t * t;
  return ((6 * t2 - 6 * t) * p0 + (3 * t2 - 4 * t + 1) * m0 +
          (-6 * t2 + 6 * t) * p1 + (3 * t2 - 2 * t) * m1) / h;
}

double PressureLaw::operator()(double s) const {
  if (is_gamma()) return amp_ * std::pow(s, gamma_);
  return hermite(s, false);
}

double PressureLaw::prime(double s) const {
  double d;
  if (is_gamma()) {
    d = amp_ * gamma_ * std::pow(s, gamma_ - 1.0);
  } else {
    d = hermite(s, true);
  }
  if (!(d > 0.0))
    throw NonMonotone("pressure law derivative non-positive at s = " + std::to_string(s));
  return d;
}

// ---------------------------------------------------------------------------
// CapillarityProfile

CapillarityProfile CapillarityProfile::power(double exponent) {
  CapillarityProfile m;
  m.a_ = exponent;
  return m;
}

CapillarityProfile CapillarityProfile::custom(std::function<double(double)> m) {
  if (!m) throw OutOfRange("custom capillarity profile must be callable");
  const double at1 = m(1.0);
  if (std::abs(at1 - 1.0) > 1e-12)
    throw OutOfRange("capillarity profile must satisfy m(1) = 1, got m(1) = " +
                     std::to_string(at1));
  CapillarityProfile prof;
  prof.custom_ = std::move(m);
  return prof;
}

double CapillarityProfile::operator()(double s) const {
  const double v = custom_ ? custom_(s) : std::pow(s, a_);
  if (!(v > 0.0))
    throw OutOfRange("capillarity profile non-positive at s = " + std::to_string(s));
  return v;
}

// ---------------------------------------------------------------------------
// Model assembly

ClosureModel make_model(PressureLaw p_plus, PressureLaw p_minus, double fprime1,
                        CapillarityProfile m, double alpha_plus_bar) {
  if (!(alpha_plus_bar > 0.0 && alpha_plus_bar < 1.0))
    throw OutOfRange("reference volume fraction must lie in (0,1)");
  ClosureModel model;
  model.P_plus = std::move(p_plus);
  model.P_minus = std::move(p_minus);
  model.m = std::move(m);
  model.alpha_plus_bar = alpha_plus_bar;
  model.f.slope = fprime1;
  model.f.offset = model.P_plus(model.rhobar_plus()) - model.P_minus(model.rhobar_minus());
  return model;
}

// ---------------------------------------------------------------------------
// Mixture solve

double solve_rho_plus(const ClosureModel& model, double r_plus, double r_minus,
                      double guess) {
  require_in_range(r_plus, "R+");
  require_in_range(r_minus, "R-");

  const double target = model.f(r_minus);
  auto residual = [&](double rho) {
    const double rho_m = r_minus * rho / (rho - r_plus);
    return model.P_plus(rho) - model.P_minus(rho_m) - target;
  };

  // As ρ⁺ → R⁺ the minus density blows up and the residual goes to −∞ for any
  // increasing P⁻; expand the upper end geometrically until the sign flips.
  double lo = r_plus * (1.0 + 1e-9);
  if (!(residual(lo) < 0.0))
    throw NoBracket("mixture residual not negative at the lower bracket end");
  double hi = std::max(2.0 * r_plus, r_plus + r_minus);
  if (guess > lo && guess < r_plus * 1e6) hi = std::max(hi, guess);
  int expansions = 0;
  while (residual(hi) < 0.0) {
    hi *= 2.0;
    if (hi > r_plus * 1e6 || ++expansions > 64)
      throw NoBracket("no sign change up to R+ * 1e6");
  }

  double x = (guess > lo && guess < hi) ? guess : 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const double rho_m = r_minus * x / (x - r_plus);
    const double fx = model.P_plus(x) - model.P_minus(rho_m) - target;
    if (fx > 0.0) hi = x; else lo = x;
    const double dfx = model.P_plus.prime(x) +
                       model.P_minus.prime(rho_m) * r_minus * r_plus / ((x - r_plus) * (x - r_plus));
    double step = fx / dfx;
    double next = x - step;
    if (!(next > lo && next < hi)) {  // Newton left the bracket: bisect
      next = 0.5 * (lo + hi);
      step = x - next;
    }
    const bool done = std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x));
    x = next;
    if (done) break;
  }
  return x;
}

MixtureState mixture_state(const ClosureModel& model, double r_plus, double r_minus) {
  MixtureState ms;
  ms.rho_plus = solve_rho_plus(model, r_plus, r_minus);
  ms.rho_minus = r_minus * ms.rho_plus / (ms.rho_plus - r_plus);
  ms.alpha_plus = r_plus / ms.rho_plus;
  ms.alpha_minus = 1.0 - ms.alpha_plus;
  ms.s2_plus = model.P_plus.prime(ms.rho_plus);
  ms.s2_minus = model.P_minus.prime(ms.rho_minus);
  ms.C2 = ms.s2_minus * ms.s2_plus /
          (ms.alpha_minus * ms.rho_plus * ms.s2_plus + ms.alpha_plus * ms.rho_minus * ms.s2_minus);
  return ms;
}

// ---------------------------------------------------------------------------
// Linearization coefficients and stability

ClosureCoefficients stability_margin(const ClosureModel& model) {
  const MixtureState ms = mixture_state(model, 1.0, 1.0);
  const double fp = model.f.prime(1.0);

  ClosureCoefficients c;
  c.fprime1 = fp;
  c.beta1 = ms.C2 * ms.rho_minus / ms.rho_plus;
  c.beta2 = ms.C2 * (1.0 + ms.alpha_minus * fp / ms.s2_minus);
  c.beta3 = ms.C2;
  c.beta4 = ms.C2 * (ms.rho_plus / ms.rho_minus - ms.alpha_plus * fp / ms.s2_plus);
  const double dif = c.beta1 - c.beta4;
  c.discriminant = dif * dif + 4.0 * c.beta2 * c.beta3;
  if (c.discriminant >= 0.0) {
    const double root = std::sqrt(c.discriminant);
    c.r_plus = 0.5 * (c.beta1 + c.beta4 + root);
    c.r_minus = 0.5 * (c.beta1 + c.beta4 - root);
  } else {
    c.r_plus = c.r_minus = kNaN;
  }
  c.window_low = -ms.s2_minus / ms.alpha_minus;
  c.stable = (fp > c.window_low) && (fp < 0.0);
  c.margin = std::min(std::abs(fp - c.window_low), std::abs(fp));
  return c;
}

ClosureCoefficients equilibrium_coefficients(const ClosureModel& model) {
  ClosureCoefficients c = stability_margin(model);
  if (c.discriminant < 0.0)
    throw DegenerateRoots("coupling discriminant negative: " + std::to_string(c.discriminant));
  return c;
}

// ---------------------------------------------------------------------------
// Fluctuation map

namespace {

// Closed form for power profiles m(s)=s^a: the integrand is τ^{(a-1)/2}.
double forward_power(double a, double R) {
  const double b = 0.5 * (a + 1.0);
  if (std::abs(b) < 1e-14) return std::log(R);
  return (std::pow(R, b) - 1.0) / b;
}

double inverse_power(double a, double y, bool* ok) {
  const double b = 0.5 * (a + 1.0);
  *ok = true;
  if (std::abs(b) < 1e-14) return std::exp(y);
  const double base = 1.0 + b * y;
  if (!(base > 0.0)) {
    *ok = false;
    return 0.0;
  }
  return std::pow(base, 1.0 / b);
}

double forward_quadrature(const CapillarityProfile& m, double R) {
  auto integrand = [&](double tau) { return std::sqrt(m(tau) / tau); };
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      integrand, 1.0, R, 12, 1e-13, &err);
  return v;
}

}  // namespace

double fluctuation_forward(const ClosureModel& model, double R) {
  require_in_range(R, "R");
  if (model.m.is_power()) return forward_power(model.m.exponent(), R);
  return forward_quadrature(model.m, R);
}

double fluctuation_inverse(const ClosureModel& model, double y) {
  if (model.m.is_power()) {
    bool ok = false;
    const double R = inverse_power(model.m.exponent(), y, &ok);
    if (!ok || R < kDensityMin || R > kDensityMax)
      throw OutOfRange("fluctuation argument " + std::to_string(y) +
                       " outside the image of the admissible density range");
    return R;
  }
  // General profile: L is strictly increasing, so bisect/Newton on the range.
  const double ylo = forward_quadrature(model.m, kDensityMin);
  const double yhi = forward_quadrature(model.m, kDensityMax);
  if (!(y >= ylo && y <= yhi))
    throw OutOfRange("fluctuation argument outside [L(1e-3), L(1e6)]");
  double lo = kDensityMin, hi = kDensityMax, x = 1.0;
  if (y < 0.0) hi = 1.0; else lo = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double fx = forward_quadrature(model.m, x) - y;
    if (fx > 0.0) hi = x; else lo = x;
    const double dfx = std::sqrt(model.m(x) / x);
    double next = x - fx / dfx;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-14 * std::max(1.0, std::abs(x))) return next;
    x = next;
  }
  return x;
}

CompositeProfiles composite_profiles(const ClosureModel& model, double n, double kappa) {
  if (!(kappa > 0.0)) throw OutOfRange("capillarity strength must be positive");
  const double y = n / std::sqrt(kappa);
  const double R = fluctuation_inverse(model, y);
  CompositeProfiles c;
  c.psi = std::sqrt(R * model.m(R)) - 1.0;
  c.Q = 1.0 / R - 1.0;
  c.phi = R - 1.0;
  return c;
}

// ---------------------------------------------------------------------------
// Quadratic correction coefficients

namespace {

GCoefficients g_from_state(const ClosureModel& model, const ClosureCoefficients& eq,
                           const MixtureState& ms, double r_plus, double r_minus) {
  const double sq_p = std::sqrt(r_plus / model.m(r_plus));
  const double sq_m = std::sqrt(r_minus / model.m(r_minus));
  const double fp = model.f.prime(r_minus);
  GCoefficients g;
  g.g1 = ms.C2 * ms.rho_minus / ms.rho_plus * sq_p - eq.beta1;
  g.g2 = (ms.C2 + ms.C2 * ms.alpha_minus * fp / ms.s2_minus) * sq_m - eq.beta2;
  g.g3 = ms.C2 * sq_p - eq.beta3;
  g.g4 = (ms.C2 * ms.rho_plus / ms.rho_minus - ms.C2 * ms.alpha_plus * fp / ms.s2_plus) * sq_p -
         eq.beta4;
  return g;
}

}  // namespace

GCoefficients g_coefficients(const ClosureModel& model, double r_plus, double r_minus) {
  const ClosureCoefficients eq = equilibrium_coefficients(model);
  const MixtureState ms = mixture_state(model, r_plus, r_minus);
  return g_from_state(model, eq, ms, r_plus, r_minus);
}

// ---------------------------------------------------------------------------
// Bulk evaluators

void fluctuation_inverse_array(const ClosureModel& model, const double* y,
                               std::size_t count, double* R) {
  if (model.m.is_power()) {
    const double a = model.m.exponent();
    for (std::size_t i = 0; i < count; ++i) {
      bool ok = false;
      R[i] = inverse_power(a, y[i], &ok);
      if (!ok || R[i] < kDensityMin || R[i] > kDensityMax)
        throw OutOfRange("fluctuation argument outside admissible image at sample " +
                         std::to_string(i));
    }
    return;
  }
  for (std::size_t i = 0; i < count; ++i) R[i] = fluctuation_inverse(model, y[i]);
}

void composites_from_R(const ClosureModel& model, const double* R, std::size_t count,
                       double* psi, double* Q, double* phi) {
  if (model.m.is_power()) {
    const double b = 0.5 * (model.m.exponent() + 1.0);
    for (std::size_t i = 0; i < count; ++i) {
      psi[i] = std::pow(R[i], b) - 1.0;  // √(R·R^a) = R^{(a+1)/2}
      Q[i] = 1.0 / R[i] - 1.0;
      phi[i] = R[i] - 1.0;
    }
    return;
  }
  for (std::size_t i = 0; i < count; ++i) {
    psi[i] = std::sqrt(R[i] * model.m(R[i])) - 1.0;
    Q[i] = 1.0 / R[i] - 1.0;
    phi[i] = R[i] - 1.0;
  }
}

void g_from_R(const ClosureModel& model, const double* Rp, const double* Rm,
              std::size_t count, double* g1, double* g2, double* g3, double* g4) {
  const ClosureCoefficients eq = equilibrium_coefficients(model);
  double warm = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    MixtureState ms;
    ms.rho_plus = solve_rho_plus(model, Rp[i], Rm[i], warm);
    warm = ms.rho_plus;
    ms.rho_minus = Rm[i] * ms.rho_plus / (ms.rho_plus - Rp[i]);
    ms.alpha_plus = Rp[i] / ms.rho_plus;
    ms.alpha_minus = 1.0 - ms.alpha_plus;
    ms.s2_plus = model.P_plus.prime(ms.rho_plus);
    ms.s2_minus = model.P_minus.prime(ms.rho_minus);
    ms.C2 = ms.s2_minus * ms.s2_plus /
            (ms.alpha_minus * ms.rho_plus * ms.s2_plus + ms.alpha_plus * ms.rho_minus * ms.s2_minus);
    const GCoefficients g = g_from_state(model, eq, ms, Rp[i], Rm[i]);
    g1[i] = g.g1;
    g2[i] = g.g2;
    g3[i] = g.g3;
    g4[i] = g.g4;
  }
}

}  // namespace twofluid
