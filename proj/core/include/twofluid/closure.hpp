#pragma once

// Two-fluid pressure-closure algebra: barotropic pressure laws for each phase,
// the interphase pressure jump f, the capillarity profile m, and everything
// derived from them at a mixture state (effective densities, volume fractions,
// sound speeds, the mixture speed C², the four linearization coefficients
// β₁..β₄ with their coupling roots r±, the stability window in f'(1), the
// fluctuation change of variables L and its composites, and the quadratic
// correction coefficients g₁..g₄).

#include <cstddef>
#include <functional>
#include <vector>

namespace twofluid {

// Densities and fluctuation arguments the closure is guaranteed to handle.
inline constexpr double kDensityMin = 1e-3;
inline constexpr double kDensityMax = 1e6;

// ---------------------------------------------------------------------------
// Pressure law P(s): either A·s^γ (A>0, γ≥1) or a monotone tabulated law
// interpolated with a monotonicity-preserving cubic (Fritsch–Carlson).
class PressureLaw {
 public:
  static PressureLaw gamma_law(double gamma, double amplitude);
  // Normalized γ-law with dP/ds(1) = 1, i.e. amplitude 1/γ.
  static PressureLaw gamma_law(double gamma) { return gamma_law(gamma, 1.0 / gamma); }
  // Strictly increasing samples; throws NonMonotone otherwise.
  static PressureLaw tabulated(std::vector<double> s, std::vector<double> p);

  double operator()(double s) const;
  double prime(double s) const;  // dP/ds; throws NonMonotone if ≤ 0 at s

  bool is_gamma() const { return tab_s_.empty(); }
  double gamma() const { return gamma_; }
  double amplitude() const { return amp_; }

 private:
  PressureLaw() = default;
  double gamma_ = 1.0, amp_ = 1.0;
  std::vector<double> tab_s_, tab_p_, tab_d_;  // samples + limited slopes
  double hermite(double s, bool deriv) const;
};

// ---------------------------------------------------------------------------
// Interphase pressure jump f(R⁻).  Default shape is linear, anchored so the
// reference equilibrium is exactly consistent: f(1) = P⁺(ρ̄⁺) − P⁻(ρ̄⁻).
struct CapillaryPressure {
  double slope = 0.0;   // f'(1); also f'(s) everywhere for the linear default
  double offset = 0.0;  // f(1)

  double operator()(double s) const { return slope * (s - 1.0) + offset; }
  double prime(double) const { return slope; }
};

// ---------------------------------------------------------------------------
// Capillarity density profile m(s) with m(1)=1.  The power family m(s)=s^a
// has a closed-form fluctuation map; arbitrary profiles fall back to adaptive
// quadrature and safeguarded root finding.
class CapillarityProfile {
 public:
  static CapillarityProfile power(double exponent);           // m(s) = s^a
  static CapillarityProfile constant() { return power(0.0); } // m ≡ 1
  static CapillarityProfile custom(std::function<double(double)> m);

  double operator()(double s) const;
  bool is_power() const { return !custom_; }
  double exponent() const { return a_; }

 private:
  double a_ = 0.0;
  std::function<double(double)> custom_;
};

// ---------------------------------------------------------------------------
struct ClosureModel {
  PressureLaw P_plus = PressureLaw::gamma_law(1.0);
  PressureLaw P_minus = PressureLaw::gamma_law(1.0);
  CapillaryPressure f;
  CapillarityProfile m = CapillarityProfile::constant();
  double alpha_plus_bar = 0.5;  // reference volume fraction ᾱ⁺ ∈ (0,1)

  double alpha_minus_bar() const { return 1.0 - alpha_plus_bar; }
  double rhobar_plus() const { return 1.0 / alpha_plus_bar; }
  double rhobar_minus() const { return 1.0 / alpha_minus_bar(); }
};

// Build a model with the pressure-jump offset derived from equilibrium
// consistency (f(1) = P⁺(ρ̄⁺) − P⁻(ρ̄⁻)).  Validates ᾱ⁺ ∈ (0,1).
ClosureModel make_model(PressureLaw p_plus, PressureLaw p_minus, double fprime1,
                        CapillarityProfile m, double alpha_plus_bar);

// ---------------------------------------------------------------------------
struct MixtureState {
  double rho_plus = 0, rho_minus = 0;   // effective phase densities
  double alpha_plus = 0, alpha_minus = 0;
  double s2_plus = 0, s2_minus = 0;     // squared sound speeds dP±/dρ±
  double C2 = 0;                        // mixture speed s₋²s₊²/(α⁻ρ⁺s₊²+α⁺ρ⁻s₋²)
};

struct ClosureCoefficients {
  double beta1 = 0, beta2 = 0, beta3 = 0, beta4 = 0;
  double discriminant = 0;          // (β₁−β₄)² + 4β₂β₃
  double r_plus = 0, r_minus = 0;   // roots of r² − (β₁+β₄)r + (β₁β₄−β₂β₃)
  double window_low = 0;            // −s₋²/α⁻ at equilibrium; window is (low, 0)
  double fprime1 = 0;
  bool stable = false;
  double margin = 0;                // distance of f'(1) to the nearer window end
};

struct CompositeProfiles {
  double psi = 0;  // ψ̃ = √(R·m(R)) − 1 after R = L⁻¹(κ^{-1/2}n)
  double Q = 0;    // Q̃ = 1/R − 1
  double phi = 0;  // φ̃ = R − 1
};

struct GCoefficients {
  double g1 = 0, g2 = 0, g3 = 0, g4 = 0;
};

// ---------------------------------------------------------------------------
// Root of P⁺(ρ⁺) − P⁻(R⁻ρ⁺/(ρ⁺−R⁺)) − f(R⁻) = 0 on (R⁺, ∞), by safeguarded
// Newton inside a geometrically expanded bracket.  `guess` (if > R⁺) warms the
// iteration.  Throws NoBracket / NonMonotone / OutOfRange.
double solve_rho_plus(const ClosureModel& model, double r_plus, double r_minus,
                      double guess = 0.0);

MixtureState mixture_state(const ClosureModel& model, double r_plus, double r_minus);

ClosureCoefficients equilibrium_coefficients(const ClosureModel& model);

// Stability verdict only (cheaper than the full coefficient set).
ClosureCoefficients stability_margin(const ClosureModel& model);

// Fluctuation map L(R) = ∫₁^R √(m(τ)/τ) dτ and its inverse.
double fluctuation_forward(const ClosureModel& model, double R);
double fluctuation_inverse(const ClosureModel& model, double y);

// Composite profiles at amplitude n and capillarity strength κ (y = κ^{-1/2}n).
CompositeProfiles composite_profiles(const ClosureModel& model, double n, double kappa);

// Quadratic corrections g₁..g₄ at the mixture state (R⁺, R⁻); all vanish at (1,1).
GCoefficients g_coefficients(const ClosureModel& model, double r_plus, double r_minus);

// --- bulk evaluators for the solver's per-grid-point hot loops --------------

// R[i] = L⁻¹(y[i]); throws OutOfRange when any y leaves the admissible image.
void fluctuation_inverse_array(const ClosureModel& model, const double* y,
                               std::size_t count, double* R);

// ψ̃, Q̃, φ̃ from precomputed R = L⁻¹(y).
void composites_from_R(const ClosureModel& model, const double* R,
                       std::size_t count, double* psi, double* Q, double* phi);

// g₁..g₄ from precomputed per-point (R⁺, R⁻); mixture solves are warm-started.
void g_from_R(const ClosureModel& model, const double* Rp, const double* Rm,
              std::size_t count, double* g1, double* g2, double* g3, double* g4);

}  // namespace twofluid
