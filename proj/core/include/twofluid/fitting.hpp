#pragma once

#include <utility>
#include <vector>

namespace twofluid {

// Result of an ordinary-least-squares power-law fit log y = slope·log x + b.
struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;  // standard error of the slope estimate
  double residual = 0.0;      // RMS of the log-space residuals
  double window_lo = 0.0;     // window actually applied (in x)
  double window_hi = 0.0;
  int count = 0;              // samples inside the window
};

// Fit a power law through the samples with window_lo <= x <= window_hi.
// Deterministic; requires at least three strictly positive in-window samples
// (WindowTooShort otherwise, OutOfRange for nonpositive values) and an
// abscissa spread of at least a factor two (DegenerateFit otherwise).
FitResult fit_loglog_rate(const std::vector<std::pair<double, double>>& samples,
                          double window_lo, double window_hi);

// Whole-range overload.
FitResult fit_loglog_rate(const std::vector<std::pair<double, double>>& samples);

}  // namespace twofluid
