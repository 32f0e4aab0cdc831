#include "twofluid/fitting.hpp"

#include <cmath>
#include <limits>

#include "twofluid/errors.hpp"
#include "twofluid/util.hpp"

namespace twofluid {

FitResult fit_loglog_rate(const std::vector<std::pair<double, double>>& samples,
                          double window_lo, double window_hi) {
  std::vector<std::pair<double, double>> in;
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = 0.0;
  for (const auto& s : samples) {
    if (s.first < window_lo || s.first > window_hi) continue;
    if (!(s.first > 0.0) || !(s.second > 0.0))
      throw OutOfRange("power-law fit needs strictly positive samples (got (" +
                       format_g17(s.first) + ", " + format_g17(s.second) +
                       "))");
    in.push_back(s);
    xmin = std::min(xmin, s.first);
    xmax = std::max(xmax, s.first);
  }
  if (in.size() < 3)
    throw WindowTooShort("power-law fit needs at least 3 in-window samples, "
                         "got " + std::to_string(in.size()));
  if (xmax < 2.0 * xmin)
    throw DegenerateFit("abscissa spread " + format_g17(xmax / xmin) +
                        " is below the factor-2 minimum");

  const std::size_t n = in.size();
  double sx = 0.0, sy = 0.0;
  for (const auto& s : in) {
    sx += std::log(s.first);
    sy += std::log(s.second);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& s : in) {
    const double dx = std::log(s.first) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(s.second) - my);
  }
  FitResult r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double ssr = 0.0;
  for (const auto& s : in) {
    const double e = std::log(s.second) - (r.intercept + r.slope * std::log(s.first));
    ssr += e * e;
  }
  r.residual = std::sqrt(ssr / n);
  r.stderr_slope = n > 2 ? std::sqrt(ssr / (n - 2) / sxx) : 0.0;
  r.window_lo = window_lo;
  r.window_hi = window_hi;
  r.count = static_cast<int>(n);
  return r;
}

FitResult fit_loglog_rate(const std::vector<std::pair<double, double>>& samples) {
  return fit_loglog_rate(samples, 0.0,
                         std::numeric_limits<double>::infinity());
}

}  // namespace twofluid
