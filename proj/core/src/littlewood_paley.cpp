#include "twofluid/littlewood_paley.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "twofluid/errors.hpp"
#include "twofluid/util.hpp"

namespace twofluid {

namespace {
double g_bump(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }
}  // namespace

double bump_chi(double t) {
  const double a = g_bump(4.0 / 3.0 - t);
  const double b = g_bump(t - 0.75);
  if (a == 0.0) return 0.0;
  return a / (a + b);
}

double bump_phi(double t) { return bump_chi(0.5 * t) - bump_chi(t); }

// ---------------------------------------------------------------------------

const std::vector<double>& DyadicBank::mask(int j) const {
  if (j < j_min_ || j > j_max_) throw OutOfRange("dyadic block index outside bank");
  return masks_[static_cast<std::size_t>(j - j_min_)];
}

double DyadicBank::covered_lo() const { return (4.0 / 3.0) * std::ldexp(1.0, j_min_); }
double DyadicBank::covered_hi() const { return 1.5 * std::ldexp(1.0, j_max_); }

DyadicBank build_dyadic_bank(const Grid& grid, int j_min, int j_max) {
  if (j_min == INT32_MIN)
    j_min = static_cast<int>(std::lround(-std::log2(grid.lambda())));
  if (j_max == INT32_MIN)
    j_max = static_cast<int>(std::lround(std::log2(grid.n() / grid.lambda()))) - 3;

  if (j_max - j_min < 2)
    throw OutOfRange("dyadic bank needs at least 3 blocks (j_max - j_min >= 2)");
  const double top_support = std::ldexp(8.0 / 3.0, j_max);
  if (!(top_support < grid.nyquist()))
    throw NyquistViolation("top dyadic block support " + format_g17(top_support) +
                           " reaches the Nyquist frequency " + format_g17(grid.nyquist()));

  DyadicBank bank;
  bank.grid_ = grid;
  bank.j_min_ = j_min;
  bank.j_max_ = j_max;
  const std::size_t pts = grid.points();
  bank.coverage_.assign(pts, 0.0);
  bank.masks_.resize(static_cast<std::size_t>(bank.blocks()));
  for (int j = j_min; j <= j_max; ++j) {
    auto& m = bank.masks_[static_cast<std::size_t>(j - j_min)];
    m.resize(pts);
    const double scale = std::ldexp(1.0, -j);
    for (std::size_t s = 0; s < pts; ++s) {
      const double t = scale * std::sqrt(grid.xi_abs2(s));
      m[s] = bump_phi(t);
      bank.coverage_[s] += m[s];
    }
  }
  return bank;
}

// ---------------------------------------------------------------------------

namespace {

GridField apply_mask(const GridField& u, const std::vector<double>& m) {
  GridField out(u.grid(), u.comps(), u.is_real());
  const std::size_t pts = u.points();
  for (int c = 0; c < u.comps(); ++c) {
    const cd* in = u.spec(c);
    cd* o = out.spec(c);
    for (std::size_t s = 0; s < pts; ++s) o[s] = m[s] * in[s];
  }
  out.mark_spec_valid();
  return out;
}

// ‖·‖_{L²} through Parseval (no inverse transform needed).
double l2_block_norm(const GridField& u, const std::vector<double>& m) {
  const std::size_t pts = u.points();
  double sum = 0.0, comp = 0.0;
  for (int c = 0; c < u.comps(); ++c) {
    const cd* in = u.spec(c);
    for (std::size_t s = 0; s < pts; ++s) {
      const double term = m[s] * m[s] * std::norm(in[s]);
      const double y = term - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
  }
  return std::sqrt(sum * u.grid().volume());
}

}  // namespace

GridField dyadic_block(const DyadicBank& bank, const GridField& u, int j) {
  if (u.grid() != bank.grid()) throw OutOfRange("field grid does not match bank grid");
  return apply_mask(u, bank.mask(j));
}

GridField low_cutoff(const DyadicBank& bank, const GridField& u, int j) {
  if (u.grid() != bank.grid()) throw OutOfRange("field grid does not match bank grid");
  const Grid& g = bank.grid();
  GridField out(g, u.comps(), u.is_real());
  const std::size_t pts = g.points();
  const double scale = std::ldexp(1.0, -j);
  for (int c = 0; c < u.comps(); ++c) {
    const cd* in = u.spec(c);
    cd* o = out.spec(c);
    for (std::size_t s = 0; s < pts; ++s)
      o[s] = bump_chi(scale * std::sqrt(g.xi_abs2(s))) * in[s];
  }
  out.mark_spec_valid();
  return out;
}

double besov_norm(const DyadicBank& bank, const GridField& u, double s, double p,
                  double r) {
  if (u.grid() != bank.grid()) throw OutOfRange("field grid does not match bank grid");
  const std::size_t pts = u.points();

  // Energy audit: how much spectral mass (mean mode excluded) falls where the
  // partition is incomplete?
  double total = 0.0, outside = 0.0;
  for (int c = 0; c < u.comps(); ++c) {
    const cd* in = u.spec(c);
    for (std::size_t k = 0; k < pts; ++k) {
      if (u.grid().xi_abs2(k) == 0.0) continue;
      const double e = std::norm(in[k]);
      total += e;
      if (bank.coverage()[k] < 1.0 - 1e-9) outside += e;
    }
  }
  if (total > 0.0 && outside > 0.01 * total)
    throw BandTooNarrow("spectral energy fraction outside covered annuli: " +
                        format_g17(outside / total));

  const bool linf_blocks = std::isinf(r);
  double acc = 0.0;
  for (int j = bank.j_min(); j <= bank.j_max(); ++j) {
    const auto& m = bank.mask(j);
    const double block_norm =
        p == 2.0 ? l2_block_norm(u, m) : lebesgue_norm(apply_mask(u, m), p);
    const double term = std::pow(2.0, j * s) * block_norm;
    if (linf_blocks) {
      acc = std::max(acc, term);
    } else if (r == 1.0) {
      acc += term;
    } else {
      acc += std::pow(term, r);
    }
  }
  if (linf_blocks || r == 1.0) return acc;
  return std::pow(acc, 1.0 / r);
}

double bernstein_probe(const DyadicBank& bank, const GridField& u, int j, int k,
                       double p, double q) {
  GridField block = dyadic_block(bank, u, j);
  const double base = lebesgue_norm(block, p);
  if (!(base > 0.0)) throw ZeroBlock("dyadic block " + std::to_string(j) + " carries no energy");

  GridField dk(block.grid(), block.comps(), block.is_real());
  const std::size_t pts = block.points();
  for (int c = 0; c < block.comps(); ++c) {
    const cd* in = block.spec(c);
    cd* o = dk.spec(c);
    for (std::size_t s = 0; s < pts; ++s)
      o[s] = std::pow(std::sqrt(block.grid().xi_abs2(s)), k) * in[s];
  }
  dk.mark_spec_valid();

  const double d = bank.grid().dim();
  const double expo = k + d * (1.0 / p - 1.0 / q);
  return lebesgue_norm(dk, q) / (std::pow(2.0, j * expo) * base);
}

// ---------------------------------------------------------------------------

GridField random_besov_field(const Grid& grid, double sigma, std::uint64_t seed,
                             int comps, double amplitude) {
  const DyadicBank bank = build_dyadic_bank(grid);
  const double lo = bank.covered_lo(), hi = bank.covered_hi();
  const int n = grid.n();
  const std::size_t pts = grid.points();

  GridField f(grid, comps, /*real=*/true);
  const double expo = -(sigma + 0.5 * grid.dim());
  for (int c = 0; c < comps; ++c) {
    cd* sp = f.spec(c);
    for (std::size_t s = 0; s < pts; ++s) {
      const double xi = std::sqrt(grid.xi_abs2(s));
      if (xi < lo || xi > hi) {
        sp[s] = cd{0.0, 0.0};
        continue;
      }
      int a[3];
      grid.axes(s, a);
      const int ma[3] = {(n - a[0]) % n, (n - a[1]) % n, (n - a[2]) % n};
      const std::size_t mirror =
          grid.dim() == 2 ? static_cast<std::size_t>(ma[0]) * n + ma[1]
                          : (static_cast<std::size_t>(ma[0]) * n + ma[1]) * n + ma[2];
      // One phase per conjugate pair, drawn from the canonical (smaller) index
      // so the result is independent of traversal order.
      const std::size_t canon = std::min(s, mirror);
      const double theta =
          2.0 * 3.14159265358979323846 *
          u01(splitmix64(hash_mix(seed, hash_mix(canon, static_cast<std::uint64_t>(c)))));
      const double mag = std::pow(xi, expo);
      const cd val = mag * cd{std::cos(theta), std::sin(theta)};
      sp[s] = (s == canon) ? val : std::conj(val);
    }
  }
  f.mark_spec_valid();

  // Calibrate so the flat profile sup_j 2^{jσ}‖Δ̇_j f‖_{L²} equals `amplitude`.
  double sup = 0.0;
  for (int j = bank.j_min(); j <= bank.j_max(); ++j)
    sup = std::max(sup, std::pow(2.0, j * sigma) * l2_block_norm(f, bank.mask(j)));
  if (sup > 0.0) scale(f, amplitude / sup);
  return f;
}

}  // namespace twofluid
