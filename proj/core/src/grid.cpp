#include "twofluid/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fft.hpp"
#include "twofluid/errors.hpp"

namespace twofluid {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }
}  // namespace

Grid::Grid(int dim, int n, double lambda) : dim_(dim), n_(n), lambda_(lambda) {
  if (dim != 2 && dim != 3) throw OutOfRange("grid dimension must be 2 or 3");
  if (!power_of_two(n) || n < 8)
    throw OutOfRange("grid points per axis must be a power of two >= 8");
  if (!(lambda > 0.0)) throw OutOfRange("box scale must be positive");
  points_ = 1;
  for (int i = 0; i < dim; ++i) points_ *= static_cast<std::size_t>(n);
}

double Grid::dx() const { return kTwoPi * lambda_ / n_; }

double Grid::volume() const {
  double v = 1.0;
  for (int i = 0; i < dim_; ++i) v *= kTwoPi * lambda_;
  return v;
}

double Grid::nyquist() const { return 0.5 * n_ / lambda_; }

void Grid::axes(std::size_t flat, int out[3]) const {
  out[2] = 0;
  if (dim_ == 2) {
    out[1] = static_cast<int>(flat % n_);
    out[0] = static_cast<int>(flat / n_);
  } else {
    out[2] = static_cast<int>(flat % n_);
    flat /= n_;
    out[1] = static_cast<int>(flat % n_);
    out[0] = static_cast<int>(flat / n_);
  }
}

void Grid::wavevector(std::size_t flat, double out[3]) const {
  int a[3];
  axes(flat, a);
  out[0] = kindex(a[0]) / lambda_;
  out[1] = kindex(a[1]) / lambda_;
  out[2] = dim_ == 3 ? kindex(a[2]) / lambda_ : 0.0;
}

double Grid::xi_abs2(std::size_t flat) const {
  double xi[3];
  wavevector(flat, xi);
  return xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
}

void Grid::position(std::size_t flat, double out[3]) const {
  int a[3];
  axes(flat, a);
  for (int i = 0; i < 3; ++i) out[i] = a[i] * dx();
}

// ---------------------------------------------------------------------------

GridField::GridField(const Grid& grid, int comps, bool real)
    : grid_(grid), comps_(comps), real_(real) {
  if (comps < 1) throw OutOfRange("field needs at least one component");
  phys_.assign(comps_ * grid_.points(), cd{0.0, 0.0});
  spec_.assign(comps_ * grid_.points(), cd{0.0, 0.0});
}

void GridField::ensure_phys() const {
  if (phys_ok_) return;
  const std::size_t pts = grid_.points();
  for (int c = 0; c < comps_; ++c)
    fft::inverse(grid_.dim(), grid_.n(), spec_.data() + c * pts, phys_.data() + c * pts);
  if (real_) {
    // Hermitian spectra invert to real samples up to roundoff; drop the dust
    // so later pointwise products stay exactly real.
    for (auto& v : phys_) v = cd{v.real(), 0.0};
  }
  phys_ok_ = true;
}

void GridField::ensure_spec() const {
  if (spec_ok_) return;
  const std::size_t pts = grid_.points();
  for (int c = 0; c < comps_; ++c)
    fft::forward(grid_.dim(), grid_.n(), phys_.data() + c * pts, spec_.data() + c * pts);
  spec_ok_ = true;
}

cd* GridField::phys(int c) {
  ensure_phys();
  spec_ok_ = false;
  return phys_.data() + static_cast<std::size_t>(c) * grid_.points();
}

const cd* GridField::phys(int c) const {
  ensure_phys();
  return phys_.data() + static_cast<std::size_t>(c) * grid_.points();
}

cd* GridField::spec(int c) {
  ensure_spec();
  phys_ok_ = false;
  return spec_.data() + static_cast<std::size_t>(c) * grid_.points();
}

const cd* GridField::spec(int c) const {
  ensure_spec();
  return spec_.data() + static_cast<std::size_t>(c) * grid_.points();
}

void GridField::mark_phys_valid() {
  phys_ok_ = true;
  spec_ok_ = false;
}

void GridField::mark_spec_valid() {
  spec_ok_ = true;
  phys_ok_ = false;
}

// ---------------------------------------------------------------------------

GridField derivative(const GridField& f, int axis) {
  const Grid& g = f.grid();
  if (axis < 0 || axis >= g.dim()) throw OutOfRange("derivative axis out of range");
  GridField out(g, f.comps(), f.is_real());
  const std::size_t pts = g.points();
  for (int c = 0; c < f.comps(); ++c) {
    const cd* in = f.spec(c);
    cd* o = out.spec(c);
    for (std::size_t s = 0; s < pts; ++s) {
      double xi[3];
      g.wavevector(s, xi);
      o[s] = cd{0.0, xi[axis]} * in[s];
    }
  }
  out.mark_spec_valid();
  return out;
}

GridField gradient(const GridField& scalar) {
  if (scalar.comps() != 1) throw OutOfRange("gradient expects a scalar field");
  const Grid& g = scalar.grid();
  GridField out(g, g.dim(), scalar.is_real());
  const std::size_t pts = g.points();
  const cd* in = scalar.spec(0);
  for (int a = 0; a < g.dim(); ++a) {
    cd* o = out.spec(a);
    for (std::size_t s = 0; s < pts; ++s) {
      double xi[3];
      g.wavevector(s, xi);
      o[s] = cd{0.0, xi[a]} * in[s];
    }
  }
  out.mark_spec_valid();
  return out;
}

GridField divergence(const GridField& vec) {
  const Grid& g = vec.grid();
  if (vec.comps() != g.dim()) throw OutOfRange("divergence expects a d-component field");
  GridField out(g, 1, vec.is_real());
  const std::size_t pts = g.points();
  cd* o = out.spec(0);
  std::fill(o, o + pts, cd{0.0, 0.0});
  for (int a = 0; a < g.dim(); ++a) {
    const cd* in = vec.spec(a);
    for (std::size_t s = 0; s < pts; ++s) {
      double xi[3];
      g.wavevector(s, xi);
      o[s] += cd{0.0, xi[a]} * in[s];
    }
  }
  out.mark_spec_valid();
  return out;
}

GridField laplacian(const GridField& f) {
  const Grid& g = f.grid();
  GridField out(g, f.comps(), f.is_real());
  const std::size_t pts = g.points();
  for (int c = 0; c < f.comps(); ++c) {
    const cd* in = f.spec(c);
    cd* o = out.spec(c);
    for (std::size_t s = 0; s < pts; ++s) o[s] = -g.xi_abs2(s) * in[s];
  }
  out.mark_spec_valid();
  return out;
}

GridField multiply(const GridField& a, const GridField& b) {
  if (a.grid() != b.grid()) throw OutOfRange("product of fields on different grids");
  const bool scalar_a = a.comps() == 1, scalar_b = b.comps() == 1;
  if (!scalar_a && !scalar_b && a.comps() != b.comps())
    throw OutOfRange("component mismatch in field product");
  const int comps = std::max(a.comps(), b.comps());
  GridField out(a.grid(), comps, a.is_real() && b.is_real());
  const std::size_t pts = a.points();
  for (int c = 0; c < comps; ++c) {
    const cd* pa = a.phys(scalar_a ? 0 : c);
    const cd* pb = b.phys(scalar_b ? 0 : c);
    cd* o = out.phys(c);
    for (std::size_t s = 0; s < pts; ++s) o[s] = pa[s] * pb[s];
  }
  out.mark_phys_valid();
  return out;
}

void axpy_spec(GridField& y, cd s, const GridField& x) {
  if (y.grid() != x.grid() || y.comps() != x.comps())
    throw OutOfRange("axpy shape mismatch");
  const std::size_t pts = y.points();
  for (int c = 0; c < y.comps(); ++c) {
    cd* py = y.spec(c);
    const cd* px = x.spec(c);
    for (std::size_t i = 0; i < pts; ++i) py[i] += s * px[i];
  }
  y.mark_spec_valid();
}

void scale(GridField& f, double s) {
  const std::size_t pts = f.points();
  for (int c = 0; c < f.comps(); ++c) {
    cd* p = f.spec(c);
    for (std::size_t i = 0; i < pts; ++i) p[i] *= s;
  }
  f.mark_spec_valid();
}

void enforce_hermitian(GridField& f) {
  const Grid& g = f.grid();
  const int n = g.n();
  const std::size_t pts = g.points();
  for (int c = 0; c < f.comps(); ++c) {
    cd* p = f.spec(c);
    for (std::size_t s = 0; s < pts; ++s) {
      int a[3];
      g.axes(s, a);
      int ma[3] = {(n - a[0]) % n, (n - a[1]) % n, (n - a[2]) % n};
      std::size_t mirror = g.dim() == 2
                               ? static_cast<std::size_t>(ma[0]) * n + ma[1]
                               : (static_cast<std::size_t>(ma[0]) * n + ma[1]) * n + ma[2];
      if (mirror < s) continue;  // each pair handled once
      const cd avg = 0.5 * (p[s] + std::conj(p[mirror]));
      p[s] = avg;
      p[mirror] = std::conj(avg);
    }
  }
  f.mark_spec_valid();
}

double hermitian_defect(const GridField& f) {
  const Grid& g = f.grid();
  const int n = g.n();
  double worst = 0.0;
  for (int c = 0; c < f.comps(); ++c) {
    const cd* p = f.spec(c);
    for (std::size_t s = 0; s < g.points(); ++s) {
      int a[3];
      g.axes(s, a);
      int ma[3] = {(n - a[0]) % n, (n - a[1]) % n, (n - a[2]) % n};
      std::size_t mirror = g.dim() == 2
                               ? static_cast<std::size_t>(ma[0]) * n + ma[1]
                               : (static_cast<std::size_t>(ma[0]) * n + ma[1]) * n + ma[2];
      worst = std::max(worst, std::abs(p[s] - std::conj(p[mirror])));
    }
  }
  return worst;
}

double lebesgue_norm(const GridField& f, double p) {
  const Grid& g = f.grid();
  const std::size_t pts = g.points();
  const int comps = f.comps();
  std::vector<const cd*> ptr(comps);
  for (int c = 0; c < comps; ++c) ptr[c] = f.phys(c);

  if (std::isinf(p)) {
    double m = 0.0;
    for (std::size_t s = 0; s < pts; ++s) {
      double mag2 = 0.0;
      for (int c = 0; c < comps; ++c) mag2 += std::norm(ptr[c][s]);
      m = std::max(m, mag2);
    }
    return std::sqrt(m);
  }
  if (!(p >= 1.0)) throw OutOfRange("Lebesgue exponent must be >= 1 or infinity");

  // Fixed-order compensated accumulation keeps the rectangle rule deterministic
  // and accurate for large grids.
  double sum = 0.0, comp = 0.0;
  for (std::size_t s = 0; s < pts; ++s) {
    double mag2 = 0.0;
    for (int c = 0; c < comps; ++c) mag2 += std::norm(ptr[c][s]);
    const double term = p == 2.0 ? mag2 : std::pow(mag2, 0.5 * p);
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  double cell = 1.0;
  for (int i = 0; i < g.dim(); ++i) cell *= g.dx();
  return std::pow(sum * cell, 1.0 / p);
}

cd field_mean(const GridField& f, int c) { return f.spec(c)[0]; }

double inner_product(const GridField& a, const GridField& b) {
  if (a.grid() != b.grid() || a.comps() != b.comps())
    throw OutOfRange("inner product needs matching grids and component counts");
  const std::size_t pts = a.points();
  double sum = 0.0, comp = 0.0;
  for (int c = 0; c < a.comps(); ++c) {
    const cd* pa = a.spec(c);
    const cd* pb = b.spec(c);
    for (std::size_t s = 0; s < pts; ++s) {
      const double term = pa[s].real() * pb[s].real() + pa[s].imag() * pb[s].imag();
      const double y = term - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
  }
  return sum * a.grid().volume();
}

void helmholtz_split(const GridField& u, GridField* Pu, GridField* Qu) {
  const Grid& g = u.grid();
  if (u.comps() != g.dim())
    throw OutOfRange("Leray split expects a velocity field with dim components");
  const std::size_t pts = g.points();
  if (Pu) *Pu = GridField(g, u.comps(), u.is_real());
  if (Qu) *Qu = GridField(g, u.comps(), u.is_real());
  for (std::size_t s = 0; s < pts; ++s) {
    double xi[3];
    g.wavevector(s, xi);
    const double xi2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
    cd dot{0.0, 0.0};
    for (int c = 0; c < u.comps(); ++c) dot += xi[c] * u.spec(c)[s];
    for (int c = 0; c < u.comps(); ++c) {
      const cd q = xi2 > 0.0 ? cd{xi[c] / xi2} * dot : cd{0.0, 0.0};
      if (Qu) Qu->spec(c)[s] = q;
      if (Pu) Pu->spec(c)[s] = u.spec(c)[s] - q;  // mean mode stays here
    }
  }
  if (Pu) Pu->mark_spec_valid();
  if (Qu) Qu->mark_spec_valid();
}

void dealias_two_thirds(GridField& f) {
  const Grid& g = f.grid();
  const int cut = g.n() / 3;  // keep |k| <= floor(n/3)
  const std::size_t pts = g.points();
  for (int c = 0; c < f.comps(); ++c) {
    cd* p = f.spec(c);
    for (std::size_t s = 0; s < pts; ++s) {
      int a[3];
      g.axes(s, a);
      bool kill = false;
      for (int i = 0; i < g.dim(); ++i)
        if (std::abs(g.kindex(a[i])) > cut) kill = true;
      if (kill) p[s] = cd{0.0, 0.0};
    }
  }
  f.mark_spec_valid();
}

}  // namespace twofluid
