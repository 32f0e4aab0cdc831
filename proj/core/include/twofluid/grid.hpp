#pragma once

// Periodic sampling grids and fields carried on them.  A field keeps physical
// samples and Fourier coefficients in sync lazily: whichever representation is
// requested is computed on demand from the valid one.  Spectral coefficients
// follow the Fourier-series convention u(x) = Σ_k û_k exp(i k·x/Λ), so a unit
// plane wave has a single unit coefficient and û(0) is the spatial mean.

#include <complex>
#include <cstddef>
#include <vector>

namespace twofluid {

using cd = std::complex<double>;

class Grid {
 public:
  Grid() = default;
  // dim ∈ {2,3}, n a power of two (points per axis), box length 2πΛ.
  Grid(int dim, int n, double lambda);

  int dim() const { return dim_; }
  int n() const { return n_; }
  double lambda() const { return lambda_; }
  std::size_t points() const { return points_; }
  double dx() const;       // grid spacing 2πΛ/n
  double volume() const;   // (2πΛ)^dim
  double nyquist() const;  // largest resolved |ξ_i| = n/(2Λ)

  // Signed integer mode index for an axis position i ∈ [0, n).
  int kindex(int i) const { return i < n_ / 2 ? i : i - n_; }

  // Decompose a flat (row-major, last axis fastest) index into axis positions.
  void axes(std::size_t flat, int out[3]) const;
  // Wavevector ξ = k/Λ of a flat spectral index; unused components get 0.
  void wavevector(std::size_t flat, double out[3]) const;
  double xi_abs2(std::size_t flat) const;
  // Physical position x ∈ [0, 2πΛ)^dim of a flat sample index.
  void position(std::size_t flat, double out[3]) const;

  bool operator==(const Grid& o) const {
    return dim_ == o.dim_ && n_ == o.n_ && lambda_ == o.lambda_;
  }
  bool operator!=(const Grid& o) const { return !(*this == o); }

 private:
  int dim_ = 0, n_ = 0;
  double lambda_ = 1.0;
  std::size_t points_ = 0;
};

class GridField {
 public:
  GridField() = default;
  GridField(const Grid& grid, int comps, bool real = true);  // zero field

  const Grid& grid() const { return grid_; }
  int comps() const { return comps_; }
  bool is_real() const { return real_; }
  std::size_t points() const { return grid_.points(); }

  // Component c as contiguous storage.  Non-const access invalidates the other
  // representation; const access transforms lazily when needed.
  cd* phys(int c = 0);
  const cd* phys(int c = 0) const;
  cd* spec(int c = 0);
  const cd* spec(int c = 0) const;

  void ensure_phys() const;
  void ensure_spec() const;

  // Declare which representation was just written through raw pointers.
  void mark_phys_valid();
  void mark_spec_valid();

 private:
  Grid grid_;
  int comps_ = 0;
  bool real_ = true;
  mutable std::vector<cd> phys_, spec_;
  mutable bool phys_ok_ = true, spec_ok_ = true;
};

// --- spectral calculus ------------------------------------------------------

GridField derivative(const GridField& f, int axis);       // ∂_axis per component
GridField gradient(const GridField& scalar);              // d components
GridField divergence(const GridField& vec);               // scalar
GridField laplacian(const GridField& f);

// Pointwise physical-space product of two real fields (comps 1×1 → 1, or
// scalar × vector → vector).
GridField multiply(const GridField& a, const GridField& b);

// y ← y + s·x on spectral data (shapes must match).
void axpy_spec(GridField& y, cd s, const GridField& x);
void scale(GridField& f, double s);

// Symmetrize the spectrum so the inverse transform is exactly real.
void enforce_hermitian(GridField& f);
// Largest |û(k) − conj(û(−k))| over the lattice (diagnostic).
double hermitian_defect(const GridField& f);

// Rectangle-rule L^p norm of the pointwise Euclidean magnitude across
// components; p = infinity gives the max norm.
double lebesgue_norm(const GridField& f, double p);

// Spatial mean of one component (= û(0)).
cd field_mean(const GridField& f, int c = 0);

// Real L² pairing ∫ a·b dx (components contracted), evaluated by Parseval.
double inner_product(const GridField& a, const GridField& b);

// Leray decomposition u = Pu + Qu with Qu the gradient part ξ(ξ·û)/|ξ|²;
// the mean mode rides with Pu.  Either output may be null to skip it.
void helmholtz_split(const GridField& u, GridField* Pu, GridField* Qu);

// Zero every mode with any |k_axis| above the 2/3 cutoff (alias control for
// quadratic products).
void dealias_two_thirds(GridField& f);

}  // namespace twofluid
