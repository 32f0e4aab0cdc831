#pragma once

// Thin process-wide FFTW wrapper.  Plans are cached per (dim, n, direction),
// created with FFTW_ESTIMATE|FFTW_UNALIGNED (deterministic planning, any
// array), and executed through the new-array interface, which is thread-safe.

#include <complex>
#include <cstddef>

namespace twofluid::fft {

// out = DFT(in) / n^dim  (Fourier-series coefficients)
void forward(int dim, int n, const std::complex<double>* in, std::complex<double>* out);
// out = Σ_k in_k exp(+i k·x)  (no scaling)
void inverse(int dim, int n, const std::complex<double>* in, std::complex<double>* out);

}  // namespace twofluid::fft
