#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

namespace twofluid::fft {

namespace {

struct PlanEntry {
  fftw_plan plan = nullptr;
  // FFTW's new-array execution ignores the arrays the plan was created with,
  // but keeping them alive avoids any question about pointer validity.
  std::vector<std::complex<double>> scratch_in, scratch_out;
};

std::mutex g_mutex;
std::map<std::tuple<int, int, int>, PlanEntry>& cache() {
  static auto* c = new std::map<std::tuple<int, int, int>, PlanEntry>();
  return *c;
}

fftw_plan plan_for(int dim, int n, int sign) {
  std::lock_guard<std::mutex> lock(g_mutex);
  auto& entry = cache()[{dim, n, sign}];
  if (!entry.plan) {
    std::size_t total = 1;
    std::vector<int> dims(dim, n);
    for (int i = 0; i < dim; ++i) total *= static_cast<std::size_t>(n);
    entry.scratch_in.resize(total);
    entry.scratch_out.resize(total);
    entry.plan = fftw_plan_dft(
        dim, dims.data(), reinterpret_cast<fftw_complex*>(entry.scratch_in.data()),
        reinterpret_cast<fftw_complex*>(entry.scratch_out.data()), sign,
        FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  return entry.plan;
}

}  // namespace

void forward(int dim, int n, const std::complex<double>* in, std::complex<double>* out) {
  fftw_plan p = plan_for(dim, n, FFTW_FORWARD);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
  std::size_t total = 1;
  for (int i = 0; i < dim; ++i) total *= static_cast<std::size_t>(n);
  const double scale = 1.0 / static_cast<double>(total);
  for (std::size_t i = 0; i < total; ++i) out[i] *= scale;
}

void inverse(int dim, int n, const std::complex<double>* in, std::complex<double>* out) {
  fftw_plan p = plan_for(dim, n, FFTW_BACKWARD);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

}  // namespace twofluid::fft
