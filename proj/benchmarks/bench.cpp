// Microbenchmarks for the hot paths: spectral transforms, dyadic filtering,
// the physical-space nonlinearity, and a full integrator step.  Sizes cover
// the unit-test scale (64) and the production scale (256) in 2-D plus a small
// 3-D case.  Run with --benchmark_filter=... to select a subset.

#include <benchmark/benchmark.h>

#include <cstdint>

#include "twofluid/closure.hpp"
#include "twofluid/grid.hpp"
#include "twofluid/littlewood_paley.hpp"
#include "twofluid/solver.hpp"
#include "twofluid/spectral.hpp"

using namespace twofluid;

namespace {

Grid make_grid(const benchmark::State& state) {
  return Grid(static_cast<int>(state.range(0)),
              static_cast<int>(state.range(1)),
              state.range(0) == 2 ? 16.0 : 4.0);
}

ClosureModel bench_model() {
  return make_model(PressureLaw::gamma_law(1.0, 1.0),
                    PressureLaw::gamma_law(1.0, 1.0), -1.0,
                    CapillarityProfile::constant(), 0.5);
}

void args_2d_3d(benchmark::internal::Benchmark* b) {
  b->Args({2, 64})->Args({2, 256})->Args({3, 32});
  b->Unit(benchmark::kMillisecond);
}

void fft_round_trip(benchmark::State& state) {
  const Grid g = make_grid(state);
  GridField u = random_besov_field(g, 0.5, 42, 1);
  u.ensure_phys();
  for (auto _ : state) {
    u.mark_phys_valid();
    u.ensure_spec();
    u.mark_spec_valid();
    u.ensure_phys();
    benchmark::DoNotOptimize(u.phys(0)[0]);
  }
}
BENCHMARK(fft_round_trip)->Apply(args_2d_3d);

void dyadic_block_filter(benchmark::State& state) {
  const Grid g = make_grid(state);
  const DyadicBank bank = build_dyadic_bank(g);
  const GridField u = random_besov_field(g, 0.5, 42, 1);
  const int jmid = (bank.j_min() + bank.j_max()) / 2;
  for (auto _ : state) {
    GridField block = dyadic_block(bank, u, jmid);
    benchmark::DoNotOptimize(block.spec(0)[0]);
  }
}
BENCHMARK(dyadic_block_filter)->Apply(args_2d_3d);

void besov_norm_full(benchmark::State& state) {
  const Grid g = make_grid(state);
  const DyadicBank bank = build_dyadic_bank(g);
  const GridField u = random_besov_field(g, 0.5, 42, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(besov_norm(bank, u, 0.5, 2.0, 2.0));
  }
}
BENCHMARK(besov_norm_full)->Apply(args_2d_3d);

void nonlinear_rhs_eval(benchmark::State& state) {
  const Grid g = make_grid(state);
  const ClosureModel model = bench_model();
  const SimulationState st = make_initial_state(g, 4.0, 0.25, 7, true);
  IntegratorConfig cfg;
  for (auto _ : state) {
    FieldQuad rhs = nonlinear_rhs(st, model, cfg);
    benchmark::DoNotOptimize(rhs.n_plus.spec(0)[0]);
  }
}
BENCHMARK(nonlinear_rhs_eval)->Apply(args_2d_3d);

void etd_full_step(benchmark::State& state) {
  const Grid g = make_grid(state);
  const ClosureModel model = bench_model();
  const ClosureCoefficients co = equilibrium_coefficients(model);
  IntegratorConfig cfg;
  cfg.dt = 1e-3;  // small step: timing only, stability margin irrelevant
  const LinearPropagator prop(g, 4.0, co, cfg.dt);
  SimulationState st = make_initial_state(g, 4.0, 0.25, 7, true);
  for (auto _ : state) {
    etd_step(st, model, prop, cfg);
    benchmark::DoNotOptimize(st.t);
  }
}
BENCHMARK(etd_full_step)->Apply(args_2d_3d);

void propagator_build(benchmark::State& state) {
  const Grid g = make_grid(state);
  const ClosureCoefficients co = equilibrium_coefficients(bench_model());
  for (auto _ : state) {
    LinearPropagator prop(g, 4.0, co, 1e-2);
    benchmark::DoNotOptimize(prop.fallback_count());
  }
}
BENCHMARK(propagator_build)->Apply(args_2d_3d);

}  // namespace

BENCHMARK_MAIN();
