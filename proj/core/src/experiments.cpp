#include "twofluid/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>
#include <vector>

#include "twofluid/errors.hpp"
#include "twofluid/fitting.hpp"
#include "twofluid/littlewood_paley.hpp"
#include "twofluid/spectral.hpp"
#include "twofluid/util.hpp"

namespace twofluid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string short_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

ExperimentReport init_report(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.kind = cfg.kind;
  rep.label = cfg.label;
  rep.config_hash = config_hash(cfg);
  rep.seed = cfg.seed;
  rep.build_id = build_identifier();
  return rep;
}

// Work pool over independent sweep points: each task owns its slot, nothing
// mutable is shared, and the caller assembles results in fixed order.
void parallel_tasks(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int workers = worker_count(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
    });
  for (auto& th : pool) th.join();
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& f) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i)
    acc += 0.5 * (t[i + 1] - t[i]) * (f[i] + f[i + 1]);
  return acc;
}

// dst[dc] ← w·src[sc] on spectral data.
void copy_comp(GridField& dst, int dc, const GridField& src, int sc, double w) {
  const cd* p = src.spec(sc);
  cd* o = dst.spec(dc);
  for (std::size_t s = 0; s < src.points(); ++s) o[s] = w * p[s];
}

GridField subtract(const GridField& a, const GridField& b) {
  GridField out(a.grid(), a.comps(), true);
  for (int c = 0; c < a.comps(); ++c) copy_comp(out, c, a, c, 1.0);
  out.mark_spec_valid();
  axpy_spec(out, cd{-1.0, 0.0}, b);
  return out;
}

// A spatially coherent dyadic packet: the block-j mask used directly as
// spectral coefficients, sign-modulated to center the packet at a half-box
// offset `center` (components count half-box shifts per axis), then
// normalized to unit sup norm.  All coefficients stay real, so the field is
// exactly Hermitian.
GridField coherent_packet(const Grid& grid, const DyadicBank& bank, int j,
                          const int center[3]) {
  const std::vector<double>& mask = bank.mask(j);
  GridField f(grid, 1, true);
  cd* sp = f.spec(0);
  for (std::size_t s = 0; s < grid.points(); ++s) {
    int a[3] = {0, 0, 0};
    grid.axes(s, a);
    int par = 0;
    for (int i = 0; i < grid.dim(); ++i) par += grid.kindex(a[i]) * center[i];
    const double sign = (par % 2 == 0) ? 1.0 : -1.0;
    sp[s] = cd{sign * mask[s], 0.0};
  }
  f.mark_spec_valid();
  const double sup = lebesgue_norm(f, kInf);
  if (sup > 0.0) scale(f, 1.0 / sup);
  return f;
}

// ---------------------------------------------------------------------------
// Incompressible-limit sweep.

struct LimitSlot {
  bool ok = false;
  std::string error;
  double kappa = 0.0;
  std::vector<double> ts, e_lo, e_hi, dval;
  double E = 0.0, D = 0.0;
};

void run_limit_point(const ExperimentConfig& cfg, double kappa,
                     LimitSlot& slot) {
  slot.kappa = kappa;
  try {
    const Grid grid = cfg.grid.build();
    const ClosureModel model = build_model(cfg.closure);
    const int d = grid.dim();
    // The default bank's coverage floor sits above the lowest lattice shells;
    // extend one block down so energy transferred there stays measurable.
    const DyadicBank bank0 = build_dyadic_bank(grid);
    const DyadicBank bank =
        build_dyadic_bank(grid, bank0.j_min() - 1, bank0.j_max());

    SimulationState st =
        make_limit_state(grid, kappa, cfg.amplitude, cfg.seed,
                         cfg.ref_discrepancy);

    DiagnosticsRequest diag;
    diag.every_steps = cfg.integrator.snapshot_every;
    diag.besov = false;
    diag.lyapunov = false;
    const double invsk = 1.0 / std::sqrt(kappa);
    diag.on_snapshot = [&](const SimulationState& s, std::size_t) {
      GridField Pp(grid, d, true), Qp(grid, d, true);
      GridField Pm(grid, d, true), Qm(grid, d, true);
      helmholtz_split(s.u_plus, &Pp, &Qp);
      helmholtz_split(s.u_minus, &Pm, &Qm);
      const GridField ep = subtract(Pp, s.v_plus);
      const GridField em = subtract(Pm, s.v_minus);
      double elo = besov_norm(bank, ep, d / 2.0 - 1.0, 2.0, 1.0) +
                   besov_norm(bank, em, d / 2.0 - 1.0, 2.0, 1.0);
      double ehi = besov_norm(bank, ep, d / 2.0 + 1.0, 2.0, 1.0) +
                   besov_norm(bank, em, d / 2.0 + 1.0, 2.0, 1.0);
      double dv = 0.0;
      for (int ph = 0; ph < 2; ++ph) {
        const GridField& n = ph == 0 ? s.n_plus : s.n_minus;
        const GridField& q = ph == 0 ? Qp : Qm;
        GridField stack(grid, 1 + 2 * d, true);
        copy_comp(stack, 0, n, 0, invsk);
        const GridField gn = gradient(n);
        for (int c = 0; c < d; ++c) copy_comp(stack, 1 + c, gn, c, 1.0);
        for (int c = 0; c < d; ++c) copy_comp(stack, 1 + d + c, q, c, 1.0);
        stack.mark_spec_valid();
        dv += besov_norm(bank, stack, d / cfg.p, cfg.p, 1.0);
      }
      slot.ts.push_back(s.t);
      slot.e_lo.push_back(elo);
      slot.e_hi.push_back(ehi);
      slot.dval.push_back(dv);
    };

    SimulationResult res =
        run_simulation(std::move(st), model, cfg.integrator, cfg.horizon, diag);
    if (!res.failure.empty()) {
      slot.error = res.failure;
      return;
    }
    if (slot.ts.size() < 2) {
      slot.error = "fewer than two snapshots recorded";
      return;
    }
    slot.E = *std::max_element(slot.e_lo.begin(), slot.e_lo.end()) +
             trapezoid(slot.ts, slot.e_hi);
    std::vector<double> d2(slot.dval.size());
    for (std::size_t i = 0; i < d2.size(); ++i) d2[i] = slot.dval[i] * slot.dval[i];
    slot.D = std::sqrt(trapezoid(slot.ts, d2));
    slot.ok = true;
  } catch (const Error& e) {
    slot.error = e.what();
  } catch (const std::exception& e) {
    slot.error = e.what();
  }
}

// Largest adjacent ratio f(κ_{i+1})/f(κ_i) over completed sweep points; a
// value < 1 certifies strict monotone decrease.
double monotone_ratio(const std::vector<const LimitSlot*>& ok,
                      double LimitSlot::* member) {
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < ok.size(); ++i) {
    const double a = ok[i]->*member, b = ok[i + 1]->*member;
    double r;
    if (a == 0.0 && b == 0.0) r = 0.0;
    else if (a == 0.0) r = kInf;
    else r = b / a;
    worst = std::max(worst, r);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Decay sweep helpers.

// random_besov_field leaves the lattice shells below the dyadic coverage
// floor empty; fill them at the same power-law magnitude (and the same
// deterministic phase recipe) so the box exhibits the whole-space decay law
// throughout the fit window.
void complete_low_shells(GridField& f, double sigma, std::uint64_t seed) {
  const Grid& g = f.grid();
  const DyadicBank bank = build_dyadic_bank(g);
  const double lo = bank.covered_lo();
  const double expo = -(sigma + 0.5 * g.dim());
  const int n = g.n();
  for (int c = 0; c < f.comps(); ++c) {
    cd* sp = f.spec(c);
    // Reference scale from any populated mode (the field was globally
    // rescaled after synthesis).
    double ref = 0.0;
    for (std::size_t s = 0; s < g.points(); ++s) {
      const double xi = std::sqrt(g.xi_abs2(s));
      if (xi >= lo && std::abs(sp[s]) > 0.0) {
        ref = std::abs(sp[s]) / std::pow(xi, expo);
        break;
      }
    }
    if (ref == 0.0) continue;
    for (std::size_t s = 0; s < g.points(); ++s) {
      const double xi = std::sqrt(g.xi_abs2(s));
      if (!(xi > 0.0 && xi < lo)) continue;
      int a[3];
      g.axes(s, a);
      const int ma[3] = {(n - a[0]) % n, (n - a[1]) % n, (n - a[2]) % n};
      const std::size_t mirror =
          g.dim() == 2
              ? static_cast<std::size_t>(ma[0]) * n + ma[1]
              : (static_cast<std::size_t>(ma[0]) * n + ma[1]) * n + ma[2];
      const std::size_t canon = std::min(s, mirror);
      const double theta =
          2.0 * 3.14159265358979323846 *
          u01(splitmix64(hash_mix(
              seed, hash_mix(canon, static_cast<std::uint64_t>(c)))));
      const cd val =
          ref * std::pow(xi, expo) * cd{std::cos(theta), std::sin(theta)};
      sp[s] = (s == canon) ? val : std::conj(val);
    }
  }
  f.mark_spec_valid();
}

// Σ_pieces |ŵ(k)|² of the stacked vector w = (κ^{-1/2}n±, ∇n±, u±), split by
// family so per-family observables come for free.
struct SpectralWeights {
  std::vector<double> n, gradn, u;  // per lattice site
};

SpectralWeights stacked_weights(const SimulationState& st) {
  const Grid& g = st.n_plus.grid();
  const std::size_t pts = g.points();
  SpectralWeights w;
  w.n.assign(pts, 0.0);
  w.gradn.assign(pts, 0.0);
  w.u.assign(pts, 0.0);
  const double invk = 1.0 / st.kappa;
  for (const GridField* f : {&st.n_plus, &st.n_minus}) {
    const cd* sp = f->spec(0);
    for (std::size_t s = 0; s < pts; ++s) {
      const double m2 = std::norm(sp[s]);
      w.n[s] += invk * m2;
      w.gradn[s] += g.xi_abs2(s) * m2;
    }
  }
  for (const GridField* f : {&st.u_plus, &st.u_minus})
    for (int c = 0; c < f->comps(); ++c) {
      const cd* sp = f->spec(c);
      for (std::size_t s = 0; s < pts; ++s) w.u[s] += std::norm(sp[s]);
    }
  return w;
}

struct FamilyNorms {
  double n = 0, gradn = 0, u = 0, w = 0;
};

// ‖D^α ·‖_{L²} of each family, with an optional heat factor e^{−|ξ|²t} applied
// to the coefficients (t = 0 gives the plain norms).
FamilyNorms family_norms(const Grid& g, const SpectralWeights& wt,
                         const std::array<int, 3>& alpha, double heat_t) {
  double sn = 0, sg = 0, su = 0;
  for (std::size_t s = 0; s < g.points(); ++s) {
    double xi[3];
    g.wavevector(s, xi);
    double fac = 1.0;
    for (int i = 0; i < 3; ++i)
      for (int rep = 0; rep < alpha[i]; ++rep) fac *= xi[i] * xi[i];
    if (heat_t > 0.0) fac *= std::exp(-2.0 * g.xi_abs2(s) * heat_t);
    sn += fac * wt.n[s];
    sg += fac * wt.gradn[s];
    su += fac * wt.u[s];
  }
  const double vol = g.volume();
  FamilyNorms out;
  out.n = std::sqrt(vol * sn);
  out.gradn = std::sqrt(vol * sg);
  out.u = std::sqrt(vol * su);
  out.w = std::sqrt(vol * (sn + sg + su));
  return out;
}

std::string order_suffix(const std::array<int, 3>& a) {
  std::string s = "d";
  for (int i = 0; i < 3; ++i) s += static_cast<char>('0' + a[i]);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string build_identifier() {
#ifdef TWOFLUID_VERSION_STRING
  return std::string("twofluid-") + TWOFLUID_VERSION_STRING;
#else
  return "twofluid-unknown";
#endif
}

int worker_count(std::size_t tasks) {
  if (tasks == 0) return 1;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  long cap = static_cast<long>(hw);
  if (const char* env = std::getenv("TWOFLUID_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != nullptr && *end == '\0' && v > 0) cap = v;
  }
  cap = std::min(cap, static_cast<long>(tasks));
  return static_cast<int>(std::max(1L, cap));
}

SimulationState make_limit_state(const Grid& grid, double kappa,
                                 double amplitude, std::uint64_t seed,
                                 double ref_discrepancy) {
  const int d = grid.dim();
  SimulationState st = make_state(grid, kappa, /*with_reference=*/true);

  // Spread solenoidal background, the part the reference flow shares.  All
  // initial content is kept at or below the block-0 cutoff (|ξ| ≤ 4/3) so
  // quadratic products land inside the certified dyadic annulus instead of
  // the structurally uncovered top octave under the dealias cutoff.
  const DyadicBank bank = build_dyadic_bank(grid);
  GridField bg_p(grid, d, true), bg_m(grid, d, true);
  {
    GridField r = random_besov_field(grid, d / 2.0 - 1.0, hash_mix(seed, 21),
                                     d, amplitude);
    r = low_cutoff(bank, r, 0);
    helmholtz_split(r, &bg_p, nullptr);
    r = random_besov_field(grid, d / 2.0 - 1.0, hash_mix(seed, 22), d,
                           amplitude);
    r = low_cutoff(bank, r, 0);
    helmholtz_split(r, &bg_m, nullptr);
  }

  // Coherent acoustic content: density packets plus gradient (curl-free)
  // velocity packets, centered at distinct half-box offsets.  Coherence is
  // what lets the dispersive κ-gain show on a periodic box: the packets
  // dephase on the κ^{-1/2} clock before any wrap-around recurrence.
  const int jp = std::min(std::max(-1, bank.j_min()), bank.j_max());
  const int c_np[3] = {0, 0, 0}, c_nm[3] = {1, 0, 0};
  const int c_up[3] = {0, 1, 0}, c_um[3] = {1, 1, 0};
  GridField np = coherent_packet(grid, bank, jp, c_np);
  GridField nm = coherent_packet(grid, bank, jp, c_nm);
  scale(np, amplitude);
  scale(nm, amplitude);
  st.n_plus = std::move(np);
  st.n_minus = std::move(nm);

  auto gradient_packet = [&](const int center[3]) {
    GridField chi = coherent_packet(grid, bank, jp, center);
    GridField gp = gradient(chi);
    const double sup = lebesgue_norm(gp, kInf);
    if (sup > 0.0) scale(gp, amplitude / sup);
    return gp;
  };
  GridField up = bg_p;
  axpy_spec(up, cd{1.0, 0.0}, gradient_packet(c_up));
  GridField um = bg_m;
  axpy_spec(um, cd{1.0, 0.0}, gradient_packet(c_um));
  st.u_plus = std::move(up);
  st.u_minus = std::move(um);

  // References start on the solenoidal part exactly; the optional knob opens
  // a controlled initial discrepancy ‖Pu(0) − v(0)‖ = disc·‖Pu(0)‖.
  st.v_plus = std::move(bg_p);
  st.v_minus = std::move(bg_m);
  if (ref_discrepancy != 0.0) {
    scale(st.v_plus, 1.0 - ref_discrepancy);
    scale(st.v_minus, 1.0 - ref_discrepancy);
  }
  record_means(st);
  return st;
}

ExperimentReport run_limit_sweep(const ExperimentConfig& cfg) {
  ExperimentReport rep = init_report(cfg);
  const int d = cfg.grid.dim;
  const double delta = delta_exponent(d, cfg.p);

  std::vector<LimitSlot> slots(cfg.kappas.size());
  parallel_tasks(slots.size(), [&](std::size_t i) {
    run_limit_point(cfg, cfg.kappas[i], slots[i]);
  });

  // Assemble in fixed κ order, single-threaded.
  std::vector<const LimitSlot*> ok;
  for (const LimitSlot& s : slots) {
    const std::string rid = "kappa=" + short_num(s.kappa);
    if (!s.ok) {
      rep.partial = true;
      rep.failures.push_back(rid + ": " + s.error);
      continue;
    }
    for (std::size_t i = 0; i < s.ts.size(); ++i) {
      rep.records.push_back({rid, s.kappa, s.ts[i], "ref_err_lo", s.e_lo[i]});
      rep.records.push_back({rid, s.kappa, s.ts[i], "ref_err_hi", s.e_hi[i]});
      rep.records.push_back({rid, s.kappa, s.ts[i], "split_norm", s.dval[i]});
    }
    rep.records.push_back({rid, s.kappa, cfg.horizon, "E", s.E});
    rep.records.push_back({rid, s.kappa, cfg.horizon, "D", s.D});
    ok.push_back(&s);
  }

  auto fit_rate = [&](const char* name, double LimitSlot::* member) {
    try {
      std::vector<std::pair<double, double>> samples;
      for (const LimitSlot* s : ok) samples.push_back({s->kappa, s->*member});
      const FitResult fr = fit_loglog_rate(samples);
      FittedRate rate;
      rate.name = name;
      rate.slope = fr.slope;
      rate.stderr_slope = fr.stderr_slope;
      rate.residual = fr.residual;
      rate.target = -delta;
      rate.window_lo = fr.window_lo;
      rate.window_hi = fr.window_hi;
      rate.samples = fr.count;
      rate.pass = fr.slope <= -cfg.limit_slope_factor * delta;
      rep.rates.push_back(rate);
    } catch (const Error& e) {
      rep.failures.push_back(std::string(name) + ": " + e.what());
    }
  };
  // When the projected solution coincides with the reference by construction
  // (e.g. linear evolution started with zero discrepancy) E sits at machine
  // zero for every kappa; fitting a power law to rounding noise is
  // meaningless, so record a direct negligibility check instead.
  double e_max = 0.0;
  for (const LimitSlot* s : ok) e_max = std::max(e_max, s->E);
  const bool e_negligible = !ok.empty() && e_max < 1e-10;
  if (e_negligible)
    rep.checks.push_back({"E_negligible", e_max, 1e-10, true});
  else
    fit_rate("E_vs_kappa", &LimitSlot::E);
  fit_rate("D_vs_kappa", &LimitSlot::D);

  if (ok.size() >= 2) {
    const double rd = monotone_ratio(ok, &LimitSlot::D);
    if (!e_negligible) {
      const double re = monotone_ratio(ok, &LimitSlot::E);
      rep.checks.push_back({"E_monotone", re, 1.0, re < 1.0});
    }
    rep.checks.push_back({"D_monotone", rd, 1.0, rd < 1.0});
  }
  return rep;
}

ExperimentReport run_decay_sweep(const ExperimentConfig& cfg) {
  ExperimentReport rep = init_report(cfg);
  const Grid grid = cfg.grid.build();
  const ClosureModel model = build_model(cfg.closure);
  const int d = grid.dim();
  const double kappa = cfg.kappa;

  const double t_box = grid.lambda() * grid.lambda();
  const double wlo = cfg.window_hi > 0.0 ? cfg.window_lo : 0.2 * t_box;
  const double whi = cfg.window_hi > 0.0 ? cfg.window_hi : 0.8 * t_box;
  const double horizon = std::max(cfg.horizon, whi);

  // The snapshot schedule must put enough samples inside the fit window.
  const double dt = cfg.integrator.dt;
  const int cadence = std::max(1, cfg.integrator.snapshot_every);
  const std::size_t nsteps =
      static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  int in_window = 0;
  for (std::size_t k = 0; k <= nsteps; ++k) {
    if (!(k % cadence == 0 || k == nsteps)) continue;
    const double t = static_cast<double>(k) * dt;
    if (t >= wlo && t <= whi) ++in_window;
  }
  if (in_window < cfg.snapshots_min)
    throw WindowTooShort(
        "only " + std::to_string(in_window) + " snapshots fall in the fit "
        "window [" + short_num(wlo) + ", " + short_num(whi) + "]; need at "
        "least " + std::to_string(cfg.snapshots_min));

  // Rough random data: velocities at regularity σ₁, densities one derivative
  // smoother (so ∇n sits at σ₁ too), all lattice shells populated.  The
  // densities are seeded at a tenth of the velocity amplitude: their own
  // profile is one derivative smoother and its low-frequency part would
  // otherwise take over the late fit window with a slower exponent.
  const double n_amp = 0.1 * cfg.amplitude;
  SimulationState st = make_state(grid, kappa, /*with_reference=*/false);
  st.u_plus = random_besov_field(grid, cfg.sigma1, hash_mix(cfg.seed, 31), d,
                                 cfg.amplitude);
  complete_low_shells(st.u_plus, cfg.sigma1, hash_mix(cfg.seed, 31));
  st.u_minus = random_besov_field(grid, cfg.sigma1, hash_mix(cfg.seed, 32), d,
                                  cfg.amplitude);
  complete_low_shells(st.u_minus, cfg.sigma1, hash_mix(cfg.seed, 32));
  st.n_plus = random_besov_field(grid, cfg.sigma1 + 1.0, hash_mix(cfg.seed, 33),
                                 1, n_amp);
  complete_low_shells(st.n_plus, cfg.sigma1 + 1.0, hash_mix(cfg.seed, 33));
  st.n_minus = random_besov_field(grid, cfg.sigma1 + 1.0,
                                  hash_mix(cfg.seed, 34), 1, n_amp);
  complete_low_shells(st.n_minus, cfg.sigma1 + 1.0, hash_mix(cfg.seed, 34));
  record_means(st);

  const SpectralWeights w0 = stacked_weights(st);

  struct Row {
    double t;
    std::vector<FamilyNorms> per_alpha;
  };
  std::vector<Row> rows;
  DiagnosticsRequest diag;
  diag.every_steps = cadence;
  diag.besov = false;
  diag.lyapunov = false;
  diag.on_snapshot = [&](const SimulationState& s, std::size_t) {
    Row row;
    row.t = s.t;
    const SpectralWeights wt = stacked_weights(s);
    for (const auto& a : cfg.alphas)
      row.per_alpha.push_back(family_norms(grid, wt, a, 0.0));
    rows.push_back(std::move(row));
  };

  SimulationResult res =
      run_simulation(std::move(st), model, cfg.integrator, horizon, diag);
  if (!res.failure.empty()) {
    rep.partial = true;
    rep.failures.push_back(res.failure);
  }

  for (std::size_t ai = 0; ai < cfg.alphas.size(); ++ai) {
    const std::string tag = order_suffix(cfg.alphas[ai]);
    const double theta = (cfg.alphas[ai][0] + cfg.alphas[ai][1] +
                          cfg.alphas[ai][2] - cfg.sigma1) / 2.0;

    // Pure-heat control through the identical pipeline: same initial
    // coefficients, same snapshot times, same fit.
    std::vector<std::pair<double, double>> heat_samples, run_samples;
    for (const Row& row : rows) {
      const FamilyNorms hc = family_norms(grid, w0, cfg.alphas[ai], row.t);
      rep.records.push_back({"heat", kappa, row.t, "w_" + tag, hc.w});
      heat_samples.push_back({row.t, hc.w});
      const FamilyNorms& fn = row.per_alpha[ai];
      rep.records.push_back({"run", kappa, row.t, "w_" + tag, fn.w});
      rep.records.push_back({"run", kappa, row.t, "n_" + tag, fn.n});
      rep.records.push_back({"run", kappa, row.t, "gradn_" + tag, fn.gradn});
      rep.records.push_back({"run", kappa, row.t, "u_" + tag, fn.u});
      run_samples.push_back({row.t, fn.w});
    }

    auto fit_one = [&](const char* prefix,
                       const std::vector<std::pair<double, double>>& samples,
                       double rel_tol) {
      try {
        const FitResult fr = fit_loglog_rate(samples, wlo, whi);
        FittedRate rate;
        rate.name = std::string(prefix) + "_" + tag;
        rate.slope = fr.slope;
        rate.stderr_slope = fr.stderr_slope;
        rate.residual = fr.residual;
        rate.target = -theta;
        rate.window_lo = fr.window_lo;
        rate.window_hi = fr.window_hi;
        rate.samples = fr.count;
        const double tol = rel_tol * std::max(std::abs(theta), 1e-9);
        rate.pass = std::abs(-fr.slope - theta) <= tol;
        rep.rates.push_back(rate);
      } catch (const Error& e) {
        rep.failures.push_back(std::string(prefix) + "_" + tag + ": " +
                               e.what());
      }
    };
    fit_one("heat", heat_samples, cfg.heat_rel_tol);
    fit_one("decay", run_samples, cfg.decay_rel_tol);
  }
  return rep;
}

ExperimentReport run_dispersion(const ExperimentConfig& cfg) {
  ExperimentReport rep = init_report(cfg);
  const Grid grid = cfg.grid.build();
  const ClosureModel model = build_model(cfg.closure);
  const ClosureCoefficients co = equilibrium_coefficients(model);
  if (!co.stable)
    throw NotStable("the dispersion experiment needs a stable closure");
  const int d = grid.dim();

  const DyadicBank bank = build_dyadic_bank(grid);
  const int j = std::min(std::max(-1, bank.j_min()), bank.j_max());
  const int center[3] = {0, 0, 0};
  GridField packet = coherent_packet(grid, bank, j, center);

  const double wlo = cfg.window_hi > 0.0 ? cfg.window_lo : 0.1;
  const double whi = cfg.window_hi > 0.0 ? cfg.window_hi : 1.0;
  if (!(wlo > 0.0))
    throw ConfigError("dispersion window must start at a positive time");
  constexpr int kTimes = 16;

  std::vector<std::pair<double, double>> samples;
  for (int i = 0; i < kTimes; ++i) {
    const double t =
        wlo * std::pow(whi / wlo, static_cast<double>(i) / (kTimes - 1));
    const GridField evolved = propagate_semigroup(packet, t, cfg.kappa, 1.0,
                                                  co.r_plus, 1.0, false);
    const double linf = lebesgue_norm(evolved, kInf);
    const double l2 = lebesgue_norm(evolved, 2.0);
    rep.records.push_back({"packet", cfg.kappa, t, "linf", linf});
    rep.records.push_back({"packet", cfg.kappa, t, "l2", l2});
    samples.push_back({t, linf});
  }

  const double theta = d / 2.0;  // L^∞ decay exponent of a dispersed packet
  try {
    const FitResult fr = fit_loglog_rate(samples);
    FittedRate rate;
    rate.name = "dispersion_linf";
    rate.slope = fr.slope;
    rate.stderr_slope = fr.stderr_slope;
    rate.residual = fr.residual;
    rate.target = -theta;
    rate.window_lo = fr.window_lo;
    rate.window_hi = fr.window_hi;
    rate.samples = fr.count;
    rate.pass = std::abs(-fr.slope - theta) <= cfg.dispersion_rel_tol * theta;
    rep.rates.push_back(rate);
  } catch (const Error& e) {
    rep.failures.push_back(std::string("dispersion_linf: ") + e.what());
  }
  return rep;
}

ExperimentReport run_stability_scan(const ExperimentConfig& cfg) {
  ExperimentReport rep = init_report(cfg);
  const Grid grid = cfg.grid.build();
  const double kappa = cfg.kappa;
  const int kmax = grid.n() / 3;  // resolved, dealiased mode range

  for (std::size_t i = 0; i < cfg.fprimes.size(); ++i) {
    const double fp = cfg.fprimes[i];
    const std::string rid = "fprime=" + short_num(fp);
    try {
      ClosureSpec cs = cfg.closure;
      cs.fprime1 = fp;
      const ClosureModel model = build_model(cs);
      const ClosureCoefficients co = equilibrium_coefficients(model);

      double max_re = -kInf;
      for (int k = 1; k <= kmax; ++k) {
        const double x = k / grid.lambda();
        for (const double r : {co.r_plus, co.r_minus}) {
          const auto ev = eigenvalues_closed_form(x, kappa, r);
          max_re = std::max({max_re, ev.first.real(), ev.second.real()});
        }
      }

      auto put = [&](const char* name, double v) {
        rep.records.push_back({rid, kappa, 0.0, name, v});
      };
      put("beta1", co.beta1);
      put("beta2", co.beta2);
      put("beta3", co.beta3);
      put("beta4", co.beta4);
      put("discriminant", co.discriminant);
      put("r_plus", co.r_plus);
      put("r_minus", co.r_minus);
      put("window_low", co.window_low);
      put("margin", co.margin);
      put("stable", co.stable ? 1.0 : 0.0);
      put("max_growth", max_re);

      const bool expected = co.window_low < fp && fp < 0.0;
      rep.checks.push_back({"window_match_" + std::to_string(i),
                            co.stable == expected ? 1.0 : 0.0, 0.5,
                            co.stable == expected});
      // Spectral cross-check: stable coefficients must show no resolved
      // growth; an unstable root r₋ < 0 grows exactly on the open band
      // |ξ|² < −r₋/κ, so demand positive growth whenever a lattice mode
      // lies strictly inside it (at the band edge the mode is neutral).
      bool gpass;
      if (co.stable) {
        gpass = max_re <= 1e-10;
      } else {
        const double rneg = std::min(co.r_plus, co.r_minus);
        const double xstar =
            rneg < 0.0 ? std::sqrt(-rneg / kappa) : 0.0;
        gpass = xstar > 1.0 / grid.lambda() ? max_re > 0.0 : true;
      }
      rep.checks.push_back(
          {"growth_consistent_" + std::to_string(i), max_re, 1e-10, gpass});
    } catch (const Error& e) {
      rep.partial = true;
      rep.failures.push_back(rid + ": " + e.what());
    }
  }
  return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  if (cfg.kind == "limit-sweep") return run_limit_sweep(cfg);
  if (cfg.kind == "decay-sweep") return run_decay_sweep(cfg);
  if (cfg.kind == "dispersion") return run_dispersion(cfg);
  if (cfg.kind == "stability-scan") return run_stability_scan(cfg);
  throw ConfigError("unknown experiment kind '" + cfg.kind + "'");
}

}  // namespace twofluid
