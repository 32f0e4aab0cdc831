// Command-line front end: closure diagnostics, symbol tabulation, dyadic-bank
// verification, single simulations, and the sweep experiments.  Exit codes:
// 0 when every verdict passes, 1 when any verdict fails, 2 on runtime errors.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "twofluid/checkpoint.hpp"
#include "twofluid/closure.hpp"
#include "twofluid/config.hpp"
#include "twofluid/errors.hpp"
#include "twofluid/experiments.hpp"
#include "twofluid/grid.hpp"
#include "twofluid/littlewood_paley.hpp"
#include "twofluid/report.hpp"
#include "twofluid/solver.hpp"
#include "twofluid/spectral.hpp"
#include "twofluid/util.hpp"

namespace {

using namespace twofluid;

// ---------------------------------------------------------------------------
// Shared report plumbing.

void write_report_files(const ExperimentReport& rep, const std::string& dir) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  emit_report(rep, "csv", dir + "/report.csv");
  emit_report(rep, "json", dir + "/report.json");
  std::printf("wrote %s/report.csv and %s/report.json\n", dir.c_str(),
              dir.c_str());
}

int print_report_summary(const ExperimentReport& rep) {
  std::printf("experiment: %s\n", rep.kind.c_str());
  if (!rep.label.empty()) std::printf("label: %s\n", rep.label.c_str());
  std::printf("config=%s seed=%llu build=%s\n", rep.config_hash.c_str(),
              static_cast<unsigned long long>(rep.seed), rep.build_id.c_str());
  for (const auto& f : rep.failures)
    std::printf("failure: %s\n", f.c_str());
  for (const auto& r : rep.rates)
    std::printf("rate %-16s slope=%+.5g +/- %.3g target=%+.5g window=[%g, %g] "
                "n=%d [%s]\n",
                r.name.c_str(), r.slope, r.stderr_slope, r.target, r.window_lo,
                r.window_hi, r.samples, r.pass ? "PASS" : "FAIL");
  for (const auto& c : rep.checks)
    std::printf("check %-18s value=%.5g threshold=%.5g [%s]\n", c.name.c_str(),
                c.value, c.threshold, c.pass ? "PASS" : "FAIL");
  const bool ok = rep.all_pass();
  std::printf("verdict: %s%s\n", ok ? "PASS" : "FAIL",
              rep.partial ? " (partial)" : "");
  return ok ? 0 : 1;
}

ExperimentConfig load_config(const std::string& path, const std::string& kind) {
  ExperimentConfig cfg = parse_config_file(path);
  if (!kind.empty() && cfg.kind != kind) {
    cfg.kind = kind;  // the subcommand selects the experiment
    validate_config(cfg);
  }
  return cfg;
}

int run_experiment_command(const std::string& path, const std::string& kind,
                           const std::string& out_dir) {
  const ExperimentConfig cfg = load_config(path, kind);
  const ExperimentReport rep = run_experiment(cfg);
  const int rc = print_report_summary(rep);
  write_report_files(rep, out_dir);
  return rc;
}

// ---------------------------------------------------------------------------
// closure check

int cmd_closure_check(const std::string& path) {
  const ExperimentConfig cfg = load_config(path, "");
  const ClosureModel model = build_model(cfg.closure);
  const ClosureCoefficients co = equilibrium_coefficients(model);
  std::printf("beta1=%.17g\nbeta2=%.17g\nbeta3=%.17g\nbeta4=%.17g\n", co.beta1,
              co.beta2, co.beta3, co.beta4);
  std::printf("discriminant=%.17g\n", co.discriminant);
  std::printf("r_plus=%.17g\nr_minus=%.17g\n", co.r_plus, co.r_minus);
  std::printf("fprime1=%.17g\n", co.fprime1);
  std::printf("stability_window=(%.17g, 0)\n", co.window_low);
  std::printf("margin=%.17g\n", co.margin);
  std::printf("verdict: %s\n", co.stable ? "stable" : "unstable");
  return co.stable ? 0 : 1;
}

// ---------------------------------------------------------------------------
// spectrum

int cmd_spectrum(const std::string& path, double kappa, double xi_max,
                 int points, const std::string& out) {
  const ExperimentConfig cfg = load_config(path, "");
  const Grid grid = cfg.grid.build();
  const ClosureModel model = build_model(cfg.closure);
  const ClosureCoefficients co = equilibrium_coefficients(model);
  if (!(kappa > 0.0)) kappa = cfg.kappa;
  if (!(xi_max > 0.0))
    xi_max = grid.n() / (3.0 * grid.lambda());  // resolved, dealiased range

  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!out.empty()) {
    file.open(out, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("cannot open output file '" + out + "'");
    os = &file;
  }
  *os << "xi,root,re_lambda_plus,im_lambda_plus,re_lambda_minus,"
         "im_lambda_minus\n";
  double max_growth = -1e300;
  for (int i = 1; i <= points; ++i) {
    const double x = xi_max * i / points;
    const struct { const char* name; double r; } roots[] = {
        {"r_plus", co.r_plus}, {"r_minus", co.r_minus}};
    for (const auto& root : roots) {
      const auto ev = eigenvalues_closed_form(x, kappa, root.r);
      max_growth = std::max({max_growth, ev.first.real(), ev.second.real()});
      *os << format_g17(x) << ',' << root.name << ','
          << format_g17(ev.first.real()) << ',' << format_g17(ev.first.imag())
          << ',' << format_g17(ev.second.real()) << ','
          << format_g17(ev.second.imag()) << '\n';
    }
  }
  std::fprintf(stderr, "kappa=%g xi_max=%g max Re(lambda)=%.6g%s\n", kappa,
               xi_max, max_growth,
               max_growth > 0.0 ? " (growing band present)" : "");
  return 0;
}

// ---------------------------------------------------------------------------
// lp-verify

int cmd_lp_verify(const std::string& path) {
  const ExperimentConfig cfg = load_config(path, "");
  const Grid grid = cfg.grid.build();
  const DyadicBank bank = build_dyadic_bank(grid);
  std::printf("grid: dim=%d n=%d lambda=%g\n", grid.dim(), grid.n(),
              grid.lambda());
  std::printf("bank: j in [%d, %d], covered |xi| in [%.6g, %.6g]\n",
              bank.j_min(), bank.j_max(), bank.covered_lo(), bank.covered_hi());

  bool all = true;
  auto line = [&](const char* name, double value, double thr, bool pass) {
    std::printf("check %-22s value=%.3e threshold=%.3e [%s]\n", name, value,
                thr, pass ? "PASS" : "FAIL");
    all = all && pass;
  };

  // The masks must sum to the stored coverage profile at every lattice site.
  std::vector<double> sum(grid.points(), 0.0);
  for (int j = bank.j_min(); j <= bank.j_max(); ++j) {
    const auto& m = bank.mask(j);
    for (std::size_t s = 0; s < sum.size(); ++s) sum[s] += m[s];
  }
  double defect = 0.0;
  for (std::size_t s = 0; s < sum.size(); ++s)
    defect = std::max(defect, std::abs(sum[s] - bank.coverage()[s]));
  line("partition_defect", defect, 1e-12, defect <= 1e-12);

  // Blocks two or more octaves apart must have disjoint supports.
  double overlap = 0.0;
  for (int j = bank.j_min(); j <= bank.j_max(); ++j)
    for (int l = j + 2; l <= bank.j_max(); ++l) {
      const auto& mj = bank.mask(j);
      const auto& ml = bank.mask(l);
      for (std::size_t s = 0; s < mj.size(); ++s)
        overlap = std::max(overlap, mj[s] * ml[s]);
    }
  line("far_block_overlap", overlap, 0.0, overlap == 0.0);

  // A covered random field is reconstructed by summing its blocks.
  GridField u =
      random_besov_field(grid, 0.5 * grid.dim() - 1.0, cfg.seed, 1, 1.0);
  GridField rec(grid, 1);
  rec.ensure_spec();
  for (int j = bank.j_min(); j <= bank.j_max(); ++j)
    axpy_spec(rec, cd{1.0, 0.0}, dyadic_block(bank, u, j));
  axpy_spec(rec, cd{-1.0, 0.0}, u);
  const double rel = lebesgue_norm(rec, 2.0) / lebesgue_norm(u, 2.0);
  line("reconstruction_error", rel, 1e-10, rel <= 1e-10);

  // First-derivative-to-scale ratio on a mid-bank block stays order one.
  const int jmid = (bank.j_min() + bank.j_max()) / 2;
  const double ratio = bernstein_probe(bank, u, jmid, 1, 2.0, 2.0);
  line("derivative_ratio", ratio, 3.0, ratio > 0.0 && ratio <= 3.0);

  std::printf("verdict: %s\n", all ? "PASS" : "FAIL");
  return all ? 0 : 1;
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const std::string& path, const std::string& out_dir,
                 int checkpoint_every) {
  const ExperimentConfig cfg = load_config(path, "");
  const Grid grid = cfg.grid.build();
  const ClosureModel model = build_model(cfg.closure);
  std::filesystem::create_directories(out_dir);

  SimulationState state =
      make_initial_state(grid, cfg.kappa, cfg.amplitude, cfg.seed, true);

  DiagnosticsRequest diag;
  diag.split_p = cfg.p;
  diag.derivative_orders = cfg.alphas;
  std::size_t last_ckpt = 0;
  if (checkpoint_every > 0) {
    diag.on_snapshot = [&](const SimulationState& s, std::size_t step) {
      if (step == 0 || step < last_ckpt + static_cast<std::size_t>(
                                              checkpoint_every))
        return;
      last_ckpt = step;
      char name[64];
      std::snprintf(name, sizeof name, "/checkpoint_%08zu.bin", step);
      checkpoint_save(out_dir + name, s, {cfg.seed, step});
    };
  }

  const SimulationResult res =
      run_simulation(state, model, cfg.integrator, cfg.horizon, diag);

  // Diagnostics table: fixed column order taken from the first snapshot.
  const std::string csv_path = out_dir + "/diagnostics.csv";
  std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
  if (!csv) throw Error("cannot open output file '" + csv_path + "'");
  if (!res.series.empty()) {
    csv << "t";
    for (const auto& kv : res.series.front().values) csv << ',' << kv.first;
    csv << '\n';
    for (const auto& row : res.series) {
      csv << format_g17(row.t);
      for (const auto& kv : row.values) csv << ',' << format_g17(kv.second);
      csv << '\n';
    }
  }
  csv.close();

  checkpoint_save(out_dir + "/checkpoint.bin", res.final_state,
                  {cfg.seed, res.steps});
  std::printf("steps=%zu final_t=%.17g snapshots=%zu\n", res.steps,
              res.final_state.t, res.series.size());
  std::printf("wrote %s and %s/checkpoint.bin\n", csv_path.c_str(),
              out_dir.c_str());
  if (!res.failure.empty()) {
    std::printf("failure: %s\n", res.failure.c_str());
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for a compressible two-fluid model "
               "with capillarity"};
  app.require_subcommand(1);
  std::function<int()> task;

  std::string cfg_path;
  std::string out_dir;

  // closure check
  auto* closure = app.add_subcommand("closure", "closure diagnostics");
  closure->require_subcommand(1);
  auto* check = closure->add_subcommand(
      "check", "equilibrium coefficients and the stability verdict");
  check->add_option("config", cfg_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  check->callback([&] { task = [&] { return cmd_closure_check(cfg_path); }; });

  // spectrum
  double kappa = 0.0, xi_max = 0.0;
  int points = 128;
  std::string spec_out;
  auto* spectrum = app.add_subcommand(
      "spectrum", "tabulate the linearized mode rates over frequency");
  spectrum->add_option("config", cfg_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  spectrum->add_option("--kappa", kappa, "capillarity strength (default: config)");
  spectrum->add_option("--xi-max", xi_max,
                       "largest frequency tabulated (default: resolved range)");
  spectrum->add_option("--points", points, "table resolution")
      ->check(CLI::PositiveNumber);
  spectrum->add_option("--out", spec_out, "CSV output file (default: stdout)");
  spectrum->callback([&] {
    task = [&] { return cmd_spectrum(cfg_path, kappa, xi_max, points, spec_out); };
  });

  // lp-verify
  auto* lp = app.add_subcommand(
      "lp-verify", "verify the dyadic frequency decomposition on the grid");
  lp->add_option("config", cfg_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  lp->callback([&] { task = [&] { return cmd_lp_verify(cfg_path); }; });

  // simulate
  int checkpoint_every = 0;
  auto* sim = app.add_subcommand(
      "simulate", "run one simulation and record diagnostics");
  sim->add_option("config", cfg_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  sim->add_option("--out", out_dir, "output directory")->required();
  sim->add_option("--checkpoint-every", checkpoint_every,
                  "periodic checkpoint interval in steps (0 disables; fires "
                  "at the next diagnostics snapshot)");
  sim->callback([&] {
    task = [&] { return cmd_simulate(cfg_path, out_dir, checkpoint_every); };
  });

  // experiment sweeps
  const struct { const char* name; const char* help; } sweeps[] = {
      {"dispersion", "free-propagation decay of a localized packet"},
      {"limit-sweep", "large-capillarity limit: reference error and "
                      "dispersive quadrature against kappa"},
      {"decay-sweep", "long-time decay exponents against the heat control"},
      {"stability-scan", "stability verdicts across interphase slopes"},
  };
  for (const auto& sw : sweeps) {
    auto* sub = app.add_subcommand(sw.name, sw.help);
    sub->add_option("config", cfg_path, "experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "directory for report.csv/report.json");
    const std::string kind = sw.name;
    sub->callback([&, kind] {
      task = [&, kind] { return run_experiment_command(cfg_path, kind, out_dir); };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // --help and --version exit cleanly
  }
  try {
    return task ? task() : 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
