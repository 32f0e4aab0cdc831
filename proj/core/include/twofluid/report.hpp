#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace twofluid {

// One measured observable at one sweep point: `kappa` and/or `t` may be NaN
// when they do not apply to the experiment kind.
struct ReportRecord {
  std::string run_id;
  double kappa = 0.0;
  double t = 0.0;
  std::string observable;
  double value = 0.0;
};

// A fitted power-law exponent with its uncertainty, fit window, and verdict.
struct FittedRate {
  std::string name;
  double slope = 0.0;
  double stderr_slope = 0.0;
  double residual = 0.0;
  double target = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  int samples = 0;
  bool pass = false;
};

// A scalar pass/fail check (monotonicity ratios, positivity margins, ...).
struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct ExperimentReport {
  std::string kind;
  std::string label;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string build_id;
  bool partial = false;               // some sweep points failed to complete
  std::vector<std::string> failures;  // per-point failure descriptions
  std::vector<ReportRecord> records;
  std::vector<FittedRate> rates;
  std::vector<Check> checks;

  bool all_pass() const;
};

// CSV: header `run_id,kappa,t,observable,value`, one row per record with
// 17-significant-digit floats, then a comment footer carrying provenance.
std::string report_to_csv(const ExperimentReport& report);

// JSON mirrors the full report including fits, checks, and verdicts.  NaN
// values serialize as null; emit -> parse -> emit is byte-identical.
std::string report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const std::string& text);

// format: "csv" or "json".  Throws ConfigError on unknown format and Error on
// I/O failure.
void emit_report(const ExperimentReport& report, const std::string& format,
                 const std::string& path);

ExperimentReport load_report_json(const std::string& path);

}  // namespace twofluid
