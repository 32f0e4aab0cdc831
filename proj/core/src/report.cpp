#include "twofluid/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "nlohmann/json.hpp"
#include "twofluid/errors.hpp"
#include "twofluid/util.hpp"

namespace twofluid {

namespace {

using ordered_json = nlohmann::ordered_json;

// NaN has no JSON literal; the library serializes it as null, so the reader
// must map null back to NaN to make emit -> parse -> emit the identity.
double num_or_nan(const ordered_json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nan("");
  return v.get<double>();
}

ordered_json record_json(const ReportRecord& r) {
  ordered_json j;
  j["run_id"] = r.run_id;
  j["kappa"] = r.kappa;
  j["t"] = r.t;
  j["observable"] = r.observable;
  j["value"] = r.value;
  return j;
}

ordered_json rate_json(const FittedRate& r) {
  ordered_json j;
  j["name"] = r.name;
  j["slope"] = r.slope;
  j["stderr_slope"] = r.stderr_slope;
  j["residual"] = r.residual;
  j["target"] = r.target;
  j["window_lo"] = r.window_lo;
  j["window_hi"] = r.window_hi;
  j["samples"] = r.samples;
  j["pass"] = r.pass;
  return j;
}

ordered_json check_json(const Check& c) {
  ordered_json j;
  j["name"] = c.name;
  j["value"] = c.value;
  j["threshold"] = c.threshold;
  j["pass"] = c.pass;
  return j;
}

}  // namespace

bool ExperimentReport::all_pass() const {
  if (partial || !failures.empty()) return false;
  for (const auto& r : rates)
    if (!r.pass) return false;
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

std::string report_to_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "run_id,kappa,t,observable,value\n";
  for (const auto& r : report.records) {
    os << r.run_id << ',' << format_g17(r.kappa) << ',' << format_g17(r.t)
       << ',' << r.observable << ',' << format_g17(r.value) << '\n';
  }
  os << "# config_hash=" << report.config_hash << " seed=" << report.seed
     << " build=" << report.build_id << '\n';
  return os.str();
}

std::string report_to_json(const ExperimentReport& report) {
  ordered_json j;
  j["kind"] = report.kind;
  j["label"] = report.label;
  j["config_hash"] = report.config_hash;
  j["seed"] = report.seed;
  j["build_id"] = report.build_id;
  j["partial"] = report.partial;
  j["failures"] = report.failures;
  j["records"] = ordered_json::array();
  for (const auto& r : report.records) j["records"].push_back(record_json(r));
  j["rates"] = ordered_json::array();
  for (const auto& r : report.rates) j["rates"].push_back(rate_json(r));
  j["checks"] = ordered_json::array();
  for (const auto& c : report.checks) j["checks"].push_back(check_json(c));
  j["all_pass"] = report.all_pass();
  return j.dump(2) + "\n";
}

ExperimentReport report_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("malformed report JSON: ") + e.what());
  }
  try {
    ExperimentReport rep;
    rep.kind = j.at("kind").get<std::string>();
    rep.label = j.at("label").get<std::string>();
    rep.config_hash = j.at("config_hash").get<std::string>();
    rep.seed = j.at("seed").get<std::uint64_t>();
    rep.build_id = j.at("build_id").get<std::string>();
    rep.partial = j.at("partial").get<bool>();
    rep.failures = j.at("failures").get<std::vector<std::string>>();
    for (const auto& r : j.at("records")) {
      ReportRecord rec;
      rec.run_id = r.at("run_id").get<std::string>();
      rec.kappa = num_or_nan(r, "kappa");
      rec.t = num_or_nan(r, "t");
      rec.observable = r.at("observable").get<std::string>();
      rec.value = num_or_nan(r, "value");
      rep.records.push_back(std::move(rec));
    }
    for (const auto& r : j.at("rates")) {
      FittedRate fr;
      fr.name = r.at("name").get<std::string>();
      fr.slope = num_or_nan(r, "slope");
      fr.stderr_slope = num_or_nan(r, "stderr_slope");
      fr.residual = num_or_nan(r, "residual");
      fr.target = num_or_nan(r, "target");
      fr.window_lo = num_or_nan(r, "window_lo");
      fr.window_hi = num_or_nan(r, "window_hi");
      fr.samples = r.at("samples").get<int>();
      fr.pass = r.at("pass").get<bool>();
      rep.rates.push_back(std::move(fr));
    }
    for (const auto& c : j.at("checks")) {
      Check ck;
      ck.name = c.at("name").get<std::string>();
      ck.value = num_or_nan(c, "value");
      ck.threshold = num_or_nan(c, "threshold");
      ck.pass = c.at("pass").get<bool>();
      rep.checks.push_back(std::move(ck));
    }
    return rep;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("report JSON missing fields: ") + e.what());
  }
}

void emit_report(const ExperimentReport& report, const std::string& format,
                 const std::string& path) {
  std::string body;
  if (format == "csv") body = report_to_csv(report);
  else if (format == "json") body = report_to_json(report);
  else throw ConfigError("unknown report format '" + format + "'");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << body;
  out.flush();
  if (!out) throw Error("failed while writing '" + path + "'");
}

ExperimentReport load_report_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open report '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return report_from_json(buf.str());
}

}  // namespace twofluid
