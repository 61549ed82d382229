// deficient: validate, run, sweep and audit scenario files.
//
// Exit codes: 0 all audits pass, 1 an audit failed, 2 bad config or arguments,
// 3 I/O error, 4 numerical abort or other error. Failures print a JSON report
// on stderr.

#include "deficient/artifacts.hpp"
#include "deficient/config.hpp"
#include "deficient/parallel.hpp"
#include "deficient/scenario.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace deficient;
using nlohmann::json;

namespace {

int report_failure(const std::string& kind, const std::string& message, int code,
                   const std::vector<std::string>& issues = {}) {
  json j{{"status", "error"}, {"kind", kind}, {"message", message}};
  if (!issues.empty()) j["issues"] = issues;
  std::cerr << j.dump(2) << "\n";
  return code;
}

std::filesystem::path output_dir(const ScenarioConfig& cfg, const std::string& out) {
  return out.empty() ? std::filesystem::path(cfg.outputs.directory) : std::filesystem::path(out);
}

void print_run_summary(const ScenarioConfig& cfg, const RunOutcome& outcome, const std::filesystem::path& dir) {
  const auto& rec = outcome.record;
  const auto& c = outcome.certificates;
  std::printf("scenario   %s (d=%ld, eps=%g, T=%g, n=%ld)\n", cfg.name.c_str(), cfg.d, rec.cfg.eps, rec.cfg.T, rec.cfg.n);
  if (!rec.series.empty()) {
    const auto& last = rec.series.back();
    std::printf("final      t=%g mass=%.12g energy=%.12g escaped=%ld\n", last.t, last.mass, last.energy,
                static_cast<long>(last.n_escaped));
  }
  Index violations = 0;
  for (const auto& r : c.rings) violations += static_cast<Index>(r.cylinder.violations.size());
  std::printf("rings      %zu certified, %ld cylinder violations, %ld monitored crossings\n", c.rings.size(),
              static_cast<long>(violations), static_cast<long>(c.monitor_crossings));
  double worst = 0;
  for (double r : c.weak_residuals) worst = std::max(worst, r);
  std::printf("residuals  representation=%.3g weak=%.3g moment_ratio=%.12g\n", c.representation, worst,
              c.moment_worst_ratio);
  for (const auto& row : c.tau)
    std::printf("tau        L=%g ell=%g tau=%.6g%s\n", row.L, row.ell, row.estimate.tau,
                row.estimate.converged ? "" : " (not converged)");
  const auto failures = c.failures();
  std::printf("audits     %s (%zu failures)\n", failures.empty() ? "pass" : "FAIL", failures.size());
  for (const auto& f : failures) std::printf("  - %s\n", f.c_str());
  std::printf("artifacts  %s\n", dir.string().c_str());
}

void print_sweep_summary(const ScenarioConfig& cfg, const SweepOutcome& s, const std::filesystem::path& dir) {
  std::printf("scenario   %s sweep over %zu epsilons\n", cfg.name.c_str(), s.report.epsilons.size());
  std::printf("%10s", "t");
  for (double e : s.report.epsilons) std::printf("  eps=%-10g", e);
  std::printf("  %-14s %s\n", "limit", "error");
  for (std::size_t j = 0; j < s.report.times.size(); ++j) {
    std::printf("%10g", s.report.times[j]);
    for (Index k = 0; k < s.report.mass.cols(); ++k) std::printf("  %-14.9g", s.report.mass(static_cast<Index>(j), k));
    std::printf("  %-14.9g %.3g\n", s.report.limit[j], s.report.error[j]);
  }
  std::printf("audits     %s (%zu failures)\n", s.passed() ? "pass" : "FAIL", s.failures.size());
  for (const auto& f : s.failures) std::printf("  - %s\n", f.c_str());
  std::printf("artifacts  %s\n", dir.string().c_str());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot read " + path.string());
  return json::parse(in);
}

// Rechecks the stored mass column of run.csv and the recorded audit verdicts.
int audit_dir(const std::filesystem::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  std::vector<std::string> failures;
  const std::string verb = manifest.value("verb", "");
  if (verb == "run") {
    std::ifstream in(dir / "run.csv");
    if (!in) throw IOError("cannot read " + (dir / "run.csv").string());
    std::string line;
    std::getline(in, line);
    double prev = std::numeric_limits<double>::infinity();
    long row = 0;
    while (std::getline(in, line)) {
      std::istringstream fields(line);
      std::string t, mass;
      std::getline(fields, t, ',');
      std::getline(fields, mass, ',');
      const double m = std::stod(mass);
      if (m > prev) failures.push_back("run.csv: mass increases at row " + std::to_string(row));
      prev = m;
      ++row;
    }
    const json cert = read_json(dir / "certificates.json");
    for (const auto& f : cert.at("failures")) failures.push_back("certificates: " + f.get<std::string>());
    std::printf("audit      %s: %ld rows of run.csv rechecked\n", dir.string().c_str(), row);
  } else if (verb == "sweep") {
    const json sweep = read_json(dir / "sweep.json");
    for (const auto& f : sweep.at("failures")) failures.push_back("sweep: " + f.get<std::string>());
    std::printf("audit      %s: sweep over %zu epsilons\n", dir.string().c_str(), sweep.at("epsilons").size());
  } else {
    throw IOError("manifest in " + dir.string() + " names no known verb");
  }
  if (manifest.value("passed", false) != failures.empty()) failures.push_back("manifest verdict disagrees with the audit");
  std::printf("audits     %s (%zu failures)\n", failures.empty() ? "pass" : "FAIL", failures.size());
  for (const auto& f : failures) std::printf("  - %s\n", f.c_str());
  if (!failures.empty()) {
    json j{{"status", "failed"}, {"failures", failures}};
    std::cerr << j.dump(2) << "\n";
    return 1;
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle simulator for Hamiltonian flows with speed-proportional mass loss"};
  app.require_subcommand(1);

  int threads = default_threads();
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config_path;
  std::string run_dir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "worker threads (default from DEFICIENT_THREADS)")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "override the sampler seed");
    sub->add_option("--out", out, "output directory (default from the config)");
  };

  auto* validate_cmd = app.add_subcommand("validate", "parse and validate a scenario file");
  validate_cmd->add_option("config", config_path)->required();
  auto* run_cmd = app.add_subcommand("run", "single evolution with certificates");
  run_cmd->add_option("config", config_path)->required();
  add_common(run_cmd);
  auto* sweep_cmd = app.add_subcommand("sweep", "epsilon sweep with extrapolated mass");
  sweep_cmd->add_option("config", config_path)->required();
  add_common(sweep_cmd);
  auto* audit_cmd = app.add_subcommand("audit", "recheck artifacts written by run or sweep");
  audit_cmd->add_option("run-dir", run_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*audit_cmd) return audit_dir(run_dir);

    const ScenarioConfig cfg = load_config(config_path);
    if (*validate_cmd) {
      std::printf("ok         %s (d=%ld, N=%ld)\n", cfg.name.c_str(), cfg.d, static_cast<long>(cfg.sampler.n));
      return 0;
    }
    const RunOptions options{threads, seed};
    const auto dir = output_dir(cfg, out);
    if (*run_cmd) {
      const RunOutcome outcome = run_scenario(cfg, options);
      write_run_artifacts(dir, cfg, outcome);
      print_run_summary(cfg, outcome, dir);
      if (outcome.record.aborted)
        return report_failure("NonFiniteError", outcome.record.error, 4, outcome.certificates.failures());
      if (!outcome.certificates.passed()) {
        json j{{"status", "failed"}, {"failures", outcome.certificates.failures()}};
        std::cerr << j.dump(2) << "\n";
        return 1;
      }
      return 0;
    }
    const SweepOutcome outcome = sweep_scenario(cfg, options);
    write_sweep_artifacts(dir, cfg, outcome);
    print_sweep_summary(cfg, outcome, dir);
    if (!outcome.passed()) {
      json j{{"status", "failed"}, {"failures", outcome.failures}};
      std::cerr << j.dump(2) << "\n";
      return 1;
    }
    return 0;
  } catch (const ParseError& e) {
    return report_failure("ParseError", e.what(), 2);
  } catch (const ValidationError& e) {
    return report_failure("ValidationError", e.what(), 2, e.issues());
  } catch (const IOError& e) {
    return report_failure("IOError", e.what(), 3);
  } catch (const json::exception& e) {
    return report_failure("IOError", e.what(), 3);
  } catch (const std::invalid_argument& e) {
    return report_failure("InvalidArgument", e.what(), 2);
  } catch (const std::exception& e) {
    return report_failure("Error", e.what(), 4);
  }
}
