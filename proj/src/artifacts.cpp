#include "deficient/artifacts.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace deficient {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string run_csv(const RunRecord& record) {
  std::ostringstream out;
  out << "t,mass,energy";
  for (double a : record.alphas) out << ",M_alpha_" << format_double(a);
  out << ",n_escaped,max_p,max_q\n";
  for (const auto& g : record.series) {
    out << format_double(g.t) << ',' << format_double(g.mass) << ',' << format_double(g.energy);
    for (const auto& m : g.moments) out << ',' << format_double(m.value);
    out << ',' << g.n_escaped << ',' << format_double(g.max_p) << ',' << format_double(g.max_q) << '\n';
  }
  return out.str();
}

std::string snapshot_csv(const Measure& mu) {
  std::ostringstream out;
  const Index d = mu.dim();
  for (Index k = 1; k <= d; ++k) out << 'p' << k << ',';
  for (Index k = 1; k <= d; ++k) out << 'q' << k << ',';
  out << "w0,S,status,t_escape\n";
  for (Index i = 0; i < mu.size(); ++i) {
    for (Index k = 0; k < d; ++k) out << format_double(mu.p(i)[k]) << ',';
    for (Index k = 0; k < d; ++k) out << format_double(mu.q(i)[k]) << ',';
    out << format_double(mu.w0(i)) << ',' << format_double(mu.S(i)) << ',' << (mu.alive(i) ? "alive" : "escaped") << ','
        << format_double(mu.t_escape(i)) << '\n';
  }
  return out.str();
}

std::string sweep_csv(const MassReport& report) {
  std::ostringstream out;
  out << 't';
  for (double e : report.epsilons) out << ",M_eps_" << format_double(e);
  out << ",limit,error,shrinking\n";
  for (std::size_t j = 0; j < report.times.size(); ++j) {
    out << format_double(report.times[j]);
    for (Index k = 0; k < report.mass.cols(); ++k) out << ',' << format_double(report.mass(static_cast<Index>(j), k));
    out << ',' << format_double(report.limit[j]) << ',' << format_double(report.error[j]) << ','
        << (report.shrinking[j] ? "true" : "false") << '\n';
  }
  return out.str();
}

namespace {

nlohmann::json number_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

} // namespace

nlohmann::json certificates_json(const Certificates& c) {
  using nlohmann::json;
  json j;
  j["epsilon"] = c.eps;
  j["passed"] = c.passed();
  j["failures"] = c.failures();
  j["aborted"] = c.aborted;
  if (c.aborted) j["error"] = c.error;
  j["mass_monotone"] = c.mass_monotone;
  j["mass_first_violation"] = c.mass_first_violation;
  j["moment"] = {{"alphas", c.moment_alphas}, {"monotone", c.moment_monotone}, {"worst_ratio", c.moment_worst_ratio}};
  j["pathwise"] = {{"ok", c.pathwise_ok}, {"worst_ratio", number_or_null(c.pathwise_worst_ratio)}};
  if (c.bounding) {
    j["bounding"] = {{"ok", c.bounding->ok},
                     {"worst_margin", number_or_null(c.bounding->worst_margin)},
                     {"worst_radius", c.bounding->worst_radius}};
  }
  json rings = json::array();
  for (const auto& r : c.rings) {
    json v = json::array();
    for (const auto& x : r.cylinder.violations) {
      v.push_back({{"particle", x.particle}, {"t", x.t}, {"p_norm", x.p_norm}, {"q_norm", x.q_norm}});
    }
    rings.push_back({{"radius", r.ring.radius},
                     {"a_star", r.a_star},
                     {"eta", r.eta},
                     {"checked", r.cylinder.checked},
                     {"position_exits", r.cylinder.position_exits},
                     {"violations", v}});
  }
  j["rings"] = rings;
  j["rings_rejected"] = c.rings_rejected;
  j["monitor"] = {{"crossings", c.monitor_crossings},
                  {"monotone_failures", c.monitor_monotone_failures},
                  {"htilde_failures", c.monitor_htilde_failures},
                  {"reentries", c.monitor_reentries}};
  json tau = json::array();
  for (const auto& row : c.tau) {
    tau.push_back({{"L", row.L},
                   {"ell", row.ell},
                   {"tau", number_or_null(row.estimate.tau)},
                   {"tau_10x", number_or_null(row.estimate.tau_farther)},
                   {"converged", row.estimate.converged}});
  }
  j["tau"] = tau;
  j["representation"] = c.representation;
  j["weak_residuals"] = c.weak_residuals;
  return j;
}

nlohmann::json sweep_json(const SweepOutcome& s) {
  using nlohmann::json;
  json j;
  j["passed"] = s.passed();
  j["failures"] = s.failures;
  j["epsilons"] = s.report.epsilons;
  j["times"] = s.report.times;
  json limit = json::array(), error = json::array();
  for (double x : s.report.limit) limit.push_back(number_or_null(x));
  for (double x : s.report.error) error.push_back(number_or_null(x));
  j["limit"] = limit;
  j["error"] = error;
  std::vector<bool> shrinking(s.report.shrinking.begin(), s.report.shrinking.end());
  j["shrinking"] = shrinking;
  j["limit_monotone"] = {{"ok", s.limit_audit.ok}, {"slack", s.limit_audit.slack}, {"first_failure", s.limit_audit.first_failure}};
  return j;
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IOError("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IOError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IOError("write failed for " + path.string());
}

std::vector<std::string> write_run_artifacts(const std::filesystem::path& dir, const ScenarioConfig& cfg,
                                             const RunOutcome& outcome) {
  ensure_directory(dir);
  const RunRecord& rec = outcome.record;
  std::vector<std::string> files;
  write_text(dir / "run.csv", run_csv(rec));
  files.push_back("run.csv");

  if (std::find(cfg.outputs.formats.begin(), cfg.outputs.formats.end(), "csv") != cfg.outputs.formats.end()) {
    std::vector<std::size_t> picks;
    for (double t : cfg.probes.times) {
      for (std::size_t k = 0; k < rec.frames.size(); ++k)
        if (std::abs(rec.frames[k].t - t) <= 1e-9 * rec.cfg.T) picks.push_back(k);
    }
    if (!rec.frames.empty()) picks.push_back(rec.frames.size() - 1);
    std::sort(picks.begin(), picks.end());
    picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
    for (std::size_t k : picks) {
      const std::string name = "snapshot_" + std::to_string(k) + ".csv";
      write_text(dir / name, snapshot_csv(rec.frames[k].mu));
      files.push_back(name);
    }
  }

  write_text(dir / "certificates.json", certificates_json(outcome.certificates).dump(2) + "\n");
  files.push_back("certificates.json");

  nlohmann::json manifest;
  manifest["scenario"] = cfg.name;
  manifest["verb"] = "run";
  manifest["epsilon"] = rec.cfg.eps;
  manifest["T"] = rec.cfg.T;
  manifest["n"] = rec.cfg.n;
  manifest["seed"] = rec.cfg.seed;
  manifest["particles"] = rec.frames.empty() ? 0 : rec.frames.front().mu.size();
  manifest["d"] = cfg.d;
  manifest["passed"] = outcome.certificates.passed();
  files.push_back("manifest.json");
  manifest["files"] = files;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return files;
}

std::vector<std::string> write_sweep_artifacts(const std::filesystem::path& dir, const ScenarioConfig& cfg,
                                               const SweepOutcome& outcome) {
  ensure_directory(dir);
  std::vector<std::string> files{"sweep.csv", "sweep.json", "manifest.json"};
  write_text(dir / "sweep.csv", sweep_csv(outcome.report));
  write_text(dir / "sweep.json", sweep_json(outcome).dump(2) + "\n");
  nlohmann::json manifest;
  manifest["scenario"] = cfg.name;
  manifest["verb"] = "sweep";
  manifest["epsilons"] = outcome.report.epsilons;
  manifest["n"] = outcome.runs.empty() ? 0 : outcome.runs.front().cfg.n;
  manifest["seed"] = outcome.runs.empty() ? 0 : outcome.runs.front().cfg.seed;
  manifest["passed"] = outcome.passed();
  manifest["files"] = files;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return files;
}

} // namespace deficient
