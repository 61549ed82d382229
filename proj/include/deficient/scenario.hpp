#pragma once

// Scenario orchestration: builds the model, initial sample and flow settings
// from a config, runs single evolutions or epsilon sweeps and evaluates the
// enabled audits.

#include "deficient/config.hpp"
#include "deficient/convergence.hpp"
#include "deficient/deficient_flow.hpp"
#include "deficient/no_return.hpp"

#include <optional>
#include <string>
#include <vector>

namespace deficient {

Model build_model(const ScenarioConfig& cfg);
std::optional<BoundingPotential> build_bounding(const ScenarioConfig& cfg, const Model& model);
Measure initial_measure(const ScenarioConfig& cfg, std::optional<std::uint64_t> seed = std::nullopt);
FlowConfig flow_config(const ScenarioConfig& cfg, double eps, long n, int threads = 1);
std::vector<SpatialBump<double>> scenario_battery(const ScenarioConfig& cfg);

struct RingAudit {
  StarRing ring;  // survives a 10x finer grid
  double a_star = 0;
  double eta = 0;
  CylinderAudit cylinder;
};

struct TauRow {
  double L = 0;
  double ell = 0;
  TauEstimate estimate;
};

struct Certificates {
  double eps = 0;
  bool mass_monotone = true;
  long mass_first_violation = -1;  // step index k with mass(k+1) > mass(k)
  std::vector<double> moment_alphas;
  bool moment_monotone = true;
  double moment_worst_ratio = 0;  // max over steps of M(k+1) / M(k)
  bool pathwise_ok = true;
  double pathwise_worst_ratio = 0;
  std::optional<BoundingReport> bounding;
  std::vector<RingAudit> rings;
  Index rings_rejected = 0;  // coarse candidates refuted on the finer grid
  Index monitor_crossings = 0;
  Index monitor_monotone_failures = 0;
  Index monitor_htilde_failures = 0;
  Index monitor_reentries = 0;
  std::vector<TauRow> tau;
  double representation = 0;
  std::vector<double> weak_residuals;  // battery bumps against a sin^2 window on [T/8, 7T/8]
  bool aborted = false;
  std::string error;

  std::vector<std::string> failures() const;
  bool passed() const { return failures().empty(); }
};

Certificates certify(const ScenarioConfig& cfg, const Model& model, const RunRecord& record,
                     const std::optional<BoundingPotential>& bounding);

struct RunOutcome {
  RunRecord record;
  Certificates certificates;
};

struct RunOptions {
  int threads = 1;
  std::optional<std::uint64_t> seed;
};

RunOutcome run_scenario(const ScenarioConfig& cfg, const RunOptions& options = {});

struct SweepOutcome {
  MassReport report;
  MonotonicityAudit limit_audit;
  std::vector<RunRecord> runs;
  std::vector<std::string> failures;
  bool passed() const { return failures.empty(); }
};

SweepOutcome sweep_scenario(const ScenarioConfig& cfg, const RunOptions& options = {});

} // namespace deficient
