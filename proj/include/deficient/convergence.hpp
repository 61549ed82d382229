#pragma once

// eps -> 0 and n -> infinity diagnostics over sets of runs sharing one initial
// sample: mass curves and their extrapolated limit, representation-formula
// checks, paired trajectory closeness and weak-form residuals.

#include "deficient/deficient_flow.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace deficient {

struct SweepPlan {
  std::vector<double> epsilons;  // strictly decreasing
  std::vector<long> ns;          // strictly increasing; sweeps use the largest
  std::vector<double> probe_times;

  void validate(double T) const;
};

struct MassReport {
  std::vector<double> epsilons;
  std::vector<double> times;
  MatrixXd mass;              // times x epsilons
  std::vector<double> limit;  // Richardson extrapolation on the last two epsilons
  std::vector<double> error;  // last successive difference
  std::vector<bool> shrinking;         // successive differences shrink monotonically at this time
  std::vector<bool> monotone_in_time;  // per epsilon
};

/// Assembles a report from runs[k] at eps = epsilons[k].
MassReport mass_report(const std::vector<double>& epsilons, const std::vector<double>& times,
                       const std::vector<RunRecord>& runs);

/// Runs evolve once per epsilon (n = largest of the plan) and reports masses.
/// When runs_out is given the records are moved into it.
MassReport epsilon_sweep(const Measure& mu0, const Model& model, const FlowConfig& base, const SweepPlan& plan,
                         int jobs = 1, std::vector<RunRecord>* runs_out = nullptr, bool keep_frames = false);

struct MonotonicityAudit {
  bool ok = true;
  std::vector<double> slack;  // allowance minus increase, per probe interval
  long first_failure = -1;    // interval index [t_j, t_{j+1}]
};

/// Extrapolated mass nonincreasing in t up to factor * max(error_j, error_{j+1}).
MonotonicityAudit limit_mass_monotonicity(const MassReport& report, double factor = 2.0);

enum class RepresentationMode { Bookkeeping, Reintegration };

/// Largest |sum over the time-0 particle list of w0 e^{-eps S_t} phi(X_t) - integral of phi against mu_t|
/// over the battery. Reintegration recomputes X_t, S_t at ode_tol * tighten against the recorded
/// snapshot fields.
double representation_check(const RunRecord& record, const Model& model, const std::vector<SpatialBump<double>>& battery,
                            double t, RepresentationMode mode = RepresentationMode::Bookkeeping,
                            double tighten = 1e-2);

/// sin^2 bump on [t_a, t_b], zero outside; C^1.
struct TimeWindow {
  double t_a = 0;
  double t_b = 1;

  double operator()(double t) const;
  double derivative(double t) const;
};

/// |int int (d_t(phi chi) + chi <v, grad phi> - eps chi |v| phi) dmu_t dt| by the trapezoid rule over
/// the grid, using one-sided velocities on each interval.
double weak_residual(const RunRecord& record, const SpatialBump<double>& phi, const TimeWindow& window);

/// Deterministic battery of count bumps with Gaussian centres of scale spread.
std::vector<SpatialBump<double>> bump_battery(Index d, Index count, double radius, double spread, std::uint64_t seed);

struct ClosenessReport {
  double deviation = 0;
  Index cohort = 0;
  bool empty = true;
};

/// Pairs particles of a coarse and a fine run (fine.n a multiple of coarse.n) and returns the largest
/// phase distance on the coarse grid up to t, over particles whose fine trajectory stays in the
/// phase ball of radius L.
ClosenessReport paired_deviation(const RunRecord& coarse, const RunRecord& fine, double L, double t);

ClosenessReport trajectory_closeness(const Measure& mu0, const Model& model, const FlowConfig& base, long n1, long n2,
                                     double L, double t);

/// Decayed mass of the alive particles in the phase ball of radius L.
double mass_in_phase_ball(const Measure& mu, double L, double eps);

} // namespace deficient
