#pragma once

// Characteristic flow of the deficient continuity equation and the
// frozen-field time discretization: on [kh, (k+1)h) every particle moves
// under the velocity field generated by the snapshot at time kh, and its
// path length S grows by the integral of |xdot|.

#include "deficient/model.hpp"
#include "deficient/phase_space.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace deficient {

struct FlowConfig {
  double eps = 0;
  double T = 1;
  long n = 1;
  double ode_tol = 1e-9;
  double x_max = 1e6;
  double h_min = 0;  // 0 means 1e-12 * T
  std::uint64_t seed = 0;
  int threads = 1;

  double h() const { return T / static_cast<double>(n); }
  double min_step() const { return h_min > 0 ? h_min : 1e-12 * T; }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

class NonFiniteError : public std::runtime_error {
public:
  NonFiniteError(const std::string& what, Index particle = -1) : std::runtime_error(what), particle_(particle) {}
  Index particle() const { return particle_; }

private:
  Index particle_;
};

/// Velocity field with the interaction part frozen at a snapshot.
class FrozenField {
public:
  FrozenField(const Model& model, const Measure& snapshot, double eps);

  /// Interaction switched off: single-particle dynamics under Phi only.
  static FrozenField selfless(const Model& model);

  const Model& model() const { return model_; }
  Point velocity(const Point& x) const;
  /// Stacked [pdot; qdot] for a stacked [p; q] (extra trailing entries ignored).
  VectorXd velocity_stacked(const VectorXd& x) const;

private:
  explicit FrozenField(const Model& model) : model_(model) {}

  Model model_;
  std::optional<InteractionField<double>> field_;
};

struct AdvanceResult {
  Point x;
  double S = 0;
  Status status = Status::Alive;
  double t_escape = std::numeric_limits<double>::infinity();  // measured from the start of the advance
  Point v_end;                                                 // velocity at x under the same field
  double h_next = 0;
};

/// Advances one particle by dt under a frozen field, integrating S alongside.
AdvanceResult advance_particle(const Point& x0, double S0, const FrozenField& field, double dt,
                               const FlowConfig& cfg, double h_init = 0);

struct Trajectory {
  std::vector<double> t;
  std::vector<Point> x;
  std::vector<double> S;
  std::vector<Point> v_left;   // velocity limits from the left / right at each sample;
  std::vector<Point> v_right;  // they differ only where the frozen field switches
  Status status = Status::Alive;
  double t_escape = std::numeric_limits<double>::infinity();

  std::size_t size() const { return t.size(); }
};

/// Untruncated characteristic from x0 under a frozen field, sampled at
/// t_j = j * t / samples and, if it escapes, at the escape time.
Trajectory characteristic(const Point& x0, const FrozenField& field, const FlowConfig& cfg, double t, long samples);

/// C^2 radial retraction phi^b: identity for r <= b, quintic ramp to zero on [b, b + 2], zero beyond.
double retraction_radius(double r, double b);
Point retraction(const Point& x, double b);

/// Characteristic of v o phi^b; the velocity is bounded, so it never escapes.
Trajectory truncated_flow(const Point& x0, double b, const FrozenField& field, const FlowConfig& cfg, double t,
                          long samples);

struct EscapeTime {
  bool finite = false;  // false: bounded up to cfg.T
  double tau = std::numeric_limits<double>::infinity();
};

EscapeTime escape_time(const Point& x0, const FrozenField& field, const FlowConfig& cfg);

// ---------------------------------------------------------------------------
// Scheme

struct StepResult {
  Measure mu;
  MatrixXd v_start;  // 2d x N velocities at kh under field k (zero for escaped)
  MatrixXd v_end;    // 2d x N velocities at (k+1)h (or at escape) under field k
};

StepResult step_scheme_detailed(const Measure& mu_k, const Model& model, const FlowConfig& cfg, long k,
                                std::vector<double>* h_hint = nullptr);

Measure step_scheme(const Measure& mu_k, const Model& model, const FlowConfig& cfg, long k);

struct Frame {
  double t = 0;
  Measure mu;
  MatrixXd v_in;   // left-limit velocities (stacked [pdot; qdot] columns)
  MatrixXd v_out;  // right-limit velocities
};

struct Diagnostics {
  double t = 0;
  double mass = 0;
  double energy = 0;
  std::vector<MomentValue<double>> moments;
  Index n_escaped = 0;
  double max_p = 0;
  double max_q = 0;
};

struct EvolveOptions {
  std::vector<double> alphas;
  bool keep_frames = true;
};

struct RunRecord {
  FlowConfig cfg;
  std::vector<double> alphas;
  std::vector<Frame> frames;  // k = 0..n when kept
  std::vector<Diagnostics> series;
  bool aborted = false;
  std::string error;
  Index failed_particle = -1;

  const Measure& initial() const { return frames.front().mu; }
  const Measure& final_measure() const { return frames.back().mu; }
  /// Frame whose time is t up to 1e-9 T; throws std::out_of_range otherwise.
  const Frame& frame_at(double t) const;
  /// Particle i across the stored frames, with its escape sample if any.
  Trajectory trajectory(Index i) const;
};

RunRecord evolve(const Measure& mu0, const Model& model, const FlowConfig& cfg, const EvolveOptions& options = {});

Diagnostics diagnose(const Measure& mu, const Model& model, double eps, double t, const std::vector<double>& alphas);

} // namespace deficient
