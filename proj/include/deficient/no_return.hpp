#pragma once

// Single-particle no-return certificates: radial bounding potentials u with
// u'(r) >= B + max_{|q|=r} <grad Phi(q), q/|q|>, star rings of
// Upsilon(q) = u(|q|), the auxiliary Hamiltonian monitor, phase cylinders and
// escape-time bounds from the radial comparison dynamics r'' = -u'(r).

#include "deficient/deficient_flow.hpp"
#include "deficient/model.hpp"

#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace deficient {

/// u(r) = sum_i c_i r^{k_i}.
struct PolynomialProfile {
  std::vector<double> coefficients;
  std::vector<double> powers;
};

/// u(r) = A sin(w r) - s r.
struct SineLinearProfile {
  double amplitude = 1;
  double frequency = 1;
  double slope = 0.5;
};

class BoundingPotential {
public:
  using Profile = std::variant<PolynomialProfile, SineLinearProfile>;

  explicit BoundingPotential(Profile profile);

  static BoundingPotential polynomial(std::vector<double> coefficients, std::vector<double> powers);
  static BoundingPotential sine_linear(double amplitude, double frequency, double slope);
  /// u(r) = B r + Phi(r) for a radial power potential; satisfies the
  /// bounding condition with equality.
  static BoundingPotential matched(const Model& model);

  double value(double r) const;
  double derivative(double r) const;
  const Profile& profile() const { return profile_; }

private:
  Profile profile_;
};

std::vector<double> radial_grid(double r_max, double step);

struct BoundingReport {
  bool ok = true;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_radius = 0;
  std::vector<double> radii;
  std::vector<double> margins;
};

struct SphereOptions {
  Index samples = 2048;
  double safety = 1.05;  // non-radial maxima m are inflated to m + (safety - 1)|m|
};

/// max over |q| = r of <grad Phi(q), q/|q|>: exact for radial potentials, sampled otherwise.
double sphere_max_radial_force(const ExternalPotential<double>& phi, double r, const SphereOptions& opt = {});

/// Deterministic low-discrepancy unit vectors in R^d.
std::vector<VectorXd> sphere_points(Index d, Index count);

BoundingReport validate_bounding_potential(const BoundingPotential& u, const Model& model, double B,
                                           const std::vector<double>& grid, const SphereOptions& opt = {});

struct StarRing {
  double radius = 0;
  Index index = 0;
};

/// Grid radii r_j > 0 with u(r_j) > u(r_k) for every later grid radius r_k <= r_max.
std::vector<StarRing> find_star_rings(const BoundingPotential& u, const std::vector<double>& grid, double r_max,
                                      Index count);

/// Re-check of one ring on a uniform grid of the given step out to r_max.
bool verify_star_ring(const BoundingPotential& u, double radius, double r_max, double step);

class InsufficientSampling : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct MonitorCertificate {
  bool crossed = false;
  double t_star = std::numeric_limits<double>::quiet_NaN();
  double speed_star = 0;
  std::vector<double> times;         // samples after t_star
  std::vector<double> radial_speed;  // <p, q/|q|> at those samples
  std::vector<double> htilde;        // auxiliary Hamiltonian at t_star and those samples (when u given)
  bool monotone_ok = true;
  bool htilde_ok = true;
  bool reentered = false;
};

/// Hermite interpolation of a trajectory on [t_j, t_{j+1}] using the stored velocities.
Point hermite_state(const Trajectory& traj, std::size_t j, double t);

double radial_speed(const Point& x);

/// First outward crossing of |q| = ring radius and the behaviour after it.
/// Throws InsufficientSampling if samples are missing or farther apart than max_spacing.
MonitorCertificate no_return_monitor(const Trajectory& traj, const StarRing& ring,
                                     const BoundingPotential* u = nullptr,
                                     double max_spacing = std::numeric_limits<double>::infinity());

struct PhaseCylinder {
  double L_star = 0;
  double a_star = 0;
  double eta = 0;

  double momentum_radius(double t) const { return L_star + (a_star + eta) * t; }
  bool contains(const Point& x, double t) const { return x.p.norm() <= momentum_radius(t) && x.q.norm() <= L_star; }
};

/// sup_{|q| <= L*} |grad Phi| + B * mass.
double momentum_growth_rate(const Model& model, double L_star, double mass, const SphereOptions& opt = {});

struct CylinderViolation {
  Index particle = 0;
  double ring = 0;
  double t = 0;
  double p_norm = 0;
  double q_norm = 0;
};

struct CylinderAudit {
  std::vector<CylinderViolation> violations;
  Index checked = 0;
  Index position_exits = 0;
};

/// eta <= 0 selects the default 0.05 a*.
CylinderAudit cylinder_containment_audit(const RunRecord& record, const std::vector<StarRing>& rings, double a_star,
                                         double eta = 0);

class NoRingError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Star-ring test on a geometric grid from the radius to r_max.
bool is_star_ring(const BoundingPotential& u, double radius, double r_max, Index samples = 4096);

struct TauOptions {
  double speed_max = 1;    // initial radial speeds at the inner ring span [0, speed_max]
  Index speed_count = 11;
  double t_max = 1e4;      // comparison runs that have not reached x_max by then count as infinite
  double tol = 1e-10;
  double convergence_rtol = 1e-2;
};

struct TauEstimate {
  double tau = std::numeric_limits<double>::infinity();        // to x_max
  double tau_farther = std::numeric_limits<double>::infinity();  // to 10 x_max
  bool converged = false;  // tau insensitive to the numerical-infinity radius
};

/// Longest time, over radial comparison states launched outward at r = ell,
/// between crossing r = L and reaching r = x_max.
TauEstimate escape_bound_tau(const BoundingPotential& u, double L, double ell, double x_max,
                             const TauOptions& opt = {});

} // namespace deficient
