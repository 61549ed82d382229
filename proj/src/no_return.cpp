#include "deficient/no_return.hpp"

#include "deficient/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace deficient {

BoundingPotential::BoundingPotential(Profile profile) : profile_(std::move(profile)) {
  if (const auto* poly = std::get_if<PolynomialProfile>(&profile_)) {
    if (poly->coefficients.size() != poly->powers.size() || poly->coefficients.empty()) {
      throw std::invalid_argument("BoundingPotential: coefficients and powers must be nonempty and of equal length");
    }
    for (double k : poly->powers)
      if (!(k >= 0)) throw std::invalid_argument("BoundingPotential: powers must be >= 0");
  }
}

BoundingPotential BoundingPotential::polynomial(std::vector<double> coefficients, std::vector<double> powers) {
  return BoundingPotential(PolynomialProfile{std::move(coefficients), std::move(powers)});
}

BoundingPotential BoundingPotential::sine_linear(double amplitude, double frequency, double slope) {
  return BoundingPotential(SineLinearProfile{amplitude, frequency, slope});
}

BoundingPotential BoundingPotential::matched(const Model& model) {
  const auto* pw = std::get_if<PowerPotential<double>>(&model.potential.family());
  if (pw == nullptr) throw std::invalid_argument("BoundingPotential::matched: needs a radial power potential");
  return polynomial({model.kernel.bound(), pw->k2 / 2, pw->k4}, {1.0, 2.0, pw->gamma});
}

double BoundingPotential::value(double r) const {
  if (const auto* poly = std::get_if<PolynomialProfile>(&profile_)) {
    double u = 0;
    for (std::size_t i = 0; i < poly->powers.size(); ++i) u += poly->coefficients[i] * std::pow(r, poly->powers[i]);
    return u;
  }
  const auto& s = std::get<SineLinearProfile>(profile_);
  return s.amplitude * std::sin(s.frequency * r) - s.slope * r;
}

double BoundingPotential::derivative(double r) const {
  if (const auto* poly = std::get_if<PolynomialProfile>(&profile_)) {
    double du = 0;
    for (std::size_t i = 0; i < poly->powers.size(); ++i) {
      const double k = poly->powers[i];
      if (k == 0) continue;
      du += poly->coefficients[i] * k * std::pow(r, k - 1);
    }
    return du;
  }
  const auto& s = std::get<SineLinearProfile>(profile_);
  return s.amplitude * s.frequency * std::cos(s.frequency * r) - s.slope;
}

std::vector<double> radial_grid(double r_max, double step) {
  if (!(step > 0) || !(r_max >= 0)) throw std::invalid_argument("radial_grid: need step > 0 and r_max >= 0");
  std::vector<double> g;
  const long m = static_cast<long>(std::floor(r_max / step + 1e-9));
  for (long k = 0; k <= m; ++k) g.push_back(static_cast<double>(k) * step);
  return g;
}

// ---------------------------------------------------------------------------

namespace {

double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double f = 1, r = 0;
  while (i > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

std::uint64_t nth_prime(Index k) {
  static const std::uint64_t primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
  if (k < 20) return primes[k];
  std::uint64_t c = 73;
  Index found = 20;
  for (;; c += 2) {
    bool prime = true;
    for (std::uint64_t p = 3; p * p <= c; p += 2)
      if (c % p == 0) { prime = false; break; }
    if (prime && found++ == k) return c;
  }
}

} // namespace

std::vector<VectorXd> sphere_points(Index d, Index count) {
  std::vector<VectorXd> pts;
  if (d == 1) {
    pts.push_back(VectorXd::Constant(1, 1.0));
    pts.push_back(VectorXd::Constant(1, -1.0));
    return pts;
  }
  if (d == 2) {
    for (Index k = 0; k < count; ++k) {
      const double a = 2 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
      VectorXd u(2);
      u << std::cos(a), std::sin(a);
      pts.push_back(u);
    }
    return pts;
  }
  if (d == 3) {
    const double golden = std::numbers::pi * (3 - std::sqrt(5.0));
    for (Index k = 0; k < count; ++k) {
      const double z = 1 - 2 * (static_cast<double>(k) + 0.5) / static_cast<double>(count);
      const double rho = std::sqrt(std::max(0.0, 1 - z * z));
      const double a = golden * static_cast<double>(k);
      VectorXd u(3);
      u << rho * std::cos(a), rho * std::sin(a), z;
      pts.push_back(u);
    }
    return pts;
  }
  // Halton points in the cube, kept inside the ball and projected radially.
  for (std::uint64_t i = 1; static_cast<Index>(pts.size()) < count; ++i) {
    VectorXd v(d);
    for (Index k = 0; k < d; ++k) v[k] = 2 * radical_inverse(i, nth_prime(k)) - 1;
    const double n = v.norm();
    if (n > 1 || n < 1e-3) continue;
    pts.push_back(v / n);
  }
  return pts;
}

double sphere_max_radial_force(const ExternalPotential<double>& phi, double r, const SphereOptions& opt) {
  if (phi.radial()) return phi.radial_derivative(r);
  if (r == 0) return 0;
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& u : sphere_points(phi.dim(), opt.samples)) m = std::max(m, phi.gradient(VectorXd(r * u)).dot(u));
  return m + (opt.safety - 1) * std::abs(m);
}

BoundingReport validate_bounding_potential(const BoundingPotential& u, const Model& model, double B,
                                           const std::vector<double>& grid, const SphereOptions& opt) {
  BoundingReport rep;
  for (double r : grid) {
    const double du = u.derivative(r);
    const double m = sphere_max_radial_force(model.potential, r, opt);
    const double margin = du - B - m;
    rep.radii.push_back(r);
    rep.margins.push_back(margin);
    if (margin < rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst_radius = r;
    }
    if (margin < -1e-12 * std::max({1.0, std::abs(du), std::abs(m)})) rep.ok = false;
  }
  return rep;
}

std::vector<StarRing> find_star_rings(const BoundingPotential& u, const std::vector<double>& grid, double r_max,
                                      Index count) {
  if (count < 1) throw std::invalid_argument("find_star_rings: count must be >= 1");
  std::vector<double> radii;
  for (double r : grid)
    if (r <= r_max) radii.push_back(r);
  std::vector<StarRing> rings;
  if (radii.size() < 2) return rings;
  std::vector<double> vals(radii.size());
  for (std::size_t j = 0; j < radii.size(); ++j) vals[j] = u.value(radii[j]);
  std::vector<double> later_max(radii.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t j = radii.size() - 1; j-- > 0;) later_max[j] = std::max(later_max[j + 1], vals[j + 1]);
  for (std::size_t j = 0; j + 1 < radii.size() && static_cast<Index>(rings.size()) < count; ++j) {
    if (radii[j] > 0 && vals[j] > later_max[j]) rings.push_back({radii[j], static_cast<Index>(j)});
  }
  return rings;
}

bool verify_star_ring(const BoundingPotential& u, double radius, double r_max, double step) {
  const double u0 = u.value(radius);
  const long m = static_cast<long>(std::floor((r_max - radius) / step + 1e-9));
  for (long k = 1; k <= m; ++k)
    if (!(u.value(radius + static_cast<double>(k) * step) < u0)) return false;
  return radius > 0;
}

bool is_star_ring(const BoundingPotential& u, double radius, double r_max, Index samples) {
  if (!(radius > 0) || !(r_max > radius)) return false;
  const double u0 = u.value(radius);
  const double ratio = r_max / radius;
  for (Index k = 1; k <= samples; ++k) {
    const double r = radius * std::pow(ratio, static_cast<double>(k) / static_cast<double>(samples));
    if (!(u.value(r) < u0)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

Point hermite_state(const Trajectory& traj, std::size_t j, double t) {
  const double t0 = traj.t[j], t1 = traj.t[j + 1];
  const double dt = t1 - t0;
  const double th = (t - t0) / dt;
  const double th2 = th * th, th3 = th2 * th;
  const double h00 = 2 * th3 - 3 * th2 + 1, h10 = th3 - 2 * th2 + th, h01 = -2 * th3 + 3 * th2, h11 = th3 - th2;
  const Point& x0 = traj.x[j];
  const Point& x1 = traj.x[j + 1];
  const Point& v0 = traj.v_right[j];
  const Point& v1 = traj.v_left[j + 1];
  return {h00 * x0.p + h10 * dt * v0.p + h01 * x1.p + h11 * dt * v1.p,
          h00 * x0.q + h10 * dt * v0.q + h01 * x1.q + h11 * dt * v1.q};
}

double radial_speed(const Point& x) {
  const double r = x.q.norm();
  if (r == 0) return x.p.norm();
  return x.p.dot(x.q) / r;
}

namespace {

double htilde_value(const Point& x, const BoundingPotential& u) {
  const double s = radial_speed(x);
  return 0.5 * s * s + u.value(x.q.norm());
}

double htilde_scale(const Point& x, const BoundingPotential& u) {
  const double s = radial_speed(x);
  return 1 + 0.5 * s * s + std::abs(u.value(x.q.norm()));
}

} // namespace

MonitorCertificate no_return_monitor(const Trajectory& traj, const StarRing& ring, const BoundingPotential* u,
                                     double max_spacing) {
  const double rho = ring.radius;
  if (!(rho > 0)) throw std::invalid_argument("no_return_monitor: ring radius must be positive");
  if (traj.size() < 2) throw InsufficientSampling("no_return_monitor: fewer than two samples");
  for (std::size_t j = 0; j + 1 < traj.size(); ++j) {
    const double dt = traj.t[j + 1] - traj.t[j];
    if (!(dt > 0) || dt > max_spacing * (1 + 1e-12)) {
      throw InsufficientSampling("no_return_monitor: sample spacing " + std::to_string(dt) + " at t = " +
                                 std::to_string(traj.t[j]));
    }
  }

  MonitorCertificate cert;
  constexpr int kSub = 16;
  std::size_t cross_interval = 0;
  Point x_star;
  for (std::size_t j = 0; j + 1 < traj.size() && !cert.crossed; ++j) {
    double t_in = traj.t[j];
    if (traj.x[j].q.norm() >= rho) continue;
    for (int k = 1; k <= kSub && !cert.crossed; ++k) {
      const double tk = traj.t[j] + (traj.t[j + 1] - traj.t[j]) * k / kSub;
      const Point xk = k == kSub ? traj.x[j + 1] : hermite_state(traj, j, tk);
      if (xk.q.norm() < rho) {
        t_in = tk;
        continue;
      }
      double lo = t_in, hi = tk;
      for (int it = 0; it < 100 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (hermite_state(traj, j, mid).q.norm() < rho) lo = mid; else hi = mid;
      }
      const Point xs = hermite_state(traj, j, hi);
      const double s = radial_speed(xs);
      if (s > 0) {
        cert.crossed = true;
        cert.t_star = hi;
        cert.speed_star = s;
        x_star = xs;
        cross_interval = j;
      }
      break;  // a tangential touch: resume from the next sample
    }
  }
  if (!cert.crossed) return cert;

  const double tol = 1e-6 * (1 + std::abs(cert.speed_star));
  double h_prev = 0, h_scale_prev = 0;
  if (u) {
    h_prev = htilde_value(x_star, *u);
    h_scale_prev = htilde_scale(x_star, *u);
    cert.htilde.push_back(h_prev);
  }
  for (std::size_t j = cross_interval + 1; j < traj.size(); ++j) {
    const Point& x = traj.x[j];
    const double s = radial_speed(x);
    cert.times.push_back(traj.t[j]);
    cert.radial_speed.push_back(s);
    if (s < cert.speed_star - tol) cert.monotone_ok = false;
    if (x.q.norm() < rho * (1 - 1e-12)) cert.reentered = true;
    if (u) {
      const double h = htilde_value(x, *u);
      const double scale = std::max(h_scale_prev, htilde_scale(x, *u));
      if (h < h_prev - 1e-6 * scale) cert.htilde_ok = false;
      cert.htilde.push_back(h);
      h_prev = h;
      h_scale_prev = htilde_scale(x, *u);
    }
  }
  return cert;
}

// ---------------------------------------------------------------------------

double momentum_growth_rate(const Model& model, double L_star, double mass, const SphereOptions& opt) {
  if (!(L_star > 0)) throw std::invalid_argument("momentum_growth_rate: L* must be positive");
  const auto& phi = model.potential;
  double sup = 0;
  if (phi.radial()) {
    constexpr int kGrid = 4096;
    for (int k = 0; k <= kGrid; ++k) {
      const double r = L_star * k / kGrid;
      sup = std::max(sup, std::abs(phi.radial_derivative(r)));
    }
  } else {
    constexpr int kRadii = 256;
    const auto dirs = sphere_points(phi.dim(), opt.samples);
    for (int k = 0; k <= kRadii; ++k) {
      const double r = L_star * k / kRadii;
      for (const auto& u : dirs) sup = std::max(sup, phi.gradient(VectorXd(r * u)).norm());
    }
    sup *= opt.safety;
  }
  return sup + model.kernel.bound() * mass;
}

CylinderAudit cylinder_containment_audit(const RunRecord& record, const std::vector<StarRing>& rings, double a_star,
                                         double eta) {
  if (eta <= 0) eta = 0.05 * a_star;
  CylinderAudit audit;
  if (record.frames.empty()) return audit;
  const Index N = record.frames.front().mu.size();
  constexpr int kSub = 32;
  for (Index i = 0; i < N; ++i) {
    const Trajectory traj = record.trajectory(i);
    if (traj.size() == 0) continue;
    for (const auto& ring : rings) {
      const PhaseCylinder cyl{ring.radius, a_star, eta};
      if (!cyl.contains(traj.x[0], traj.t[0])) continue;
      ++audit.checked;
      for (std::size_t j = 0; j + 1 < traj.size(); ++j) {
        if (cyl.contains(traj.x[j + 1], traj.t[j + 1])) continue;
        // Outside at the next sample: find which face is left first.
        for (int k = 1; k <= kSub; ++k) {
          const double tk = traj.t[j] + (traj.t[j + 1] - traj.t[j]) * k / kSub;
          const Point xk = k == kSub ? traj.x[j + 1] : hermite_state(traj, j, tk);
          if (xk.q.norm() > ring.radius) {
            ++audit.position_exits;
            break;
          }
          if (xk.p.norm() > cyl.momentum_radius(tk)) {
            audit.violations.push_back({i, ring.radius, tk, xk.p.norm(), xk.q.norm()});
            break;
          }
        }
        break;
      }
    }
  }
  return audit;
}

// ---------------------------------------------------------------------------

TauEstimate escape_bound_tau(const BoundingPotential& u, double L, double ell, double x_max, const TauOptions& opt) {
  if (!(ell > 0) || !(ell < L)) throw std::invalid_argument("escape_bound_tau: need 0 < ell < L");
  if (!(x_max > L)) throw std::invalid_argument("escape_bound_tau: x_max must exceed L");
  const double far = 10 * x_max;
  if (!is_star_ring(u, L, far)) throw NoRingError("escape_bound_tau: L = " + std::to_string(L) + " is not a star ring");
  if (!is_star_ring(u, ell, far)) throw NoRingError("escape_bound_tau: ell = " + std::to_string(ell) + " is not a star ring");

  TauEstimate est;
  est.tau = 0;
  est.tau_farther = 0;
  bool any = false;
  Dp5Options dopt;
  dopt.rtol = opt.tol;
  dopt.atol = opt.tol;
  auto rhs = [&](double, const VectorXd& y) {
    VectorXd f(2);
    f << y[1], -u.derivative(y[0]);
    return f;
  };
  for (Index k = 0; k < opt.speed_count; ++k) {
    const double s0 = opt.speed_count == 1 ? 0.0 : opt.speed_max * static_cast<double>(k) / static_cast<double>(opt.speed_count - 1);
    const double levels[3] = {L, x_max, far};
    double hits[3] = {-1, -1, -1};
    int next = 0;
    VectorXd y0(2);
    y0 << ell, s0;
    auto on_step = [&](const DenseSegment<double>& seg, const VectorXd& y1, const VectorXd&) {
      while (next < 3 && y1[0] >= levels[next]) {
        double lo = seg.t0, hi = seg.t1();
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
          const double mid = 0.5 * (lo + hi);
          if (seg(mid)[0] >= levels[next]) hi = mid; else lo = mid;
        }
        hits[next++] = hi;
      }
      return next < 3;
    };
    dp5_integrate<double>(rhs, 0.0, y0, opt.t_max, dopt, on_step);
    if (hits[0] < 0) continue;  // never leaves B_L
    any = true;
    est.tau = std::max(est.tau, hits[1] < 0 ? std::numeric_limits<double>::infinity() : hits[1] - hits[0]);
    est.tau_farther =
        std::max(est.tau_farther, hits[2] < 0 ? std::numeric_limits<double>::infinity() : hits[2] - hits[0]);
  }
  if (!any) {
    est.tau = est.tau_farther = std::numeric_limits<double>::infinity();
    return est;
  }
  est.converged = std::isfinite(est.tau) && std::isfinite(est.tau_farther) &&
                  est.tau_farther - est.tau <= opt.convergence_rtol * est.tau;
  return est;
}

} // namespace deficient
