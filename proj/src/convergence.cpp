#include "deficient/convergence.hpp"

#include "deficient/parallel.hpp"
#include "deficient/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace deficient {

void SweepPlan::validate(double T) const {
  if (epsilons.empty()) throw std::invalid_argument("flow.epsilons: must be nonempty");
  for (std::size_t k = 0; k < epsilons.size(); ++k) {
    if (!(epsilons[k] >= 0)) throw std::invalid_argument("flow.epsilons: entries must be >= 0");
    if (k > 0 && !(epsilons[k] < epsilons[k - 1])) throw std::invalid_argument("flow.epsilons: not strictly decreasing");
  }
  if (ns.empty()) throw std::invalid_argument("flow.ns: must be nonempty");
  for (std::size_t k = 0; k < ns.size(); ++k) {
    if (ns[k] < 1) throw std::invalid_argument("flow.ns: entries must be >= 1");
    if (k > 0 && !(ns[k] > ns[k - 1])) throw std::invalid_argument("flow.ns: not strictly increasing");
  }
  for (std::size_t k = 0; k < probe_times.size(); ++k) {
    if (!(probe_times[k] > 0) || probe_times[k] > T * (1 + 1e-12)) {
      throw std::invalid_argument("probes.times: entries must lie in (0, T]");
    }
    if (k > 0 && !(probe_times[k] > probe_times[k - 1])) throw std::invalid_argument("probes.times: not strictly increasing");
    const double steps = probe_times[k] * static_cast<double>(ns.back()) / T;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
      throw std::invalid_argument("probes.times: " + std::to_string(probe_times[k]) + " is not a grid time");
    }
  }
}

namespace {

const Diagnostics& series_at(const RunRecord& run, double t) {
  for (const auto& g : run.series)
    if (std::abs(g.t - t) <= 1e-9 * run.cfg.T) return g;
  throw std::out_of_range("probe time " + std::to_string(t) + " is not a grid time of the run");
}

} // namespace

MassReport mass_report(const std::vector<double>& epsilons, const std::vector<double>& times,
                       const std::vector<RunRecord>& runs) {
  if (epsilons.size() != runs.size()) throw std::invalid_argument("mass_report: one run per epsilon required");
  MassReport rep;
  rep.epsilons = epsilons;
  rep.times = times;
  const auto m = static_cast<Index>(epsilons.size());
  const auto nt = static_cast<Index>(times.size());
  rep.mass.resize(nt, m);
  for (Index k = 0; k < m; ++k)
    for (Index j = 0; j < nt; ++j) rep.mass(j, k) = series_at(runs[static_cast<std::size_t>(k)], times[static_cast<std::size_t>(j)]).mass;

  for (Index j = 0; j < nt; ++j) {
    if (m >= 2) {
      const double ea = epsilons[static_cast<std::size_t>(m - 2)], eb = epsilons[static_cast<std::size_t>(m - 1)];
      const double Ma = rep.mass(j, m - 2), Mb = rep.mass(j, m - 1);
      rep.limit.push_back((ea * Mb - eb * Ma) / (ea - eb));
      rep.error.push_back(std::abs(Mb - Ma));
    } else {
      rep.limit.push_back(rep.mass(j, 0));
      rep.error.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    bool shrinking = true;
    for (Index k = 0; k + 2 < m; ++k) {
      const double d0 = std::abs(rep.mass(j, k) - rep.mass(j, k + 1));
      const double d1 = std::abs(rep.mass(j, k + 1) - rep.mass(j, k + 2));
      if (!(d1 < d0 || (d1 == 0 && d0 == 0))) shrinking = false;
    }
    rep.shrinking.push_back(shrinking);
  }
  for (Index k = 0; k < m; ++k) {
    bool mono = true;
    const auto& s = runs[static_cast<std::size_t>(k)].series;
    for (std::size_t i = 1; i < s.size(); ++i)
      if (s[i].mass > s[i - 1].mass) mono = false;
    rep.monotone_in_time.push_back(mono);
  }
  return rep;
}

MassReport epsilon_sweep(const Measure& mu0, const Model& model, const FlowConfig& base, const SweepPlan& plan,
                         int jobs, std::vector<RunRecord>* runs_out, bool keep_frames) {
  plan.validate(base.T);
  std::vector<RunRecord> runs(plan.epsilons.size());
  std::vector<std::string> errors(plan.epsilons.size());
  parallel_for(static_cast<long>(plan.epsilons.size()), jobs, [&](long k) {
    FlowConfig cfg = base;
    cfg.eps = plan.epsilons[static_cast<std::size_t>(k)];
    cfg.n = plan.ns.back();
    if (jobs > 1) cfg.threads = 1;
    runs[static_cast<std::size_t>(k)] = evolve(mu0, model, cfg, EvolveOptions{{}, keep_frames});
    if (runs[static_cast<std::size_t>(k)].aborted) errors[static_cast<std::size_t>(k)] = runs[static_cast<std::size_t>(k)].error;
  });
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!errors[k].empty()) {
      throw std::runtime_error("epsilon_sweep: run at eps = " + std::to_string(plan.epsilons[k]) + " failed: " + errors[k]);
    }
  }
  MassReport rep = mass_report(plan.epsilons, plan.probe_times, runs);
  if (runs_out) *runs_out = std::move(runs);
  return rep;
}

MonotonicityAudit limit_mass_monotonicity(const MassReport& report, double factor) {
  MonotonicityAudit audit;
  for (std::size_t j = 0; j + 1 < report.limit.size(); ++j) {
    double err = std::max(report.error[j], report.error[j + 1]);
    if (!std::isfinite(err)) err = 0;
    const double allowance = factor * err;
    const double increase = report.limit[j + 1] - report.limit[j];
    const double slack = allowance - increase;
    audit.slack.push_back(slack);
    if (slack < 0 && audit.ok) {
      audit.ok = false;
      audit.first_failure = static_cast<long>(j);
    }
  }
  return audit;
}

// ---------------------------------------------------------------------------

double representation_check(const RunRecord& record, const Model& model,
                            const std::vector<SpatialBump<double>>& battery, double t, RepresentationMode mode,
                            double tighten) {
  const double eps = record.cfg.eps;
  const Frame& frame = record.frame_at(t);
  const Measure& mu0 = record.frames.front().mu;
  const Measure& mut = frame.mu;
  const Index N = mu0.size();

  std::vector<Point> states(static_cast<std::size_t>(N));
  std::vector<double> S(static_cast<std::size_t>(N));
  std::vector<bool> alive(static_cast<std::size_t>(N));
  if (mode == RepresentationMode::Bookkeeping) {
    for (Index i = 0; i < N; ++i) {
      alive[static_cast<std::size_t>(i)] = mut.alive(i);
      if (!mut.alive(i)) continue;
      states[static_cast<std::size_t>(i)] = mut.point(i);
      S[static_cast<std::size_t>(i)] = mut.S(i);
    }
  } else {
    FlowConfig cfg = record.cfg;
    cfg.ode_tol = record.cfg.ode_tol * tighten;
    for (Index i = 0; i < N; ++i) {
      alive[static_cast<std::size_t>(i)] = mu0.alive(i);
      states[static_cast<std::size_t>(i)] = mu0.point(i);
      S[static_cast<std::size_t>(i)] = mu0.S(i);
    }
    for (std::size_t k = 0; k + 1 < record.frames.size() && record.frames[k].t < frame.t - 1e-12 * record.cfg.T; ++k) {
      const FrozenField field(model, record.frames[k].mu, eps);
      const double dt = record.frames[k + 1].t - record.frames[k].t;
      parallel_for(N, cfg.threads, [&](long i) {
        const auto s = static_cast<std::size_t>(i);
        if (!alive[s]) return;
        const auto r = advance_particle(states[s], S[s], field, dt, cfg);
        states[s] = r.x;
        S[s] = r.S;
        if (r.status == Status::Escaped) alive[s] = false;
      });
    }
  }

  double worst = 0;
  for (const auto& phi : battery) {
    std::vector<double> terms(static_cast<std::size_t>(N), 0.0);
    for (Index i = 0; i < N; ++i) {
      const auto s = static_cast<std::size_t>(i);
      if (!alive[s]) continue;
      terms[s] = mu0.w0(i) * std::exp(-eps * S[s]) * phi(states[s].p, states[s].q);
    }
    const double pulled_back = pairwise_sum(std::span<const double>(terms));
    const double direct = integrate(mut, phi, eps);
    worst = std::max(worst, std::abs(pulled_back - direct));
  }
  return worst;
}

double TimeWindow::operator()(double t) const {
  if (t <= t_a || t >= t_b) return 0;
  const double s = std::sin(std::numbers::pi * (t - t_a) / (t_b - t_a));
  return s * s;
}

double TimeWindow::derivative(double t) const {
  if (t <= t_a || t >= t_b) return 0;
  const double w = std::numbers::pi / (t_b - t_a);
  return w * std::sin(2 * w * (t - t_a));
}

double weak_residual(const RunRecord& record, const SpatialBump<double>& phi, const TimeWindow& window) {
  if (!(window.t_b > window.t_a)) throw std::invalid_argument("weak_residual: empty time window");
  const auto& frames = record.frames;
  long inside = 0;
  for (const auto& f : frames)
    if (f.t > window.t_a && f.t < window.t_b) ++inside;
  if (inside < 20) throw std::invalid_argument("weak_residual: fewer than 20 grid samples inside the time window");
  const double eps = record.cfg.eps;
  const Index d = frames.front().mu.dim();

  auto J = [&](const Frame& f, bool right) {
    const double chi = window(f.t), dchi = window.derivative(f.t);
    if (chi == 0 && dchi == 0) return 0.0;
    const MatrixXd& V = right ? f.v_out : f.v_in;
    return reduce_particles(f.mu, [&](Index i) -> double {
      const double w = f.mu.weight(i, eps);
      if (w == 0) return 0.0;
      const auto p = f.mu.p(i);
      const auto q = f.mu.q(i);
      const double val = phi(p, q);
      if (val == 0) return 0.0;
      const Point g = phi.gradient(p, q);
      const auto v = V.col(i);
      const double transport = v.head(d).dot(g.p) + v.tail(d).dot(g.q);
      return w * (dchi * val + chi * (transport - eps * v.norm() * val));
    });
  };

  double total = 0;
  for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
    const double dt = frames[k + 1].t - frames[k].t;
    total += 0.5 * dt * (J(frames[k], true) + J(frames[k + 1], false));
  }
  return std::abs(total);
}

std::vector<SpatialBump<double>> bump_battery(Index d, Index count, double radius, double spread, std::uint64_t seed) {
  CounterRng rng(seed, 7);
  std::vector<SpatialBump<double>> battery;
  for (Index k = 0; k < count; ++k) {
    VectorXd p(d), q(d);
    for (Index j = 0; j < d; ++j) p[j] = spread * rng.normal();
    for (Index j = 0; j < d; ++j) q[j] = spread * rng.normal();
    battery.emplace_back(Point(std::move(p), std::move(q)), radius);
  }
  return battery;
}

// ---------------------------------------------------------------------------

ClosenessReport paired_deviation(const RunRecord& coarse, const RunRecord& fine, double L, double t) {
  if (fine.cfg.n % coarse.cfg.n != 0 || std::abs(fine.cfg.T - coarse.cfg.T) > 1e-12 * coarse.cfg.T) {
    throw std::invalid_argument("paired_deviation: fine n must be a multiple of coarse n over the same horizon");
  }
  const Measure& m0 = coarse.frames.front().mu;
  const Index N = m0.size();
  if (fine.frames.front().mu.size() != N) throw std::invalid_argument("paired_deviation: runs differ in particle count");
  const double tcut = t + 1e-9 * coarse.cfg.T;
  ClosenessReport rep;
  for (Index i = 0; i < N; ++i) {
    bool in_ball = true;
    for (const auto& f : fine.frames) {
      if (f.t > tcut) break;
      if (!f.mu.alive(i) || f.mu.point(i).norm() > L) {
        in_ball = false;
        break;
      }
    }
    if (!in_ball) continue;
    ++rep.cohort;
    for (const auto& f : coarse.frames) {
      if (f.t > tcut) break;
      const Frame& g = fine.frame_at(f.t);
      double dev = std::numeric_limits<double>::infinity();
      if (f.mu.alive(i)) {
        const Point a = f.mu.point(i), b = g.mu.point(i);
        dev = std::sqrt((a.p - b.p).squaredNorm() + (a.q - b.q).squaredNorm());
      }
      rep.deviation = std::max(rep.deviation, dev);
    }
  }
  rep.empty = rep.cohort == 0;
  if (rep.empty) rep.deviation = 0;
  return rep;
}

ClosenessReport trajectory_closeness(const Measure& mu0, const Model& model, const FlowConfig& base, long n1, long n2,
                                     double L, double t) {
  if (!(n1 < n2)) throw std::invalid_argument("trajectory_closeness: need n1 < n2");
  FlowConfig c1 = base, c2 = base;
  c1.n = n1;
  c2.n = n2;
  const RunRecord r1 = evolve(mu0, model, c1);
  const RunRecord r2 = evolve(mu0, model, c2);
  return paired_deviation(r1, r2, L, t);
}

double mass_in_phase_ball(const Measure& mu, double L, double eps) {
  return reduce_particles(mu, [&](Index i) -> double {
    if (!mu.alive(i) || mu.point(i).norm() > L) return 0.0;
    return mu.weight(i, eps);
  });
}

} // namespace deficient
