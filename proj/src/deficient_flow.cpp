#include "deficient/deficient_flow.hpp"

#include "deficient/integrator.hpp"
#include "deficient/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace deficient {

void FlowConfig::validate() const {
  if (!(eps >= 0) || !std::isfinite(eps)) throw std::invalid_argument("flow.epsilon: must be finite and >= 0");
  if (!(T > 0) || !std::isfinite(T)) throw std::invalid_argument("flow.T: must be finite and > 0");
  if (n < 1) throw std::invalid_argument("flow.n: must be >= 1");
  if (!(ode_tol > 0)) throw std::invalid_argument("flow.ode_tol: must be > 0");
  if (!(x_max > 0)) throw std::invalid_argument("flow.x_max: must be > 0");
  if (h_min < 0) throw std::invalid_argument("flow.h_min: must be >= 0");
  if (!(h() > min_step())) throw std::invalid_argument("flow.h_min: step T/n must exceed h_min");
}

FrozenField::FrozenField(const Model& model, const Measure& snapshot, double eps) : model_(model) {
  if (snapshot.dim() != model.dim()) throw std::invalid_argument("FrozenField: dimension mismatch");
  if (!model.kernel.is_zero()) field_.emplace(model.kernel, snapshot, eps);
}

FrozenField FrozenField::selfless(const Model& model) { return FrozenField(model); }

Point FrozenField::velocity(const Point& x) const {
  VectorXd pdot = -model_.potential.gradient(x.q);
  if (field_) pdot -= field_->gradient(x.q);
  return {std::move(pdot), x.p};
}

VectorXd FrozenField::velocity_stacked(const VectorXd& x) const {
  const Index d = model_.dim();
  VectorXd v(2 * d);
  const auto q = x.segment(d, d);
  v.head(d) = -model_.potential.gradient(q);
  if (field_) v.head(d) -= field_->gradient(q);
  v.tail(d) = x.head(d);
  return v;
}

namespace {

struct CharacteristicEnd {
  VectorXd x;  // stacked [p; q]
  double S = 0;
  Status status = Status::Alive;
  double t_end = 0;
  double t_escape = std::numeric_limits<double>::infinity();
  double h_next = 0;
};

double phase_norm(const VectorXd& y, Index d) { return y.head(2 * d).norm(); }

// vel maps a stacked phase point to its stacked velocity. sample(seg, t_stop)
// is offered every accepted segment, truncated at the escape time.
template <typename Velocity, typename Sample>
CharacteristicEnd integrate_characteristic(Velocity&& vel, const Point& x0, double S0, double t0, double t1,
                                           const FlowConfig& cfg, double h_init, bool allow_escape,
                                           Sample&& sample) {
  const Index d = x0.dim();
  VectorXd y0(2 * d + 1);
  y0 << x0.p, x0.q, S0;
  auto rhs = [&](double, const VectorXd& y) {
    VectorXd f(2 * d + 1);
    f.head(2 * d) = vel(y);
    f[2 * d] = f.head(2 * d).norm();
    return f;
  };

  Dp5Options opt;
  opt.rtol = cfg.ode_tol;
  opt.atol = cfg.ode_tol;
  opt.h_min = cfg.min_step();
  opt.h_init = h_init;

  CharacteristicEnd end;
  double speed = -1, prev_speed = -1;
  bool escaped = false;
  double t_escape = 0;
  VectorXd y_escape;
  auto on_step = [&](const DenseSegment<double>& seg, const VectorXd& y1, const VectorXd& f1) {
    prev_speed = speed;
    speed = f1.head(2 * d).norm();
    double t_stop = seg.t1();
    if (allow_escape && phase_norm(y1, d) > cfg.x_max) {
      double lo = seg.t0, hi = seg.t1();
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (phase_norm(seg(mid), d) > cfg.x_max) hi = mid; else lo = mid;
      }
      escaped = true;
      t_stop = t_escape = hi;
      y_escape = seg(hi);
    }
    sample(seg, t_stop, escaped ? y_escape : y1);
    return !escaped;
  };

  const auto res = dp5_integrate<double>(rhs, t0, std::move(y0), t1, opt, on_step);
  end.h_next = res.h_next;
  if (escaped) {
    end.x = y_escape.head(2 * d);
    end.S = std::max(S0, y_escape[2 * d]);
    end.status = Status::Escaped;
    end.t_end = end.t_escape = t_escape;
    return end;
  }
  switch (res.outcome) {
    case Dp5Outcome::NonFinite:
      throw NonFiniteError("velocity field returned a non-finite value");
    case Dp5Outcome::StepCollapse:
      if (allow_escape && speed > prev_speed && prev_speed >= 0) {
        end.x = res.y.head(2 * d);
        end.S = std::max(S0, res.y[2 * d]);
        end.status = Status::Escaped;
        end.t_end = end.t_escape = res.t;
        return end;
      }
      throw NonFiniteError("adaptive step collapsed below h_min without growing speed");
    default:
      break;
  }
  end.x = res.y.head(2 * d);
  end.S = std::max(S0, res.y[2 * d]);
  end.t_end = res.t;
  return end;
}

Point to_point(const VectorXd& y, Index d) { return {y.head(d), y.segment(d, d)}; }

// Collects samples at fixed times from the dense output.
class UniformSampler {
public:
  UniformSampler(std::vector<double> times, Index d) : times_(std::move(times)), d_(d) {}

  void operator()(const DenseSegment<double>& seg, double t_stop, const VectorXd& y_stop) {
    while (next_ < times_.size() && times_[next_] <= t_stop) {
      const double tj = times_[next_++];
      const VectorXd y = tj == t_stop ? y_stop : seg(tj);
      states_.push_back(y);
    }
  }

  void seed(const VectorXd& y0) {
    states_.push_back(y0);
    next_ = 1;
  }

  const std::vector<double>& times() const { return times_; }
  const std::vector<VectorXd>& states() const { return states_; }

private:
  std::vector<double> times_;
  Index d_;
  std::size_t next_ = 0;
  std::vector<VectorXd> states_;
};

std::vector<double> uniform_times(double t, long samples) {
  if (samples < 1) throw std::invalid_argument("trajectory: samples must be >= 1");
  std::vector<double> ts(static_cast<std::size_t>(samples) + 1);
  for (long j = 0; j <= samples; ++j) ts[static_cast<std::size_t>(j)] = t * static_cast<double>(j) / static_cast<double>(samples);
  return ts;
}

template <typename Velocity>
Trajectory sampled_characteristic(Velocity&& vel, const Point& x0, const FlowConfig& cfg, double t, long samples,
                                  bool allow_escape) {
  const Index d = x0.dim();
  UniformSampler sampler(uniform_times(t, samples), d);
  VectorXd y0(2 * d + 1);
  y0 << x0.p, x0.q, 0.0;
  sampler.seed(y0);
  const auto end = integrate_characteristic(vel, x0, 0.0, 0.0, t, cfg, 0.0, allow_escape, sampler);

  Trajectory traj;
  traj.status = end.status;
  traj.t_escape = end.t_escape;
  double S_run = 0;
  auto push = [&](double tj, const VectorXd& y) {
    const Point x = to_point(y, d);
    const VectorXd v = vel(VectorXd(y.head(2 * d)));
    S_run = std::max(S_run, y[2 * d]);
    traj.t.push_back(tj);
    traj.x.push_back(x);
    traj.S.push_back(S_run);
    traj.v_left.push_back(to_point(v, d));
    traj.v_right.push_back(traj.v_left.back());
  };
  for (std::size_t j = 0; j < sampler.states().size(); ++j) push(sampler.times()[j], sampler.states()[j]);
  if (end.status == Status::Escaped && (traj.t.empty() || end.t_escape > traj.t.back())) {
    VectorXd y(2 * d + 1);
    y << end.x, end.S;
    push(end.t_escape, y);
  }
  return traj;
}

struct NoSample {
  void operator()(const DenseSegment<double>&, double, const VectorXd&) const {}
};

} // namespace

AdvanceResult advance_particle(const Point& x0, double S0, const FrozenField& field, double dt,
                               const FlowConfig& cfg, double h_init) {
  if (!x0.all_finite()) throw NonFiniteError("advance_particle: non-finite initial state");
  if (!(dt >= 0)) throw std::invalid_argument("advance_particle: dt must be >= 0");
  const Index d = x0.dim();
  auto vel = [&](const VectorXd& y) { return field.velocity_stacked(y); };
  const auto end = integrate_characteristic(vel, x0, S0, 0.0, dt, cfg, h_init, true, NoSample{});
  AdvanceResult r;
  r.x = to_point(end.x, d);
  r.S = end.S;
  r.status = end.status;
  r.t_escape = end.t_escape;
  r.v_end = field.velocity(r.x);
  r.h_next = end.h_next;
  return r;
}

Trajectory characteristic(const Point& x0, const FrozenField& field, const FlowConfig& cfg, double t, long samples) {
  auto vel = [&](const VectorXd& y) { return field.velocity_stacked(y); };
  return sampled_characteristic(vel, x0, cfg, t, samples, true);
}

double retraction_radius(double r, double b) {
  if (r <= b) return r;
  if (r >= b + 2) return 0;
  const double s = (r - b) / 2;
  const double s2 = s * s, s3 = s2 * s;
  const double h0 = 1 - 10 * s3 + 15 * s3 * s - 6 * s3 * s2;
  const double h1 = s - 6 * s3 + 8 * s3 * s - 3 * s3 * s2;
  return b * h0 + 2 * h1;
}

Point retraction(const Point& x, double b) {
  if (!(b > 0)) throw std::invalid_argument("retraction: b must be > 0");
  const double r = x.norm();
  if (r <= b) return x;
  const double scale = retraction_radius(r, b) / r;
  return {scale * x.p, scale * x.q};
}

Trajectory truncated_flow(const Point& x0, double b, const FrozenField& field, const FlowConfig& cfg, double t,
                          long samples) {
  if (!(b > 0)) throw std::invalid_argument("truncated_flow: b must be > 0");
  const Index d = x0.dim();
  auto vel = [&](const VectorXd& y) {
    const Point x = retraction(to_point(y, d), b);
    return field.velocity(x).stacked();
  };
  return sampled_characteristic(vel, x0, cfg, t, samples, false);
}

EscapeTime escape_time(const Point& x0, const FrozenField& field, const FlowConfig& cfg) {
  auto vel = [&](const VectorXd& y) { return field.velocity_stacked(y); };
  const auto end = integrate_characteristic(vel, x0, 0.0, 0.0, cfg.T, cfg, 0.0, true, NoSample{});
  if (end.status == Status::Escaped) return {true, end.t_escape};
  return {};
}

// ---------------------------------------------------------------------------

StepResult step_scheme_detailed(const Measure& mu_k, const Model& model, const FlowConfig& cfg, long k,
                                std::vector<double>* h_hint) {
  const Index d = mu_k.dim();
  const Index N = mu_k.size();
  const double t0 = cfg.T * static_cast<double>(k) / static_cast<double>(cfg.n);
  const double t1 = cfg.T * static_cast<double>(k + 1) / static_cast<double>(cfg.n);
  const FrozenField field(model, mu_k, cfg.eps);

  StepResult out{mu_k, MatrixXd::Zero(2 * d, N), MatrixXd::Zero(2 * d, N)};
  std::vector<AdvanceResult> results(static_cast<std::size_t>(N));
  std::vector<std::string> errors(static_cast<std::size_t>(N));
  parallel_for(N, cfg.threads, [&](long i) {
    if (!mu_k.alive(i)) return;
    const Point x0 = mu_k.point(i);
    out.v_start.col(i) = field.velocity(x0).stacked();
    const double hint = h_hint ? (*h_hint)[static_cast<std::size_t>(i)] : 0.0;
    try {
      results[static_cast<std::size_t>(i)] = advance_particle(x0, mu_k.S(i), field, t1 - t0, cfg, hint);
    } catch (const NonFiniteError& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  });
  for (Index i = 0; i < N; ++i) {
    if (!errors[static_cast<std::size_t>(i)].empty()) {
      throw NonFiniteError("particle " + std::to_string(i) + ": " + errors[static_cast<std::size_t>(i)], i);
    }
    if (!mu_k.alive(i)) continue;
    const auto& r = results[static_cast<std::size_t>(i)];
    out.v_end.col(i) = r.v_end.stacked();
    if (h_hint) (*h_hint)[static_cast<std::size_t>(i)] = r.h_next;
    if (r.status == Status::Escaped) {
      out.mu.mark_escaped(i, t0 + r.t_escape, r.x, r.S);
    } else {
      out.mu.set_state(i, r.x, r.S);
    }
  }
  return out;
}

Measure step_scheme(const Measure& mu_k, const Model& model, const FlowConfig& cfg, long k) {
  return step_scheme_detailed(mu_k, model, cfg, k).mu;
}

const Frame& RunRecord::frame_at(double t) const {
  for (const auto& f : frames)
    if (std::abs(f.t - t) <= 1e-9 * cfg.T) return f;
  throw std::out_of_range("RunRecord: time " + std::to_string(t) + " is not a stored grid time");
}

Trajectory RunRecord::trajectory(Index i) const {
  Trajectory traj;
  if (frames.empty()) return traj;
  const Index d = frames.front().mu.dim();
  for (const auto& f : frames) {
    const Point vin = to_point(f.v_in.col(i), d);
    if (f.mu.alive(i)) {
      traj.t.push_back(f.t);
      traj.x.push_back(f.mu.point(i));
      traj.S.push_back(f.mu.S(i));
      traj.v_left.push_back(vin);
      traj.v_right.push_back(to_point(f.v_out.col(i), d));
      continue;
    }
    traj.status = Status::Escaped;
    traj.t_escape = f.mu.t_escape(i);
    if (traj.t.empty() || traj.t_escape > traj.t.back()) {
      traj.t.push_back(traj.t_escape);
      traj.x.push_back(f.mu.point(i));
      traj.S.push_back(f.mu.S(i));
      traj.v_left.push_back(vin);
      traj.v_right.push_back(vin);
    }
    break;
  }
  return traj;
}

Diagnostics diagnose(const Measure& mu, const Model& model, double eps, double t, const std::vector<double>& alphas) {
  Diagnostics g;
  g.t = t;
  g.mass = total_mass(mu, eps);
  g.energy = hamiltonian_energy(model, mu, eps);
  for (double a : alphas) g.moments.push_back(exp_moment(mu, a, eps));
  g.n_escaped = mu.count_escaped();
  g.max_p = max_momentum_norm(mu);
  g.max_q = max_position_norm(mu);
  return g;
}

RunRecord evolve(const Measure& mu0, const Model& model, const FlowConfig& cfg, const EvolveOptions& options) {
  cfg.validate();
  if (mu0.dim() != model.dim()) throw std::invalid_argument("evolve: dimension mismatch between measure and model");
  if (std::abs(total_mass(mu0, 0.0) - 1.0) > 1e-9) throw std::invalid_argument("evolve: initial mass must be 1");

  RunRecord rec;
  rec.cfg = cfg;
  rec.alphas = options.alphas;
  const Index d = mu0.dim();
  const Index N = mu0.size();
  std::vector<double> hint(static_cast<std::size_t>(N), 0.0);

  Frame current{0.0, mu0, MatrixXd::Zero(2 * d, N), MatrixXd::Zero(2 * d, N)};
  rec.series.push_back(diagnose(mu0, model, cfg.eps, 0.0, options.alphas));
  for (long k = 0; k < cfg.n; ++k) {
    StepResult step;
    try {
      step = step_scheme_detailed(current.mu, model, cfg, k, &hint);
    } catch (const NonFiniteError& e) {
      rec.aborted = true;
      rec.error = e.what();
      rec.failed_particle = e.particle();
      break;
    }
    current.v_out = step.v_start;
    if (k == 0) current.v_in = step.v_start;
    if (options.keep_frames || k == 0) rec.frames.push_back(std::move(current));
    const double t1 = cfg.T * static_cast<double>(k + 1) / static_cast<double>(cfg.n);
    current = Frame{t1, std::move(step.mu), std::move(step.v_end), MatrixXd::Zero(2 * d, N)};
    rec.series.push_back(diagnose(current.mu, model, cfg.eps, t1, options.alphas));
  }
  if (!rec.aborted) current.v_out = current.v_in;
  for (Index i = 0; i < N; ++i)
    if (!current.mu.alive(i)) current.v_out.col(i).setZero();
  rec.frames.push_back(std::move(current));
  return rec;
}

} // namespace deficient
