#include "deficient/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace deficient {

Model build_model(const ScenarioConfig& cfg) {
  const Index d = cfg.d;
  Kernel kernel = cfg.kernel.family == "bump" ? Kernel::bump(d, cfg.kernel.a, cfg.kernel.amplitude) : Kernel::zero(d);
  Potential potential = Potential::zero(d);
  if (cfg.potential.family == "power") {
    potential = Potential::power(d, cfg.potential.k2, cfg.potential.k4, cfg.potential.gamma);
  } else if (cfg.potential.family == "anisotropic_harmonic") {
    potential = Potential::anisotropic(
        Eigen::Map<const VectorXd>(cfg.potential.stiffness.data(), static_cast<Index>(cfg.potential.stiffness.size())));
  }
  return Model(std::move(kernel), std::move(potential));
}

std::optional<BoundingPotential> build_bounding(const ScenarioConfig& cfg, const Model& model) {
  const auto& b = cfg.bounding;
  if (b.family == "polynomial") return BoundingPotential::polynomial(b.coefficients, b.powers);
  if (b.family == "sine_linear") return BoundingPotential::sine_linear(b.amplitude, b.frequency, b.slope);
  if (b.family == "matched") return BoundingPotential::matched(model);
  return std::nullopt;
}

Measure initial_measure(const ScenarioConfig& cfg, std::optional<std::uint64_t> seed) {
  return sample_initial_measure(cfg.sampler, cfg.d, seed.value_or(cfg.sampler.seed));
}

FlowConfig flow_config(const ScenarioConfig& cfg, double eps, long n, int threads) {
  FlowConfig f;
  f.eps = eps;
  f.T = cfg.flow.T;
  f.n = n;
  f.ode_tol = cfg.flow.ode_tol;
  f.x_max = cfg.flow.x_max;
  f.h_min = cfg.flow.h_min;
  f.seed = cfg.sampler.seed;
  f.threads = threads;
  return f;
}

std::vector<SpatialBump<double>> scenario_battery(const ScenarioConfig& cfg) {
  if (cfg.probes.battery_count <= 0) return {};
  return bump_battery(cfg.d, cfg.probes.battery_count, cfg.probes.battery_radius, cfg.probes.battery_spread,
                      cfg.sampler.seed);
}

// ---------------------------------------------------------------------------

std::vector<std::string> Certificates::failures() const {
  std::vector<std::string> out;
  if (aborted) out.push_back("run aborted: " + error);
  if (!mass_monotone) out.push_back("mass increased at step " + std::to_string(mass_first_violation));
  if (!moment_monotone) out.push_back("exponential moment increased beyond slack");
  if (!pathwise_ok) out.push_back("pathwise weight bound violated");
  if (bounding && !bounding->ok) {
    std::ostringstream s;
    s << "bounding potential fails at r = " << bounding->worst_radius << " (margin " << bounding->worst_margin << ")";
    out.push_back(s.str());
  }
  for (const auto& r : rings) {
    if (!r.cylinder.violations.empty()) {
      out.push_back(std::to_string(r.cylinder.violations.size()) + " momentum-face exits from the cylinder at L* = " +
                    std::to_string(r.ring.radius));
    }
  }
  if (monitor_monotone_failures > 0) out.push_back("radial speed fell below its crossing value");
  if (monitor_htilde_failures > 0) out.push_back("auxiliary Hamiltonian decreased after a crossing");
  if (monitor_reentries > 0) out.push_back("trajectory re-entered a star ring");
  if (representation > 1e-12) out.push_back("representation bookkeeping discrepancy");
  return out;
}

Certificates certify(const ScenarioConfig& cfg, const Model& model, const RunRecord& record,
                     const std::optional<BoundingPotential>& bounding) {
  Certificates c;
  c.eps = record.cfg.eps;
  c.aborted = record.aborted;
  c.error = record.error;
  const double eps = c.eps;

  for (std::size_t k = 1; k < record.series.size(); ++k) {
    if (record.series[k].mass > record.series[k - 1].mass && c.mass_monotone) {
      c.mass_monotone = false;
      c.mass_first_violation = static_cast<long>(k - 1);
    }
  }

  c.moment_alphas.push_back(eps / 2);
  for (double a : cfg.probes.alphas)
    if (a <= eps && std::find(c.moment_alphas.begin(), c.moment_alphas.end(), a) == c.moment_alphas.end())
      c.moment_alphas.push_back(a);
  const auto& frames = record.frames;
  for (double a : c.moment_alphas) {
    double prev = -1;
    for (const auto& f : frames) {
      const auto m = exp_moment(f.mu, a, eps);
      if (prev > 0) {
        c.moment_worst_ratio = std::max(c.moment_worst_ratio, m.value / prev);
        if (m.value > prev * (1 + 1e-6)) c.moment_monotone = false;
      }
      prev = m.value;
    }
  }

  if (!frames.empty()) {
    const Measure& mu0 = frames.front().mu;
    std::vector<double> alphas = c.moment_alphas;
    alphas.push_back(eps);
    double worst_log = -std::numeric_limits<double>::infinity();
    for (const auto& f : frames) {
      for (Index i = 0; i < f.mu.size(); ++i) {
        if (!f.mu.alive(i)) continue;
        const double r0 = mu0.point(i).norm(), rt = f.mu.point(i).norm();
        for (double a : alphas) worst_log = std::max(worst_log, a * (rt - r0) - eps * f.mu.S(i));
      }
    }
    c.pathwise_worst_ratio = std::exp(worst_log);
    c.pathwise_ok = !(worst_log > std::log1p(1e-6));
  }

  if (bounding) {
    const double B = model.kernel.bound();
    c.bounding = validate_bounding_potential(*bounding, model, B, radial_grid(cfg.probes.ring_horizon, cfg.probes.ring_step / 4));
    if (cfg.probes.ring_count > 0) {
      const auto grid = radial_grid(cfg.probes.ring_horizon, cfg.probes.ring_step);
      const auto candidates =
          find_star_rings(*bounding, grid, cfg.probes.ring_horizon, static_cast<Index>(grid.size()));
      const double mass0 = frames.empty() ? 1.0 : total_mass(frames.front().mu, 0.0);
      for (const auto& ring : candidates) {
        if (static_cast<long>(c.rings.size()) >= cfg.probes.ring_count) break;
        // coarse-grid candidates that a finer grid refutes are skipped, not audited
        if (!verify_star_ring(*bounding, ring.radius, cfg.probes.ring_horizon, cfg.probes.ring_step / 10)) {
          ++c.rings_rejected;
          continue;
        }
        RingAudit ra;
        ra.ring = ring;
        ra.a_star = momentum_growth_rate(model, ring.radius, mass0);
        ra.eta = cfg.probes.eta > 0 ? cfg.probes.eta : 0.05 * ra.a_star;
        ra.cylinder = cylinder_containment_audit(record, {ring}, ra.a_star, ra.eta);
        c.rings.push_back(ra);
      }
      if (c.bounding->ok && !frames.empty()) {
        const double spacing = record.cfg.h() * (1 + 1e-9);
        for (Index i = 0; i < frames.front().mu.size(); ++i) {
          const Trajectory traj = record.trajectory(i);
          if (traj.size() < 2) continue;
          for (const auto& ra : c.rings) {
            const auto cert = no_return_monitor(traj, ra.ring, &*bounding, spacing);
            if (!cert.crossed) continue;
            ++c.monitor_crossings;
            if (!cert.monotone_ok) ++c.monitor_monotone_failures;
            if (!cert.htilde_ok) ++c.monitor_htilde_failures;
            if (cert.reentered) ++c.monitor_reentries;
          }
        }
      }
    }
    for (double L : cfg.probes.tau_rings) {
      const double ell = cfg.probes.ell_fraction * L;
      c.tau.push_back({L, ell, escape_bound_tau(*bounding, L, ell, cfg.flow.x_max)});
    }
  }

  const auto battery = scenario_battery(cfg);
  if (!battery.empty() && frames.size() > 1) {
    std::vector<double> times = cfg.probes.times;
    if (times.empty()) times.push_back(frames.back().t);
    for (double t : times) {
      if (t > frames.back().t + 1e-9 * record.cfg.T) continue;
      c.representation = std::max(c.representation, representation_check(record, model, battery, t));
    }
    const TimeWindow window{record.cfg.T / 8, 7 * record.cfg.T / 8};
    if (!record.aborted && 3 * record.cfg.n / 4 >= 21) {
      for (const auto& phi : battery) c.weak_residuals.push_back(weak_residual(record, phi, window));
    }
  }
  return c;
}

RunOutcome run_scenario(const ScenarioConfig& cfg, const RunOptions& options) {
  const Model model = build_model(cfg);
  const auto bounding = build_bounding(cfg, model);
  const Measure mu0 = initial_measure(cfg, options.seed);
  FlowConfig fc = flow_config(cfg, cfg.flow.epsilon, cfg.flow.n, options.threads);
  if (options.seed) fc.seed = *options.seed;
  RunOutcome out;
  out.record = evolve(mu0, model, fc, EvolveOptions{cfg.probes.alphas, true});
  out.certificates = certify(cfg, model, out.record, bounding);
  return out;
}

SweepOutcome sweep_scenario(const ScenarioConfig& cfg, const RunOptions& options) {
  const Model model = build_model(cfg);
  const Measure mu0 = initial_measure(cfg, options.seed);
  SweepPlan plan;
  plan.epsilons = cfg.flow.epsilons.empty() ? std::vector<double>{cfg.flow.epsilon} : cfg.flow.epsilons;
  plan.ns = cfg.flow.ns.empty() ? std::vector<long>{cfg.flow.n} : cfg.flow.ns;
  plan.probe_times = cfg.probes.times.empty() ? std::vector<double>{cfg.flow.T} : cfg.probes.times;
  FlowConfig base = flow_config(cfg, 0.0, plan.ns.back(), 1);
  if (options.seed) base.seed = *options.seed;

  SweepOutcome out;
  out.report = epsilon_sweep(mu0, model, base, plan, options.threads, &out.runs);
  out.limit_audit = limit_mass_monotonicity(out.report);
  for (std::size_t k = 0; k < out.report.monotone_in_time.size(); ++k) {
    if (!out.report.monotone_in_time[k]) {
      out.failures.push_back("mass not monotone in time at eps = " + std::to_string(plan.epsilons[k]));
    }
  }
  if (!out.limit_audit.ok) {
    out.failures.push_back("extrapolated mass increases on probe interval " + std::to_string(out.limit_audit.first_failure));
  }
  return out;
}

} // namespace deficient
