#include "deficient/no_return.hpp"
#include "deficient/sampler.hpp"

#include <doctest.h>

#include <cmath>

using namespace deficient;

namespace {

Model quartic(Index d) { return Model(Kernel::zero(d), Potential::power(d, 0, -1, 4)); }
Model harmonic(Index d) { return Model(Kernel::zero(d), Potential::power(d, 1, 0, 4)); }

FlowConfig config(double eps, double T, long n) {
  FlowConfig c;
  c.eps = eps;
  c.T = T;
  c.n = n;
  c.ode_tol = 1e-10;
  return c;
}

Measure gaussian(Index n, Index d, double sigma, std::uint64_t seed) {
  SamplerSpec spec;
  spec.n = n;
  spec.sigma_p = spec.sigma_q = sigma;
  return sample_initial_measure(spec, d, seed);
}

Point pt1(double p, double q) { return {VectorXd::Constant(1, p), VectorXd::Constant(1, q)}; }

} // namespace

TEST_CASE("bounding potential validation") {
  const auto grid = radial_grid(10, 0.25);
  SUBCASE("inverted quartic holds with equality") {
    const auto rep = validate_bounding_potential(BoundingPotential::polynomial({-1}, {4}), quartic(2), 0, grid);
    CHECK(rep.ok);
    CHECK(std::abs(rep.worst_margin) <= 1e-9);
  }
  SUBCASE("harmonic holds with equality") {
    const auto rep = validate_bounding_potential(BoundingPotential::polynomial({0.5}, {2}), harmonic(3), 0, grid);
    CHECK(rep.ok);
    CHECK(std::abs(rep.worst_margin) <= 1e-12);
  }
  SUBCASE("missing the kernel offset fails everywhere by 1") {
    const auto rep = validate_bounding_potential(BoundingPotential::polynomial({0.5}, {2}), harmonic(2), 1, grid);
    CHECK_FALSE(rep.ok);
    CHECK(rep.worst_margin == doctest::Approx(-1));
    for (std::size_t j = 0; j < rep.radii.size(); ++j) {
      if (rep.radii[j] > 0) CHECK(rep.margins[j] == doctest::Approx(-1));
    }
  }
  SUBCASE("matched potential") {
    const Model m(Kernel::bump(2, 1, 1), Potential::power(2, 1, -0.01, 4));
    const auto u = BoundingPotential::matched(m);
    CHECK(validate_bounding_potential(u, m, m.kernel.bound(), grid).ok);
    CHECK(u.value(2) == doctest::Approx(m.kernel.bound() * 2 + 2 - 0.16));
  }
  SUBCASE("anisotropic potential is sampled on spheres") {
    VectorXd k(2);
    k << 1, 3;
    const Model m(Kernel::zero(2), Potential::anisotropic(k));
    // the sampled maximum 3r is inflated by 5%, so u = 1.5 r^2 (equality) is refused and 1.6 r^2 passes
    CHECK(validate_bounding_potential(BoundingPotential::polynomial({1.6}, {2}), m, 0, grid).ok);
    CHECK_FALSE(validate_bounding_potential(BoundingPotential::polynomial({1.5}, {2}), m, 0, grid).ok);
    CHECK_FALSE(validate_bounding_potential(BoundingPotential::polynomial({0.5}, {2}), m, 0, grid).ok);
    CHECK(sphere_max_radial_force(m.potential, 2.0) >= 6.0);
  }
}

TEST_CASE("sphere points are unit vectors") {
  for (Index d : {1, 2, 3, 5}) {
    const auto pts = sphere_points(d, 64);
    for (const auto& v : pts) CHECK(v.norm() == doctest::Approx(1).epsilon(1e-12));
  }
}

TEST_CASE("star rings") {
  const auto grid = radial_grid(10, 0.5);
  SUBCASE("decreasing profile: the first grid radii") {
    const auto rings = find_star_rings(BoundingPotential::polynomial({-1}, {4}), grid, 10, 3);
    REQUIRE(rings.size() == 3);
    CHECK(rings[0].radius == 0.5);
    CHECK(rings[1].radius == 1.0);
    CHECK(rings[2].radius == 1.5);
  }
  SUBCASE("increasing profile: none") {
    CHECK(find_star_rings(BoundingPotential::polynomial({1}, {2}), grid, 10, 3).empty());
  }
  SUBCASE("sine-linear agrees with a brute-force scan") {
    const auto u = BoundingPotential::sine_linear(1, 1, 0.5);
    const auto g = radial_grid(30, 0.1);
    const auto rings = find_star_rings(u, g, 30, 1000);
    std::vector<double> brute;
    for (std::size_t j = 0; j + 1 < g.size(); ++j) {
      if (g[j] <= 0) continue;
      bool star = true;
      for (std::size_t k = j + 1; k < g.size(); ++k) star = star && u.value(g[k]) < u.value(g[j]);
      if (star) brute.push_back(g[j]);
    }
    REQUIRE(rings.size() == brute.size());
    for (std::size_t j = 0; j < brute.size(); ++j) CHECK(rings[j].radius == brute[j]);
    CHECK_FALSE(brute.empty());
  }
  SUBCASE("is_star_ring") {
    CHECK(is_star_ring(BoundingPotential::polynomial({-1}, {4}), 5, 1e7));
    CHECK_FALSE(is_star_ring(BoundingPotential::polynomial({1}, {2}), 5, 1e7));
  }
}

TEST_CASE("no-return monitor") {
  SUBCASE("bounded harmonic orbit never reaches a large ring") {
    const RunRecord r = evolve(gaussian(20, 1, 0.3, 1), harmonic(1), config(0, 5, 50));
    for (Index i = 0; i < 20; ++i) CHECK_FALSE(no_return_monitor(r.trajectory(i), {5.0, 0}).crossed);
  }
  SUBCASE("inverted quartic: outward crossing is certified") {
    const auto u = BoundingPotential::polynomial({-1}, {4});
    Measure mu(1);
    mu.push_back({pt1(0.2, 0.8), 1.0});
    const RunRecord r = evolve(mu, quartic(1), config(0.1, 2, 200));
    const Trajectory tr = r.trajectory(0);
    const auto cert = no_return_monitor(tr, {1.0, 0}, &u, r.cfg.h() * 1.01);
    CHECK(cert.crossed);
    CHECK(cert.speed_star > 0);
    CHECK(cert.monotone_ok);
    CHECK(cert.htilde_ok);
    CHECK_FALSE(cert.reentered);
    CHECK(cert.t_star > 0);
    // in 1-d the auxiliary Hamiltonian is the energy p^2/2 - q^4; compare successive samples at the
    // size of the cancelling terms
    REQUIRE(cert.htilde.size() == cert.times.size() + 1);
    std::size_t j0 = 0;
    while (tr.t[j0] < cert.times.front()) ++j0;
    for (std::size_t j = 1; j < cert.htilde.size(); ++j) {
      const Point& x = tr.x[j0 + j - 1];
      const double scale = 1 + x.p.squaredNorm() / 2 + std::pow(x.q.norm(), 4);
      CHECK(cert.htilde[j] >= cert.htilde[j - 1] - 1e-6 * scale);
      CHECK(cert.htilde[j] == doctest::Approx(x.p.squaredNorm() / 2 - std::pow(x.q.norm(), 4)));
    }
  }
  SUBCASE("coarse samples are refused") {
    Measure mu(1);
    mu.push_back({pt1(0.2, 0.8), 1.0});
    const RunRecord r = evolve(mu, quartic(1), config(0, 2, 20));
    CHECK_THROWS_AS(no_return_monitor(r.trajectory(0), {1.0, 0}, nullptr, 0.01), InsufficientSampling);
  }
}

TEST_CASE("momentum growth rate") {
  CHECK(momentum_growth_rate(Model(Kernel::bump(2, 0.5, 1), Potential::zero(2)), 3, 1) ==
        doctest::Approx(Model(Kernel::bump(2, 0.5, 1), Potential::zero(2)).kernel.bound()));
  const Model wide(Kernel::bump(1, 100, 1), Potential::zero(1));
  CHECK(wide.kernel.bound() == 1.0);
  CHECK(momentum_growth_rate(wide, 3, 1) == doctest::Approx(1.0));
  CHECK(momentum_growth_rate(harmonic(2), 2, 1) == doctest::Approx(2.0));
  const Model q(Kernel::bump(1, 10, 0.5), Potential::power(1, 0, -1, 4));
  CHECK(q.kernel.bound() == 0.5);
  CHECK(momentum_growth_rate(q, 3, 1) == doctest::Approx(108.5));
}

TEST_CASE("cylinder audit") {
  SUBCASE("confined harmonic run") {
    const RunRecord r = evolve(gaussian(50, 2, 0.3, 2), harmonic(2), config(0, 3, 60));
    const auto audit = cylinder_containment_audit(r, {{3.0, 0}}, momentum_growth_rate(harmonic(2), 3.0, 1));
    CHECK(audit.violations.empty());
    CHECK(audit.position_exits == 0);
    CHECK(audit.checked > 0);
  }
  SUBCASE("blow-up exits through the position face; halved a* is caught") {
    const RunRecord r = evolve(gaussian(200, 1, 0.6, 3), quartic(1), config(0, 1.5, 150));
    const double a = momentum_growth_rate(quartic(1), 1.0, 1);
    const auto audit = cylinder_containment_audit(r, {{1.0, 0}}, a);
    CHECK(audit.violations.empty());
    CHECK(audit.position_exits > 0);
    const auto mutated = cylinder_containment_audit(r, {{1.0, 0}}, a / 2, 1e-12);
    CHECK_FALSE(mutated.violations.empty());
  }
}

TEST_CASE("escape-time bound") {
  const auto u = BoundingPotential::polynomial({-1}, {4});
  SUBCASE("decreasing in L") {
    const auto t5 = escape_bound_tau(u, 5, 2.5, 1e6);
    const auto t10 = escape_bound_tau(u, 10, 5, 1e6);
    const auto t20 = escape_bound_tau(u, 20, 10, 1e6);
    CHECK(t5.converged);
    CHECK(t5.tau > t10.tau);
    CHECK(t10.tau > t20.tau);
    // zero launch speed at ell is the slowest; the time from L to infinity is then a closed form
    const double beta_tail = [&] {
      // integral over [L, inf) of dr / sqrt(2 (r^4 - ell^4)) with L = 5, ell = 2.5, via r = L / s
      const int K = 4000;
      double s = 0;
      auto f = [](double x) { return 5 / std::sqrt(2 * (625 - 39.0625 * x * x * x * x)); };
      for (int k = 0; k < K; ++k) {
        const double a = static_cast<double>(k) / K, b = static_cast<double>(k + 1) / K;
        s += (b - a) * (f(a) + 4 * f((a + b) / 2) + f(b)) / 6;
      }
      return s;
    }();
    CHECK(t5.tau == doctest::Approx(beta_tail).epsilon(2e-3));
  }
  SUBCASE("quadratic profile does not converge with x_max") {
    const auto t = escape_bound_tau(BoundingPotential::polynomial({-1}, {2}), 5, 2.5, 1e3);
    CHECK_FALSE(t.converged);
    CHECK(t.tau_farther > t.tau);
    // r'' = 2 r from rest at ell: r = ell cosh(sqrt2 t)
    const double oracle = (std::acosh(1e3 / 2.5) - std::acosh(2.0)) / std::sqrt(2.0);
    CHECK(t.tau == doctest::Approx(oracle).epsilon(1e-3));
  }
  SUBCASE("degenerate ell") {
    CHECK_THROWS(escape_bound_tau(u, 5, 5, 1e6));
    CHECK_THROWS_AS(escape_bound_tau(BoundingPotential::polynomial({1}, {2}), 5, 2.5, 1e6), NoRingError);
  }
}
