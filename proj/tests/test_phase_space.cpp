#include "deficient/model.hpp"
#include "deficient/phase_space.hpp"
#include "deficient/sampler.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace deficient;

namespace {

Point pt(std::initializer_list<double> p, std::initializer_list<double> q) {
  VectorXd pv(static_cast<Index>(p.size())), qv(static_cast<Index>(q.size()));
  Index k = 0;
  for (double v : p) pv[k++] = v;
  k = 0;
  for (double v : q) qv[k++] = v;
  return {pv, qv};
}

Measure single(const Point& x, double w0, double S) {
  Measure mu(x.dim());
  mu.push_back({x, w0, S});
  return mu;
}

} // namespace

TEST_CASE("total mass of single particles") {
  CHECK(total_mass(single(pt({0}, {0}), 1, 0), 0.7) == 1.0);
  CHECK(total_mass(single(pt({0}, {0}), 1, 3), 0.0) == 1.0);
  CHECK(total_mass(single(pt({0}, {0}), 1, 3), 0.5) == doctest::Approx(std::exp(-1.5)).epsilon(1e-15));
  CHECK(total_mass(single(pt({0}, {0}), 1, 3), 0.5) == doctest::Approx(0.22313).epsilon(1e-4));
}

TEST_CASE("escaped particles carry no mass") {
  Measure mu = single(pt({1}, {0}), 0.5, 0);
  mu.push_back({pt({0}, {1}), 0.5});
  mu.mark_escaped(0, 0.3, pt({7}, {9}), 2.0);
  CHECK(total_mass(mu, 0.0) == 0.5);
  CHECK(mu.count_escaped() == 1);
  CHECK(mu.t_escape(0) == 0.3);
  CHECK_THROWS_AS(mu.set_state(0, pt({0}, {0}), 3.0), std::logic_error);
  CHECK_THROWS_AS(mu.set_state(1, pt({0}, {0}), -1.0), std::logic_error);
}

TEST_CASE("exponential moment") {
  Measure mu = single(pt({0.3, -0.4}, {1.2, 0.0}), 0.25, 0.8);
  mu.push_back({pt({0.0, 0.0}, {0.0, 2.0}), 0.75, 0.1});
  SUBCASE("alpha = 0 is the mass") { CHECK(exp_moment(mu, 0.0, 0.4).value == doctest::Approx(total_mass(mu, 0.4))); }
  SUBCASE("origin") { CHECK(exp_moment(single(pt({0}, {0}), 1, 0), 2.0, 0.0).value == 1.0); }
  SUBCASE("unit norm") {
    const auto m = exp_moment(single(pt({0.6}, {0.8}), 1, 0), 1.0, 0.0);
    CHECK(m.value == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
    CHECK_FALSE(m.saturated);
  }
  SUBCASE("saturation is flagged") {
    const auto m = exp_moment(single(pt({1e4}, {0}), 1, 0), 1.0, 0.0);
    CHECK(m.saturated);
    CHECK(m.value == MomentValue<double>::kSaturation);
  }
  SUBCASE("log-domain weight matches direct evaluation") {
    const double direct = 0.25 * std::exp(0.3 * std::sqrt(0.09 + 0.16 + 1.44) - 0.5 * 0.8) +
                          0.75 * std::exp(0.3 * 2.0 - 0.5 * 0.1);
    CHECK(exp_moment(mu, 0.3, 0.5).value == doctest::Approx(direct).epsilon(1e-14));
  }
}

TEST_CASE("integrate is linear and matches hand sums") {
  Measure mu = single(pt({0}, {1}), 0.5, 0);
  mu.push_back({pt({0}, {3}), 0.5});
  auto phi = [](const auto&, const auto& q) { return q[0]; };
  CHECK(integrate(mu, phi, 0.0) == 2.0);
  CHECK(integrate(mu, [](const auto&, const auto&) { return 0.0; }, 0.3) == 0.0);
  CHECK(integrate(mu, [](const auto&, const auto&) { return 1.0; }, 0.3) == total_mass(mu, 0.3));
  auto psi = [](const auto& p, const auto& q) { return p[0] * p[0] - q[0]; };
  const double lhs = integrate(mu, [&](const auto& p, const auto& q) { return 2 * phi(p, q) + 3 * psi(p, q); }, 0.0);
  CHECK(lhs == doctest::Approx(2 * integrate(mu, phi, 0.0) + 3 * integrate(mu, psi, 0.0)));
}

TEST_CASE("pairwise sum is exact on representable data") {
  std::vector<double> v(1000);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(pairwise_sum(std::span<const double>(v)) == 500500.0);
}

TEST_CASE("tightness functional") {
  const Kernel W = Kernel::bump(1, 1.0, 1.0);
  auto grad = [&](const VectorXd& d) { return W.gradient(d); };
  const VectorXd qbar = VectorXd::Zero(1);
  SUBCASE("slow particles do not count") {
    Measure mu = single(pt({3.9}, {0.2}), 1, 0);
    CHECK(tightness_Cr(mu, 5.0, qbar, grad, 0.0) == 0.0);
  }
  SUBCASE("far particles do not count") {
    Measure mu = single(pt({10}, {2.0}), 1, 0);
    CHECK(tightness_Cr(mu, 5.0, qbar, grad, 0.0) == 0.0);
  }
  SUBCASE("one fast particle") {
    // |W'(x)| = 6 x (1 - x^2)^2 for a = c = 1; pick x with |W'| = 0.7
    double lo = 0, hi = 1 / std::sqrt(5.0);
    for (int it = 0; it < 200; ++it) {
      const double mid = (lo + hi) / 2;
      (6 * mid * std::pow(1 - mid * mid, 2) < 0.7 ? lo : hi) = mid;
    }
    Measure mu = single(pt({5.0}, {lo}), 1, 0);
    CHECK(tightness_Cr(mu, 5.0, qbar, grad, 0.0) == doctest::Approx(0.7).epsilon(1e-12));
  }
  CHECK_THROWS(MomentumCutoff<double>(1.0));
}

TEST_CASE("momentum cutoff and bump") {
  const MomentumCutoff<double> theta(3.0);
  CHECK(theta(1.9) == 0.0);
  CHECK(theta(3.0) == 1.0);
  CHECK(theta(2.5) == doctest::Approx(0.5));
  const SpatialBump<double> phi(pt({0.1}, {-0.2}), 0.5);
  const VectorXd p = VectorXd::Constant(1, 0.3), q = VectorXd::Constant(1, -0.1);
  const Point g = phi.gradient(p, q);
  const double h = 1e-6;
  CHECK(g.p[0] == doctest::Approx((phi(VectorXd::Constant(1, 0.3 + h), q) - phi(VectorXd::Constant(1, 0.3 - h), q)) / (2 * h)).epsilon(1e-7));
  CHECK(g.q[0] == doctest::Approx((phi(p, VectorXd::Constant(1, -0.1 + h)) - phi(p, VectorXd::Constant(1, -0.1 - h))) / (2 * h)).epsilon(1e-7));
}

TEST_CASE("sampler") {
  SamplerSpec spec;
  SUBCASE("lattice N = 4, d = 1") {
    spec.family = SamplerFamily::Lattice;
    spec.n = 4;
    const Measure mu = sample_initial_measure(spec, 1, 0);
    REQUIRE(mu.size() == 4);
    for (Index i = 0; i < 4; ++i) CHECK(mu.w0(i) == 0.25);
    CHECK(mu.q(0)[0] == -0.75);
    CHECK(mu.q(3)[0] == 0.75);
  }
  SUBCASE("same seed twice is bitwise identical") {
    spec.n = 257;
    const Measure a = sample_initial_measure(spec, 3, 99), b = sample_initial_measure(spec, 3, 99);
    CHECK((a.momenta().array() == b.momenta().array()).all());
    CHECK((a.positions().array() == b.positions().array()).all());
    const Measure c = sample_initial_measure(spec, 3, 100);
    CHECK_FALSE((a.positions().array() == c.positions().array()).all());
  }
  SUBCASE("gaussian alpha0 = 1 moment is finite and near the Gaussian value") {
    spec.n = 20000;
    spec.alpha0 = 1;
    const Measure mu = sample_initial_measure(spec, 1, 3);
    const auto m = exp_moment(mu, 1.0, 0.0);
    CHECK_FALSE(m.saturated);
    // |x| is Rayleigh distributed in R^2; E exp(|x|) by quadrature
    double quad = 0;
    const int K = 200000;
    for (int k = 0; k < K; ++k) {
      const double r = (k + 0.5) * 20.0 / K;
      quad += r * std::exp(-r * r / 2) * std::exp(r) * 20.0 / K;
    }
    CHECK(m.value == doctest::Approx(quad).epsilon(0.03));
    CHECK(total_mass(mu, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("heavy alpha0 saturates") {
    spec.n = 100;
    spec.sigma_p = spec.sigma_q = 100;
    spec.alpha0 = 10;
    CHECK_THROWS_AS(sample_initial_measure(spec, 2, 0), SaturatedMoment);
  }
  SUBCASE("shell") {
    spec.family = SamplerFamily::Shell;
    spec.n = 50;
    spec.p_radius = 1;
    const Measure mu = sample_initial_measure(spec, 2, 4);
    for (Index i = 0; i < mu.size(); ++i) CHECK(mu.p(i).norm() == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("uniform ball stays inside") {
    spec.family = SamplerFamily::UniformBall;
    spec.n = 500;
    spec.radius = 2;
    const Measure mu = sample_initial_measure(spec, 2, 4);
    for (Index i = 0; i < mu.size(); ++i) CHECK(mu.point(i).norm() <= 2.0);
  }
}

TEST_CASE("counter rng depends only on seed, stream and counter") {
  CounterRng a(5, 1), b(5, 1), c(5, 2);
  for (int k = 0; k < 10; ++k) {
    const auto x = a.next();
    CHECK(x == b.next());
    CHECK(x != c.next());
  }
  CHECK(a.counter() == 10);
  CHECK(CounterRng(5, 1).next() == splitmix64(5 ^ splitmix64(1ULL << 32)));
}
