#include "deficient/sampler.hpp"

#include <cmath>
#include <numbers>

namespace deficient {

double CounterRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2 * std::log(u1));
  const double a = 2 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

SamplerFamily parse_sampler_family(const std::string& name) {
  if (name == "gaussian") return SamplerFamily::Gaussian;
  if (name == "uniform_ball") return SamplerFamily::UniformBall;
  if (name == "lattice") return SamplerFamily::Lattice;
  if (name == "shell") return SamplerFamily::Shell;
  throw std::invalid_argument("unknown sampler family '" + name + "'");
}

std::string to_string(SamplerFamily family) {
  switch (family) {
    case SamplerFamily::Gaussian: return "gaussian";
    case SamplerFamily::UniformBall: return "uniform_ball";
    case SamplerFamily::Lattice: return "lattice";
    case SamplerFamily::Shell: return "shell";
  }
  return "unknown";
}

namespace {

VectorXd gaussian_vector(CounterRng& rng, Index d, double sigma) {
  VectorXd v(d);
  for (Index k = 0; k < d; ++k) v[k] = sigma * rng.normal();
  return v;
}

VectorXd unit_vector(CounterRng& rng, Index d) {
  for (;;) {
    VectorXd v = gaussian_vector(rng, d, 1.0);
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

} // namespace

Measure sample_initial_measure(const SamplerSpec& spec, Index d, std::uint64_t seed) {
  if (spec.n < 1) throw std::invalid_argument("sampler.n: must be >= 1");
  if (d < 1) throw std::invalid_argument("scenario.d: must be >= 1");
  const double w = 1.0 / static_cast<double>(spec.n);
  Measure mu(d);
  mu.reserve(spec.n);
  CounterRng rng(seed);

  switch (spec.family) {
    case SamplerFamily::Gaussian:
      for (Index i = 0; i < spec.n; ++i) {
        VectorXd p = gaussian_vector(rng, d, spec.sigma_p);
        VectorXd q = gaussian_vector(rng, d, spec.sigma_q);
        mu.push_back(Point(std::move(p), std::move(q)), w);
      }
      break;
    case SamplerFamily::UniformBall:
      for (Index i = 0; i < spec.n; ++i) {
        const VectorXd u = unit_vector(rng, 2 * d);
        const double r = spec.radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(2 * d));
        mu.push_back(Point(r * u.head(d), r * u.tail(d)), w);
      }
      break;
    case SamplerFamily::Lattice: {
      const Index m = static_cast<Index>(std::ceil(std::pow(static_cast<double>(spec.n), 1.0 / static_cast<double>(d)) - 1e-9));
      VectorXd p0 = spec.p0.size() == 0 ? VectorXd::Zero(d) : spec.p0;
      if (p0.size() != d) throw std::invalid_argument("sampler.p0: length must equal d");
      for (Index i = 0; i < spec.n; ++i) {
        VectorXd q(d);
        Index code = i;
        for (Index k = d - 1; k >= 0; --k) {
          const Index j = code % m;
          code /= m;
          q[k] = -spec.radius + 2 * spec.radius * (static_cast<double>(j) + 0.5) / static_cast<double>(m);
        }
        mu.push_back(Point(p0, std::move(q)), w);
      }
      break;
    }
    case SamplerFamily::Shell:
      for (Index i = 0; i < spec.n; ++i) {
        VectorXd p = spec.p_radius * unit_vector(rng, d);
        VectorXd q = gaussian_vector(rng, d, spec.sigma_q);
        mu.push_back(Point(std::move(p), std::move(q)), w);
      }
      break;
  }

  if (exp_moment(mu, spec.alpha0, 0.0).saturated) {
    throw SaturatedMoment("sampler.alpha0: exponential moment of the initial sample saturates");
  }
  return mu;
}

} // namespace deficient
