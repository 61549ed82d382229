#pragma once

// Deterministic initial ensembles. Random draws come from a counter-based
// generator: draw k of stream s under seed z is splitmix64(z ^ splitmix64(s * 2^32 + k)),
// so output depends only on (seed, stream, counter).

#include "deficient/phase_space.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

namespace deficient {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class CounterRng {
public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  std::uint64_t next() { return splitmix64(seed_ ^ splitmix64((stream_ << 32) + counter_++)); }

  /// Uniform on (0, 1).
  double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal by Box-Muller (both variates are used in turn).
  double normal();

  std::uint64_t counter() const { return counter_; }

private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0;
};

enum class SamplerFamily { Gaussian, UniformBall, Lattice, Shell };

struct SamplerSpec {
  SamplerFamily family = SamplerFamily::Gaussian;
  Index n = 1000;
  std::uint64_t seed = 0;
  double sigma_p = 1;   // gaussian
  double sigma_q = 1;   // gaussian, shell
  double radius = 1;    // uniform_ball: phase-space radius; lattice: half-width of the position box
  double p_radius = 1;  // shell: |p|
  VectorXd p0;          // lattice: common momentum (zero if empty)
  double alpha0 = 1;    // exponential moment that must be finite
};

class SaturatedMoment : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

SamplerFamily parse_sampler_family(const std::string& name);
std::string to_string(SamplerFamily family);

/// N particles of weight 1/N. Throws SaturatedMoment if exp_moment(mu0, alpha0, 0) saturates.
Measure sample_initial_measure(const SamplerSpec& spec, Index d, std::uint64_t seed);

} // namespace deficient
