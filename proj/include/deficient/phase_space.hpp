#pragma once

// Phase-space points, weighted particle ensembles and the measure-level
// functionals evaluated on them. A particle carries its initial weight w0 and
// accumulated path length S; its effective weight at dissipation rate eps is
// w0 * exp(-eps * S), and escaped particles weigh exactly zero.

#include "deficient/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace deficient {

template <typename Scalar>
struct PhasePoint {
  VectorX<Scalar> p;
  VectorX<Scalar> q;

  PhasePoint() = default;
  PhasePoint(VectorX<Scalar> momentum, VectorX<Scalar> position)
      : p(std::move(momentum)), q(std::move(position)) {
    if (p.size() != q.size() || p.size() < 1) {
      throw std::invalid_argument("PhasePoint: p and q must share a dimension d >= 1");
    }
  }

  static PhasePoint zero(Index d) { return {VectorX<Scalar>::Zero(d), VectorX<Scalar>::Zero(d)}; }

  /// Splits a stacked [p; q] vector (only the first 2d entries are read).
  static PhasePoint from_stacked(const ConstVectorRef<Scalar>& x, Index d) {
    return {x.head(d), x.segment(d, d)};
  }

  Index dim() const { return p.size(); }
  Scalar norm() const { return std::sqrt(p.squaredNorm() + q.squaredNorm()); }
  bool all_finite() const { return p.allFinite() && q.allFinite(); }

  VectorX<Scalar> stacked() const {
    VectorX<Scalar> x(2 * dim());
    x << p, q;
    return x;
  }
};

template <typename Scalar>
struct WeightedParticle {
  PhasePoint<Scalar> x;
  Scalar w0 = Scalar(1);
  Scalar S = Scalar(0);
  Status status = Status::Alive;
  Scalar t_escape = std::numeric_limits<Scalar>::infinity();

  bool alive() const { return status == Status::Alive; }
};

/// Finite weighted ensemble, stored as structure-of-arrays so momenta and
/// positions are exposed as d x N Eigen maps.
template <typename Scalar>
class ParticleMeasure {
public:
  using ConstVectorMap = Eigen::Map<const VectorX<Scalar>>;
  using VectorMap = Eigen::Map<VectorX<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const MatrixX<Scalar>>;

  explicit ParticleMeasure(Index d = 1) : d_(d) {
    if (d < 1) throw std::invalid_argument("ParticleMeasure: dimension must be >= 1");
  }

  Index dim() const { return d_; }
  Index size() const { return static_cast<Index>(w0_.size()); }
  bool empty() const { return w0_.empty(); }

  void reserve(Index n) {
    P_.reserve(static_cast<std::size_t>(n * d_));
    Q_.reserve(static_cast<std::size_t>(n * d_));
    w0_.reserve(static_cast<std::size_t>(n));
    S_.reserve(static_cast<std::size_t>(n));
    t_escape_.reserve(static_cast<std::size_t>(n));
    status_.reserve(static_cast<std::size_t>(n));
  }

  void push_back(const WeightedParticle<Scalar>& particle) {
    if (particle.x.dim() != d_) throw std::invalid_argument("ParticleMeasure: dimension mismatch");
    if (!(particle.w0 >= 0) || !(particle.S >= 0)) {
      throw std::invalid_argument("ParticleMeasure: w0 and S must be nonnegative");
    }
    P_.insert(P_.end(), particle.x.p.data(), particle.x.p.data() + d_);
    Q_.insert(Q_.end(), particle.x.q.data(), particle.x.q.data() + d_);
    w0_.push_back(particle.w0);
    S_.push_back(particle.S);
    status_.push_back(particle.status);
    t_escape_.push_back(particle.t_escape);
  }

  void push_back(const PhasePoint<Scalar>& x, Scalar w0) { push_back({x, w0}); }

  ConstVectorMap p(Index i) const { return ConstVectorMap(P_.data() + i * d_, d_); }
  ConstVectorMap q(Index i) const { return ConstVectorMap(Q_.data() + i * d_, d_); }
  VectorMap p(Index i) { return VectorMap(P_.data() + i * d_, d_); }
  VectorMap q(Index i) { return VectorMap(Q_.data() + i * d_, d_); }

  ConstMatrixMap momenta() const { return ConstMatrixMap(P_.data(), d_, size()); }
  ConstMatrixMap positions() const { return ConstMatrixMap(Q_.data(), d_, size()); }

  PhasePoint<Scalar> point(Index i) const { return {p(i), q(i)}; }
  Scalar w0(Index i) const { return w0_[static_cast<std::size_t>(i)]; }
  Scalar S(Index i) const { return S_[static_cast<std::size_t>(i)]; }
  Status status(Index i) const { return status_[static_cast<std::size_t>(i)]; }
  bool alive(Index i) const { return status(i) == Status::Alive; }
  Scalar t_escape(Index i) const { return t_escape_[static_cast<std::size_t>(i)]; }

  WeightedParticle<Scalar> particle(Index i) const {
    return {point(i), w0(i), S(i), status(i), t_escape(i)};
  }

  /// Moves an alive particle. S may only grow.
  void set_state(Index i, const PhasePoint<Scalar>& x, Scalar S) {
    if (!alive(i)) throw std::logic_error("ParticleMeasure: escaped particles are never reanimated");
    if (S < S_[static_cast<std::size_t>(i)]) throw std::logic_error("ParticleMeasure: path length decreased");
    p(i) = x.p;
    q(i) = x.q;
    S_[static_cast<std::size_t>(i)] = S;
  }

  void mark_escaped(Index i, Scalar t, const PhasePoint<Scalar>& last, Scalar S) {
    p(i) = last.p;
    q(i) = last.q;
    S_[static_cast<std::size_t>(i)] = std::max(S, S_[static_cast<std::size_t>(i)]);
    status_[static_cast<std::size_t>(i)] = Status::Escaped;
    t_escape_[static_cast<std::size_t>(i)] = t;
  }

  /// Effective weight w0 * exp(-eps * S); zero once escaped.
  Scalar weight(Index i, Scalar eps) const {
    if (!alive(i)) return Scalar(0);
    return w0(i) * std::exp(-eps * S(i));
  }

  Index count_escaped() const {
    return static_cast<Index>(std::count(status_.begin(), status_.end(), Status::Escaped));
  }

private:
  Index d_;
  std::vector<Scalar> P_;
  std::vector<Scalar> Q_;
  std::vector<Scalar> w0_;
  std::vector<Scalar> S_;
  std::vector<Status> status_;
  std::vector<Scalar> t_escape_;
};

using Point = PhasePoint<double>;
using Particle = WeightedParticle<double>;
using Measure = ParticleMeasure<double>;

// ---------------------------------------------------------------------------
// Reductions

/// Deterministic pairwise-tree sum; the tree shape depends only on the length.
template <typename Scalar>
Scalar pairwise_sum(std::span<const Scalar> values) {
  constexpr std::size_t kLeaf = 16;
  if (values.size() <= kLeaf) {
    Scalar s(0);
    for (Scalar v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

template <typename Scalar, typename Term>
Scalar reduce_particles(const ParticleMeasure<Scalar>& mu, Term&& term) {
  std::vector<Scalar> terms(static_cast<std::size_t>(mu.size()));
  for (Index i = 0; i < mu.size(); ++i) terms[static_cast<std::size_t>(i)] = term(i);
  return pairwise_sum(std::span<const Scalar>(terms));
}

template <typename Scalar>
Scalar total_mass(const ParticleMeasure<Scalar>& mu, Scalar eps) {
  if (eps < 0) throw std::invalid_argument("total_mass: eps must be >= 0");
  return reduce_particles(mu, [&](Index i) { return mu.weight(i, eps); });
}

template <typename Scalar>
struct MomentValue {
  static constexpr Scalar kSaturation = Scalar(1e300);
  Scalar value = 0;
  bool saturated = false;
};

/// Sum over alive particles of w0 exp(alpha |x| - eps S), with |x| the phase-space norm.
/// The exponent is formed before exponentiating so large alpha|x| is cancelled by eps S.
template <typename Scalar>
MomentValue<Scalar> exp_moment(const ParticleMeasure<Scalar>& mu, Scalar alpha, Scalar eps) {
  if (alpha < 0) throw std::invalid_argument("exp_moment: alpha must be >= 0");
  const Scalar log_cap = std::log(MomentValue<Scalar>::kSaturation);
  bool saturated = false;
  const Scalar sum = reduce_particles(mu, [&](Index i) -> Scalar {
    if (!mu.alive(i) || mu.w0(i) == 0) return 0;
    const Scalar norm = std::sqrt(mu.p(i).squaredNorm() + mu.q(i).squaredNorm());
    const Scalar exponent = std::log(mu.w0(i)) + alpha * norm - eps * mu.S(i);
    if (!(exponent <= log_cap)) {
      saturated = true;
      return 0;
    }
    return std::exp(exponent);
  });
  if (saturated || !(sum <= MomentValue<Scalar>::kSaturation)) {
    return {MomentValue<Scalar>::kSaturation, true};
  }
  return {sum, false};
}

/// Integral of phi(p, q) against the decayed measure; phi is never called on escaped particles.
template <typename Scalar, typename TestFunction>
Scalar integrate(const ParticleMeasure<Scalar>& mu, TestFunction&& phi, Scalar eps) {
  return reduce_particles(mu, [&](Index i) -> Scalar {
    if (!mu.alive(i)) return 0;
    return mu.weight(i, eps) * static_cast<Scalar>(phi(mu.p(i), mu.q(i)));
  });
}

template <typename Scalar>
Scalar max_momentum_norm(const ParticleMeasure<Scalar>& mu) {
  Scalar m = 0;
  for (Index i = 0; i < mu.size(); ++i)
    if (mu.alive(i)) m = std::max(m, mu.p(i).norm());
  return m;
}

template <typename Scalar>
Scalar max_position_norm(const ParticleMeasure<Scalar>& mu) {
  Scalar m = 0;
  for (Index i = 0; i < mu.size(); ++i)
    if (mu.alive(i)) m = std::max(m, mu.q(i).norm());
  return m;
}

// ---------------------------------------------------------------------------
// Smooth cutoffs

/// theta_r: 0 for |p| <= r - 1, 1 for |p| >= r, cubic smoothstep in between (C^1, monotone).
template <typename Scalar>
struct MomentumCutoff {
  Scalar r;

  explicit MomentumCutoff(Scalar outer) : r(outer) {
    if (!(outer > 1)) throw std::domain_error("MomentumCutoff: r must exceed 1");
  }

  Scalar operator()(Scalar pnorm) const {
    const Scalar s = pnorm - (r - 1);
    if (s <= 0) return 0;
    if (s >= 1) return 1;
    return s * s * (3 - 2 * s);
  }

  Scalar derivative(Scalar pnorm) const {
    const Scalar s = pnorm - (r - 1);
    if (s <= 0 || s >= 1) return 0;
    return 6 * s * (1 - s);
  }
};

/// Phase-space bump (1 - |x - c|^2 / R^2)^3 on the ball of radius R: C^2, values in [0, 1].
template <typename Scalar>
struct SpatialBump {
  PhasePoint<Scalar> center;
  Scalar radius;

  SpatialBump(PhasePoint<Scalar> c, Scalar R) : center(std::move(c)), radius(R) {
    if (!(R > 0)) throw std::domain_error("SpatialBump: radius must be positive");
  }

  template <typename P, typename Q>
  Scalar operator()(const P& p, const Q& q) const {
    const Scalar s = ((p - center.p).squaredNorm() + (q - center.q).squaredNorm()) / (radius * radius);
    if (s >= 1) return 0;
    const Scalar u = 1 - s;
    return u * u * u;
  }

  /// Gradient split as (d/dp, d/dq).
  template <typename P, typename Q>
  PhasePoint<Scalar> gradient(const P& p, const Q& q) const {
    const VectorX<Scalar> dp = p - center.p;
    const VectorX<Scalar> dq = q - center.q;
    const Scalar R2 = radius * radius;
    const Scalar s = (dp.squaredNorm() + dq.squaredNorm()) / R2;
    if (s >= 1) return PhasePoint<Scalar>::zero(dp.size());
    const Scalar u = 1 - s;
    const Scalar f = -6 * u * u / R2;
    return {f * dp, f * dq};
  }
};

/// Sum over alive particles of weight * theta_r(|p|) * |grad W(qbar - q)|.
/// grad_w maps a position difference to the kernel gradient.
template <typename Scalar, typename Q, typename GradW>
Scalar tightness_Cr(const ParticleMeasure<Scalar>& mu, Scalar r, const Q& qbar,
                    GradW&& grad_w, Scalar eps) {
  if (!(r > 1)) throw std::domain_error("tightness_Cr: r must exceed 1");
  const MomentumCutoff<Scalar> theta(r);
  return reduce_particles(mu, [&](Index i) -> Scalar {
    if (!mu.alive(i)) return 0;
    const Scalar cut = theta(mu.p(i).norm());
    if (cut == 0) return 0;
    const VectorX<Scalar> diff = qbar - mu.q(i);
    return mu.weight(i, eps) * cut * VectorX<Scalar>(grad_w(diff)).norm();
  });
}

} // namespace deficient
