#pragma once

// Hamiltonian data (interaction kernel W, external potential Phi), the
// mean-field interaction W * mu evaluated through a uniform cell list, the
// symplectic velocity field and the energy functional.

#include "deficient/phase_space.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

namespace deficient {

/// W(q) = c (1 - |q|^2/a^2)^3 on |q| < a, zero elsewhere; or the zero kernel.
template <typename Scalar>
class InteractionKernel {
public:
  static InteractionKernel zero(Index d) { return InteractionKernel(d, 0, 0); }

  static InteractionKernel bump(Index d, Scalar a, Scalar amplitude) {
    if (!(a > 0)) throw std::invalid_argument("InteractionKernel: support radius must be positive");
    return InteractionKernel(d, a, amplitude);
  }

  Index dim() const { return d_; }
  bool is_zero() const { return a_ == 0 || c_ == 0; }
  Scalar support_radius() const { return a_; }
  Scalar amplitude() const { return c_; }

  /// max |grad W| = 96 |c| / (25 sqrt(5) a), attained at |q| = a / sqrt(5).
  Scalar gradient_bound() const {
    if (is_zero()) return 0;
    return Scalar(96) * std::abs(c_) / (Scalar(25) * std::sqrt(Scalar(5)) * a_);
  }

  /// B with |W| <= B and |grad W| < B.
  Scalar bound() const {
    if (is_zero()) return 0;
    return std::max(std::abs(c_), gradient_bound() * (1 + Scalar(1e-9)));
  }

  template <typename Q>
  Scalar value(const Q& q) const {
    if (is_zero()) return 0;
    const Scalar s = q.squaredNorm() / (a_ * a_);
    if (s >= 1) return 0;
    const Scalar u = 1 - s;
    return c_ * u * u * u;
  }

  template <typename Q>
  VectorX<Scalar> gradient(const Q& q) const {
    if (is_zero()) return VectorX<Scalar>::Zero(q.size());
    const Scalar a2 = a_ * a_;
    const Scalar s = q.squaredNorm() / a2;
    if (s >= 1) return VectorX<Scalar>::Zero(q.size());
    const Scalar u = 1 - s;
    return (-6 * c_ * u * u / a2) * q;
  }

  template <typename Q>
  MatrixX<Scalar> hessian(const Q& q) const {
    const Index d = q.size();
    if (is_zero()) return MatrixX<Scalar>::Zero(d, d);
    const Scalar a2 = a_ * a_;
    const Scalar s = q.squaredNorm() / a2;
    if (s >= 1) return MatrixX<Scalar>::Zero(d, d);
    const Scalar u = 1 - s;
    MatrixX<Scalar> H = (-6 * c_ * u * u / a2) * MatrixX<Scalar>::Identity(d, d);
    H.noalias() += (24 * c_ * u / (a2 * a2)) * (q * q.transpose());
    return H;
  }

private:
  InteractionKernel(Index d, Scalar a, Scalar c) : d_(d), a_(a), c_(c) {
    if (d < 1) throw std::invalid_argument("InteractionKernel: dimension must be >= 1");
  }

  Index d_;
  Scalar a_;
  Scalar c_;
};

/// Phi(q) = k2 |q|^2 / 2 + k4 |q|^gamma (radial).
template <typename Scalar>
struct PowerPotential {
  Scalar k2 = 0;
  Scalar k4 = 0;
  Scalar gamma = 4;
};

/// Phi(q) = sum_i k_i q_i^2 / 2 (not radial unless all k_i agree).
template <typename Scalar>
struct AnisotropicHarmonic {
  VectorX<Scalar> stiffness;
};

template <typename Scalar>
class ExternalPotential {
public:
  using Family = std::variant<PowerPotential<Scalar>, AnisotropicHarmonic<Scalar>>;

  static ExternalPotential zero(Index d) { return power(d, 0, 0, 4); }

  static ExternalPotential power(Index d, Scalar k2, Scalar k4, Scalar gamma) {
    if (!(gamma >= 2)) throw std::invalid_argument("ExternalPotential: gamma must be >= 2");
    return ExternalPotential(d, PowerPotential<Scalar>{k2, k4, gamma});
  }

  static ExternalPotential anisotropic(VectorX<Scalar> stiffness) {
    const Index d = stiffness.size();
    return ExternalPotential(d, AnisotropicHarmonic<Scalar>{std::move(stiffness)});
  }

  Index dim() const { return d_; }
  const Family& family() const { return family_; }
  bool radial() const { return std::holds_alternative<PowerPotential<Scalar>>(family_); }

  template <typename Q>
  Scalar value(const Q& q) const {
    if (const auto* pw = std::get_if<PowerPotential<Scalar>>(&family_)) {
      const Scalar r = q.norm();
      return pw->k2 * r * r / 2 + pw->k4 * std::pow(r, pw->gamma);
    }
    const auto& an = std::get<AnisotropicHarmonic<Scalar>>(family_);
    return (an.stiffness.array() * q.array().square()).sum() / 2;
  }

  template <typename Q>
  VectorX<Scalar> gradient(const Q& q) const {
    if (const auto* pw = std::get_if<PowerPotential<Scalar>>(&family_)) {
      const Scalar r = q.norm();
      return (pw->k2 + pw->k4 * pw->gamma * std::pow(r, pw->gamma - 2)) * q;
    }
    const auto& an = std::get<AnisotropicHarmonic<Scalar>>(family_);
    return (an.stiffness.array() * q.array()).matrix();
  }

  /// d Phi / d r for radial families; throws otherwise.
  Scalar radial_derivative(Scalar r) const {
    const auto* pw = std::get_if<PowerPotential<Scalar>>(&family_);
    if (pw == nullptr) throw std::logic_error("ExternalPotential: radial derivative of a non-radial potential");
    return pw->k2 * r + pw->k4 * pw->gamma * std::pow(r, pw->gamma - 1);
  }

  /// B1 and b2 with |Phi(q)| <= B1 |q|^b2 for |q| >= 1.
  Scalar growth_constant() const {
    if (const auto* pw = std::get_if<PowerPotential<Scalar>>(&family_)) return std::abs(pw->k2) / 2 + std::abs(pw->k4);
    return std::get<AnisotropicHarmonic<Scalar>>(family_).stiffness.cwiseAbs().maxCoeff() / 2;
  }

  Scalar growth_exponent() const {
    if (const auto* pw = std::get_if<PowerPotential<Scalar>>(&family_)) return std::max(Scalar(2), pw->gamma);
    return 2;
  }

private:
  ExternalPotential(Index d, Family f) : d_(d), family_(std::move(f)) {
    if (d < 1) throw std::invalid_argument("ExternalPotential: dimension must be >= 1");
  }

  Index d_;
  Family family_;
};

template <typename Scalar>
struct HamiltonianModel {
  InteractionKernel<Scalar> kernel;
  ExternalPotential<Scalar> potential;

  HamiltonianModel(InteractionKernel<Scalar> w, ExternalPotential<Scalar> phi)
      : kernel(std::move(w)), potential(std::move(phi)) {
    if (kernel.dim() != potential.dim()) throw std::invalid_argument("HamiltonianModel: dimension mismatch");
  }

  Index dim() const { return potential.dim(); }
};

using Kernel = InteractionKernel<double>;
using Potential = ExternalPotential<double>;
using Model = HamiltonianModel<double>;

// ---------------------------------------------------------------------------
// Uniform cell list over a set of positions.

template <typename Scalar>
class CellList {
public:
  /// positions: d x M; every column is indexed by its column number.
  CellList(MatrixX<Scalar> positions, Scalar cell) : d_(positions.rows()), cell_(cell), pos_(std::move(positions)) {
    if (!(cell > 0)) throw std::invalid_argument("CellList: cell size must be positive");
    const Index m = pos_.cols();
    std::vector<std::int64_t> raw(static_cast<std::size_t>(m * d_));
    for (Index j = 0; j < m; ++j)
      for (Index k = 0; k < d_; ++k)
        raw[static_cast<std::size_t>(j * d_ + k)] = cell_coordinate(pos_(k, j));
    order_.resize(static_cast<std::size_t>(m));
    for (Index j = 0; j < m; ++j) order_[static_cast<std::size_t>(j)] = j;
    std::stable_sort(order_.begin(), order_.end(), [&](Index x, Index y) {
      return std::lexicographical_compare(raw.begin() + x * d_, raw.begin() + (x + 1) * d_, raw.begin() + y * d_,
                                          raw.begin() + (y + 1) * d_);
    });
    keys_.resize(raw.size());
    for (std::size_t s = 0; s < order_.size(); ++s)
      std::copy_n(raw.begin() + order_[s] * d_, d_, keys_.begin() + static_cast<std::ptrdiff_t>(s) * d_);
  }

  Index dim() const { return d_; }
  const MatrixX<Scalar>& positions() const { return pos_; }

  /// Columns j with |q - pos_j| < radius (radius <= cell), in ascending order.
  template <typename Q>
  void neighbors(const Q& q, Scalar radius, std::vector<Index>& out) const {
    out.clear();
    std::vector<std::int64_t> base(static_cast<std::size_t>(d_)), target(static_cast<std::size_t>(d_));
    for (Index k = 0; k < d_; ++k) base[static_cast<std::size_t>(k)] = cell_coordinate(q[k]);
    const Scalar r2 = radius * radius;
    Index offsets = 1;
    for (Index k = 0; k < d_; ++k) offsets *= 3;
    for (Index code = 0; code < offsets; ++code) {
      Index c = code;
      for (Index k = 0; k < d_; ++k) {
        target[static_cast<std::size_t>(k)] = base[static_cast<std::size_t>(k)] + (c % 3) - 1;
        c /= 3;
      }
      auto [lo, hi] = equal_range(target);
      for (std::size_t s = lo; s < hi; ++s) {
        const Index j = order_[s];
        if ((pos_.col(j) - q).squaredNorm() < r2) out.push_back(j);
      }
    }
    std::sort(out.begin(), out.end());
  }

private:
  std::int64_t cell_coordinate(Scalar x) const {
    return static_cast<std::int64_t>(std::floor(x / cell_));
  }

  int compare(std::size_t slot, const std::vector<std::int64_t>& key) const {
    for (Index k = 0; k < d_; ++k) {
      const std::int64_t a = keys_[slot * static_cast<std::size_t>(d_) + static_cast<std::size_t>(k)];
      const std::int64_t b = key[static_cast<std::size_t>(k)];
      if (a != b) return a < b ? -1 : 1;
    }
    return 0;
  }

  std::pair<std::size_t, std::size_t> equal_range(const std::vector<std::int64_t>& key) const {
    std::size_t lo = 0, hi = order_.size();
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (compare(mid, key) < 0) lo = mid + 1; else hi = mid;
    }
    std::size_t end = lo;
    while (end < order_.size() && compare(end, key) == 0) ++end;
    return {lo, end};
  }

  Index d_;
  Scalar cell_;
  MatrixX<Scalar> pos_;
  std::vector<Index> order_;
  std::vector<std::int64_t> keys_;
};

/// Snapshot evaluator of (W * mu, grad W * mu) with decayed weights at a fixed eps.
/// Sums run over neighbors in particle order, so they reproduce the all-pairs sum.
template <typename Scalar>
class InteractionField {
public:
  struct Value {
    Scalar potential;
    VectorX<Scalar> gradient;
  };

  InteractionField(const InteractionKernel<Scalar>& kernel, const ParticleMeasure<Scalar>& mu, Scalar eps)
      : kernel_(kernel), d_(mu.dim()) {
    if (kernel_.is_zero()) return;
    std::vector<Index> members;
    for (Index i = 0; i < mu.size(); ++i)
      if (mu.weight(i, eps) > 0) members.push_back(i);
    MatrixX<Scalar> pos(d_, static_cast<Index>(members.size()));
    weights_.resize(static_cast<Index>(members.size()));
    for (std::size_t m = 0; m < members.size(); ++m) {
      pos.col(static_cast<Index>(m)) = mu.q(members[m]);
      weights_[static_cast<Index>(m)] = mu.weight(members[m], eps);
    }
    cells_.emplace(std::move(pos), kernel_.support_radius());
  }

  const InteractionKernel<Scalar>& kernel() const { return kernel_; }

  template <typename Q>
  Value operator()(const Q& qbar) const {
    Value v{0, VectorX<Scalar>::Zero(d_)};
    if (!cells_) return v;
    thread_local std::vector<Index> scratch;
    cells_->neighbors(qbar, kernel_.support_radius(), scratch);
    for (Index j : scratch) {
      const VectorX<Scalar> diff = qbar - cells_->positions().col(j);
      v.potential += weights_[j] * kernel_.value(diff);
      v.gradient += weights_[j] * kernel_.gradient(diff);
    }
    return v;
  }

  template <typename Q>
  VectorX<Scalar> gradient(const Q& qbar) const {
    return (*this)(qbar).gradient;
  }

private:
  InteractionKernel<Scalar> kernel_;
  Index d_;
  VectorX<Scalar> weights_;
  std::optional<CellList<Scalar>> cells_;
};

template <typename Scalar, typename Q>
typename InteractionField<Scalar>::Value interaction_field(const HamiltonianModel<Scalar>& model,
                                                           const ParticleMeasure<Scalar>& mu, const Q& qbar,
                                                           Scalar eps) {
  return InteractionField<Scalar>(model.kernel, mu, eps)(qbar);
}

/// (pdot, qdot) = (-grad Phi(q) - grad W * mu(q), p).
template <typename Scalar>
PhasePoint<Scalar> velocity(const HamiltonianModel<Scalar>& model, const InteractionField<Scalar>& field,
                            const PhasePoint<Scalar>& x) {
  VectorX<Scalar> pdot = -model.potential.gradient(x.q);
  if (!model.kernel.is_zero()) pdot -= field.gradient(x.q);
  return {std::move(pdot), x.p};
}

template <typename Scalar>
PhasePoint<Scalar> velocity(const HamiltonianModel<Scalar>& model, const ParticleMeasure<Scalar>& mu,
                            const PhasePoint<Scalar>& x, Scalar eps) {
  return velocity(model, InteractionField<Scalar>(model.kernel, mu, eps), x);
}

/// 1/2 sum w|p|^2 + 1/2 sum w (W * mu)(q) + sum w Phi(q), with w = w0 exp(-eps S).
template <typename Scalar>
Scalar hamiltonian_energy(const HamiltonianModel<Scalar>& model, const ParticleMeasure<Scalar>& mu, Scalar eps) {
  const InteractionField<Scalar> field(model.kernel, mu, eps);
  const bool interacting = !model.kernel.is_zero();
  return reduce_particles(mu, [&](Index i) -> Scalar {
    const Scalar w = mu.weight(i, eps);
    if (w == 0) return 0;
    Scalar e = mu.p(i).squaredNorm() / 2 + model.potential.value(mu.q(i));
    if (interacting) e += field(mu.q(i)).potential / 2;
    return w * e;
  });
}

} // namespace deficient
