#pragma once

// Dormand-Prince 5(4) with FSAL, standard step control and the 4th-order dense
// output of Hairer's DOPRI5 (contd5).

#include "deficient/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace deficient {

template <typename Scalar>
struct DenseSegment {
  Scalar t0 = 0;
  Scalar h = 0;
  VectorX<Scalar> r1, r2, r3, r4, r5;

  Scalar t1() const { return t0 + h; }

  VectorX<Scalar> operator()(Scalar t) const {
    const Scalar th = h == 0 ? Scalar(0) : (t - t0) / h;
    const Scalar th1 = 1 - th;
    return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
  }
};

struct Dp5Options {
  double rtol = 1e-9;
  double atol = 1e-9;
  double h_min = 0;
  double h_init = 0;  // 0: automatic guess
  std::int64_t max_steps = 50'000'000;
};

enum class Dp5Outcome { Completed, Stopped, StepCollapse, NonFinite };

template <typename Scalar>
struct Dp5Result {
  Dp5Outcome outcome = Dp5Outcome::Completed;
  Scalar t = 0;
  VectorX<Scalar> y;
  VectorX<Scalar> f;  // rhs at (t, y)
  Scalar h_next = 0;  // controller proposal, usable as the next h_init
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
};

namespace dp5 {
// Butcher tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                        a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

template <typename Scalar>
Scalar scaled_rms(const VectorX<Scalar>& v, const VectorX<Scalar>& y0, const VectorX<Scalar>& y1,
                  const Dp5Options& opt) {
  Scalar acc = 0;
  for (Index i = 0; i < v.size(); ++i) {
    const Scalar sc = Scalar(opt.atol) + Scalar(opt.rtol) * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const Scalar r = v[i] / sc;
    acc += r * r;
  }
  return std::sqrt(acc / Scalar(v.size()));
}
} // namespace dp5

/// Integrates y' = f(t, y) from t0 to t1 > t0. on_step(segment, y1, f1) is
/// called after every accepted step and may return false to stop early.
template <typename Scalar, typename Rhs, typename OnStep>
Dp5Result<Scalar> dp5_integrate(Rhs&& f, Scalar t0, VectorX<Scalar> y0, Scalar t1, const Dp5Options& opt,
                                OnStep&& on_step) {
  using namespace dp5;
  using Vec = VectorX<Scalar>;
  Dp5Result<Scalar> res;
  res.t = t0;
  Vec k1 = f(t0, y0);
  if (!k1.allFinite() || !y0.allFinite()) {
    res.outcome = Dp5Outcome::NonFinite;
    res.y = std::move(y0);
    res.f = std::move(k1);
    return res;
  }
  const Scalar span = t1 - t0;
  if (!(span > 0)) {
    res.y = std::move(y0);
    res.f = std::move(k1);
    return res;
  }

  // Initial step guess.
  Scalar h = std::min(Scalar(opt.h_init), span);
  if (!(h > 0)) {
    const Scalar dn0 = scaled_rms(y0, y0, y0, opt);
    const Scalar dn1 = scaled_rms(k1, y0, y0, opt);
    Scalar h0 = (dn0 < 1e-5 || dn1 < 1e-5) ? Scalar(1e-6) : Scalar(0.01) * dn0 / dn1;
    h0 = std::min(h0, span);
    const Vec y1 = y0 + h0 * k1;
    const Vec f1 = f(t0 + h0, y1);
    Scalar dn2 = f1.allFinite() ? scaled_rms(Vec(f1 - k1), y0, y0, opt) / h0 : Scalar(1e300);
    const Scalar m = std::max(dn1, dn2);
    const Scalar h1 = m <= 1e-15 ? std::max(Scalar(1e-6), h0 * Scalar(1e-3)) : std::pow(Scalar(0.01) / m, Scalar(0.2));
    h = std::min({Scalar(100) * h0, h1, span});
  }

  Scalar t = t0;
  Vec y = std::move(y0);
  Vec k2, k3, k4, k5, k6, k7, ytmp, ynew;
  std::int64_t steps = 0;
  while (t < t1) {
    if (++steps > opt.max_steps) {
      res.outcome = Dp5Outcome::StepCollapse;
      break;
    }
    if (h < Scalar(opt.h_min)) {
      res.outcome = Dp5Outcome::StepCollapse;
      break;
    }
    bool last = false;
    Scalar hs = h;
    if (t + hs >= t1 || t1 - (t + hs) < Scalar(1e-14) * std::abs(t1)) {
      hs = t1 - t;
      last = true;
    }

    bool finite = true;
    ytmp = y + hs * a21 * k1;
    k2 = f(t + c2 * hs, ytmp);
    ytmp = y + hs * (a31 * k1 + a32 * k2);
    k3 = f(t + c3 * hs, ytmp);
    ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
    k4 = f(t + c4 * hs, ytmp);
    ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    k5 = f(t + c5 * hs, ytmp);
    ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    k6 = f(t + hs, ytmp);
    ynew = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    finite = ynew.allFinite();
    if (finite) {
      k7 = f(t + hs, ynew);
      finite = k7.allFinite();
    }
    Scalar err = Scalar(1e300);
    if (finite) {
      const Vec e = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      err = scaled_rms(e, y, ynew, opt);
      if (!std::isfinite(err)) err = Scalar(1e300);
    }

    if (err > 1) {
      ++res.rejected;
      const Scalar fac = finite ? std::max(Scalar(0.2), Scalar(0.9) * std::pow(err, Scalar(-0.2))) : Scalar(0.2);
      h = hs * fac;
      continue;
    }

    DenseSegment<Scalar> seg;
    seg.t0 = t;
    seg.h = hs;
    seg.r1 = y;
    seg.r2 = ynew - y;
    seg.r3 = hs * k1 - seg.r2;
    seg.r4 = seg.r2 - hs * k7 - seg.r3;
    seg.r5 = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);

    ++res.accepted;
    t = last ? t1 : t + hs;
    y.swap(ynew);
    k1.swap(k7);
    const bool go_on = on_step(static_cast<const DenseSegment<Scalar>&>(seg), static_cast<const Vec&>(y),
                               static_cast<const Vec&>(k1));
    if (!go_on) {
      res.outcome = Dp5Outcome::Stopped;
      break;
    }
    const Scalar fac = std::min(Scalar(5), std::max(Scalar(0.2), Scalar(0.9) * std::pow(std::max(err, Scalar(1e-30)), Scalar(-0.2))));
    h = last ? std::max(h, hs * fac) : hs * fac;
  }
  res.t = t;
  res.y = std::move(y);
  res.f = std::move(k1);
  res.h_next = h;
  return res;
}

} // namespace deficient
