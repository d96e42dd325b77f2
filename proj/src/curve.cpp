#include "bettilab/curve.hpp"

#include <algorithm>
#include <cmath>

namespace bettilab::curve {

cplx curve_rhs(cplx lambda, cplx x) { return x * (x - 1.0) * (x - lambda); }

double on_curve_residual(cplx lambda, const CurvePoint& p) {
  if (p.infinite) return 0.0;
  double scale = std::max({1.0, std::abs(p.x), std::abs(p.y), std::abs(lambda)});
  return std::abs(p.y * p.y - curve_rhs(lambda, p.x)) / (scale * scale * scale);
}

CurvePoint negate(const CurvePoint& p) {
  if (p.infinite) return p;
  return CurvePoint{p.x, -p.y, false};
}

CurvePoint add(cplx lambda, const CurvePoint& p, const CurvePoint& q) {
  if (p.infinite) return q;
  if (q.infinite) return p;
  double scale = std::max({1.0, std::abs(p.x), std::abs(q.x), std::abs(lambda)});
  cplx s;
  if (std::abs(p.x - q.x) <= 1e-11 * scale) {
    if (std::abs(p.y + q.y) <= 1e-9 * std::max(1.0, std::abs(p.y)))
      return CurvePoint::zero();
    // Tangent slope f'(x) / (2y) for f = x^3 - (1+lambda) x^2 + lambda x.
    s = (3.0 * p.x * p.x - 2.0 * (1.0 + lambda) * p.x + lambda) / (2.0 * p.y);
  } else {
    s = (q.y - p.y) / (q.x - p.x);
  }
  // x1 + x2 + x3 equals s^2 + (1 + lambda), the negated quadratic
  // coefficient after intersecting with the chord.
  cplx x3 = s * s + (1.0 + lambda) - p.x - q.x;
  cplx y3 = -(p.y + s * (x3 - p.x));
  return CurvePoint{x3, y3, false};
}

CurvePoint scalar_mul(cplx lambda, long n, const CurvePoint& p) {
  CurvePoint base = p;
  if (n < 0) {
    base = negate(base);
    n = -n;
  }
  CurvePoint acc = CurvePoint::zero();
  while (n > 0) {
    if (n & 1) acc = add(lambda, acc, base);
    base = add(lambda, base, base);
    n >>= 1;
  }
  return acc;
}

namespace {

RationalFunction rf_const(long c) {
  return RationalFunction::constant(Rat(c));
}

}  // namespace

bool generic_on_curve(const RationalFunction& lambda, const GenericPoint& p) {
  if (p.infinite) return true;
  RationalFunction rhs = p.x * (p.x - rf_const(1)) * (p.x - lambda);
  return p.y * p.y == rhs;
}

GenericPoint generic_negate(const GenericPoint& p) {
  if (p.infinite) return p;
  GenericPoint q;
  q.x = p.x;
  q.y = -p.y;
  return q;
}

GenericPoint generic_add(const RationalFunction& lambda, const GenericPoint& p,
                         const GenericPoint& q) {
  if (p.infinite) return q;
  if (q.infinite) return p;
  RationalFunction s;
  if (p.x == q.x) {
    if ((p.y + q.y).is_zero()) return GenericPoint::zero();
    RationalFunction fprime = rf_const(3) * p.x * p.x -
                              rf_const(2) * (rf_const(1) + lambda) * p.x +
                              lambda;
    s = fprime / (rf_const(2) * p.y);
  } else {
    s = (q.y - p.y) / (q.x - p.x);
  }
  GenericPoint r;
  r.x = s * s + rf_const(1) + lambda - p.x - q.x;
  r.y = -(p.y + s * (r.x - p.x));
  return r;
}

GenericPoint generic_scalar_mul(const RationalFunction& lambda, long n,
                                const GenericPoint& p) {
  GenericPoint base = p;
  if (n < 0) {
    base = generic_negate(base);
    n = -n;
  }
  GenericPoint acc = GenericPoint::zero();
  while (n > 0) {
    if (n & 1) acc = generic_add(lambda, acc, base);
    base = generic_add(lambda, base, base);
    n >>= 1;
  }
  return acc;
}

RatPoint rat_add(const Rat& lambda, const RatPoint& p, const RatPoint& q) {
  if (p.infinite) return q;
  if (q.infinite) return p;
  Rat s;
  if (p.x == q.x) {
    if (p.y == -q.y) return RatPoint{Rat(0), Rat(0), true};
    s = (3 * p.x * p.x - 2 * (1 + lambda) * p.x + lambda) / (2 * p.y);
  } else {
    s = (q.y - p.y) / (q.x - p.x);
  }
  Rat x3 = s * s + 1 + lambda - p.x - q.x;
  Rat y3 = -(p.y + s * (x3 - p.x));
  return RatPoint{x3, y3, false};
}

RatPoint rat_scalar_mul(const Rat& lambda, long n, const RatPoint& p) {
  RatPoint base = p;
  if (n < 0) {
    base.y = -base.y;
    n = -n;
  }
  RatPoint acc{Rat(0), Rat(0), true};
  while (n > 0) {
    if (n & 1) acc = rat_add(lambda, acc, base);
    base = rat_add(lambda, base, base);
    n >>= 1;
  }
  return acc;
}

std::optional<int> torsion_order(const RationalFunction& lambda,
                                 const GenericPoint& p, int nmax) {
  if (p.infinite) return 1;

  const Rat samples[5] = {Rat(5, 7), Rat(3, 2), Rat(11, 13), Rat(-4, 9),
                          Rat(7, 5)};
  std::vector<bool> candidate(nmax + 1, true);
  int used = 0;
  for (const Rat& t0 : samples) {
    if (used >= 3) break;
    auto lam = lambda.eval(t0);
    if (!lam || *lam == 0 || *lam == 1) continue;
    auto x0 = p.x.eval(t0), y0 = p.y.eval(t0);
    if (!x0 || !y0) continue;
    ++used;
    RatPoint base{*x0, *y0, false};
    RatPoint acc = base;
    if (base.infinite) continue;
    for (int n = 2; n <= nmax; ++n) {
      acc = rat_add(*lam, acc, base);
      if (!acc.infinite) candidate[n] = false;
    }
  }
  if (used == 0)
    throw numeric_error("torsion_order: no usable specialization fiber");

  for (int n = 2; n <= nmax; ++n) {
    if (!candidate[n]) continue;
    if (generic_scalar_mul(lambda, n, p).infinite) return n;
  }
  return std::nullopt;
}

CurvePoint eval_generic(const GenericPoint& p, cplx t) {
  if (p.infinite) return CurvePoint::zero();
  return CurvePoint{p.x.eval(t), p.y.eval(t), false};
}

}  // namespace bettilab::curve
