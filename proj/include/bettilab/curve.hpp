#ifndef BETTILAB_CURVE_HPP
#define BETTILAB_CURVE_HPP

// Group law on the Legendre curve y^2 = x (x - 1) (x - lambda), both over C
// for a fixed lambda and over Q(t) for a family lambda(t).  The exact
// version never tolerates near-equality: coincidences of x-coordinates are
// decided by rational function identity.

#include "bettilab/algebra.hpp"
#include "bettilab/numeric.hpp"

#include <optional>

namespace bettilab::curve {

using algebra::Rat;
using algebra::RationalFunction;

// Point over C; (x, y) ignored when infinite.
struct CurvePoint {
  cplx x{0.0, 0.0};
  cplx y{0.0, 0.0};
  bool infinite = false;
  static CurvePoint zero() { return CurvePoint{0.0, 0.0, true}; }
};

cplx curve_rhs(cplx lambda, cplx x);  // x (x - 1) (x - lambda)
// |y^2 - rhs| relative to the coordinate scale.
double on_curve_residual(cplx lambda, const CurvePoint& p);
CurvePoint negate(const CurvePoint& p);
CurvePoint add(cplx lambda, const CurvePoint& p, const CurvePoint& q);
CurvePoint scalar_mul(cplx lambda, long n, const CurvePoint& p);

// Point of the generic fiber, coordinates in Q(t).
struct GenericPoint {
  RationalFunction x, y;
  bool infinite = false;
  static GenericPoint zero() {
    GenericPoint p;
    p.infinite = true;
    return p;
  }
};

bool generic_on_curve(const RationalFunction& lambda, const GenericPoint& p);
GenericPoint generic_negate(const GenericPoint& p);
GenericPoint generic_add(const RationalFunction& lambda, const GenericPoint& p,
                         const GenericPoint& q);
GenericPoint generic_scalar_mul(const RationalFunction& lambda, long n,
                                const GenericPoint& p);

// Point of a single fiber over Q, for exact specialization arguments.
struct RatPoint {
  Rat x, y;
  bool infinite = false;
};
RatPoint rat_add(const Rat& lambda, const RatPoint& p, const RatPoint& q);
RatPoint rat_scalar_mul(const Rat& lambda, long n, const RatPoint& p);

// Smallest n in [1, nmax] with n p = 0, if any.  Orders are first screened
// on a few exact fibers over Q (one finite specialization of n p certifies
// that n p is not the zero section); only surviving candidates pay for the
// full computation over Q(t), where an actual torsion point stays small.
std::optional<int> torsion_order(const RationalFunction& lambda,
                                 const GenericPoint& p, int nmax);

// Evaluate a generic point at a parameter value; throws on poles of the
// coordinates (the point escapes to infinity there only formally, so the
// caller must stay away from such parameters).
CurvePoint eval_generic(const GenericPoint& p, cplx t);

}  // namespace bettilab::curve

#endif
