#ifndef BETTILAB_PERIODS_HPP
#define BETTILAB_PERIODS_HPP

// Period lattices of the Legendre family y^2 = x (x - 1) (x - lambda):
// fast evaluation through the optimal-branch complex AGM, an independent
// contour-integral oracle, the elliptic logarithm of a point, and analytic
// continuation of a basis along paths in the lambda plane.  The continuation
// never drifts: each step re-expresses the carried basis as an exact integer
// combination of a freshly computed principal basis.

#include "bettilab/curve.hpp"
#include "bettilab/numeric.hpp"

#include <array>
#include <utility>
#include <vector>

namespace bettilab::periods {

// Basis of the period lattice, oriented so Im(omega2/omega1) > 0.
struct PeriodBasis {
  cplx omega1{0.0, 0.0};
  cplx omega2{0.0, 0.0};

  cplx tau() const { return omega2 / omega1; }
  // Real coordinates (m, n) with v = m omega1 + n omega2.
  Vec2 lattice_coords(cplx v) const;
  // Translate by a lattice vector into the centered fundamental cell
  // (coordinates in [-1/2, 1/2)).
  cplx reduce(cplx z) const;
};

// Optimal-branch arithmetic-geometric mean; the geometric-mean sign is
// chosen each step so the iterates stay closest, with ties broken upward.
cplx agm(cplx a, cplx b);

// Period basis at lambda from AGM: omega1 = 2 pi / agm(1, sqrt(1-lambda)),
// omega2 = 2 pi i / agm(1, sqrt(lambda)).  Rejects lambda in {0, 1} and
// real lambda outside (0, 1), where the principal square root sits on its
// branch cut.
PeriodBasis periods_agm(cplx lambda);
// Same, for real lambda outside (0, 1), taking the limit from above the cut.
PeriodBasis periods_agm_above(double lambda);

// Independent basis from contour integrals of dx/y between branch points,
// with endpoint square-root substitutions and branch tracking.
struct OracleResult {
  PeriodBasis basis;
  double err = 0.0;  // accumulated quadrature error estimate
  long evaluations = 0;
  bool converged = true;
};
OracleResult periods_oracle(cplx lambda, double tol = 1e-12);

// Integer change of basis M with a = M b, entry residual, and determinant.
struct Rebase {
  std::array<std::array<long, 2>, 2> m{{{1, 0}, {0, 1}}};
  double residual = 0.0;  // largest distance of a real coefficient from Z
  long det = 1;
};
Rebase rebase(const PeriodBasis& a, const PeriodBasis& b);
bool same_lattice(const PeriodBasis& a, const PeriodBasis& b, double tol);

// Continue the basis `start` at polyline.front() analytically along the
// polyline.  Steps subdivide until the carried basis rounds cleanly to an
// integer combination of the principal basis at the next sample.
PeriodBasis continue_along(const std::vector<cplx>& polyline,
                           const PeriodBasis& start);

// Elliptic logarithm: integral of dx/y from infinity to P, well defined
// modulo the period lattice.  The path runs through a far circle into the
// chart at infinity and then dodges branch points in the x plane.
cplx elliptic_log(cplx lambda, const curve::CurvePoint& p, double tol = 1e-12);

// d tau / d lambda expressed through the basis (covariant: any basis of the
// lattice gives the derivative of its own tau).
cplx dtau_dlambda(cplx lambda, const PeriodBasis& basis);

// Integer Moebius transformation acting on the upper half plane.
struct Mobius {
  long a = 1, b = 0, c = 0, d = 1;
  cplx apply(cplx tau) const;
  Mobius compose(const Mobius& o) const;  // this after o
};

// Reduce into the fundamental domain of the level-two congruence group
// { |Re tau| <= 1, |2 tau +- 1| >= 1 }; returns the reduced point and the
// transformation applied.
std::pair<cplx, Mobius> reduce_gamma2(cplx tau);
// Reduce into { |Re tau| <= 1/2, |tau| >= 1 } under the full modular group.
std::pair<cplx, Mobius> reduce_sl2(cplx tau);
// Equivalence under the level-two group, tolerant of boundary gluing.
bool gamma2_equivalent(cplx t1, cplx t2, double tol);

}  // namespace bettilab::periods

#endif
