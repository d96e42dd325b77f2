#ifndef BETTILAB_UHP_HPP
#define BETTILAB_UHP_HPP

// Geometry of the universal family over the upper half plane: the affine
// group action on (tau, z), Betti coordinates, the invariant semi-definite
// form mu and its potential, the projectivized-tangent invariant Psi, the
// hyperbolic base form, and the odd theta function with its metric.

#include "bettilab/numeric.hpp"

#include <array>
#include <limits>

namespace bettilab::uhp {

// Element (A, (alpha, beta)) of SL(2,R) semidirect R^2.  A acts by Moebius
// transformation on tau and by 1/(c tau + d) on z; the translation part then
// shifts z by alpha + beta * tau' with tau' already transformed.
struct GroupElement {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;
  double alpha = 0.0, beta = 0.0;

  double det() const { return a * d - b * c; }
};

struct FamilyPoint {
  cplx tau;  // Im tau > 0
  cplx z;
};

struct Tangent {
  cplx v_tau;
  cplx v_z;
};

// Betti pair (b1, b2) with z = b1 + b2 * tau.
struct BettiPair {
  double b1 = 0.0, b2 = 0.0;
};

FamilyPoint act(const GroupElement& g, const FamilyPoint& p);

// Differential of the action at p applied to v.
Tangent act_tangent(const GroupElement& g, const FamilyPoint& p,
                    const Tangent& v);

BettiPair betti_from(const FamilyPoint& p);

// Potential (Im z)^2 / Im tau of the invariant form mu.
double mu_potential(const FamilyPoint& p);

// Complex Hessian of the potential with respect to (tau, z):
//   [ b2^2   -b2 ]
//   [ -b2     1  ]  / (2 Im tau).
// Positive semi-definite of rank one; annihilates the horizontal direction
// (1, b2) spanned by the curves z = a + b tau.
struct MuMatrix {
  std::array<std::array<double, 2>, 2> m;
  double quad(const Tangent& v) const;  // v^dagger M v
};
MuMatrix mu_matrix(const FamilyPoint& p);

// |v_z Im tau - v_tau Im z|^2 / (|v_tau|^2 Im tau), the ratio of the mu-norm
// to the base hyperbolic norm on the projectivized tangent line [v].
// Returns +infinity when v_tau = 0 and the numerator does not vanish.
double psi(const FamilyPoint& p, const Tangent& v);

// Coefficient of i dtau ^ dtaubar in the base hyperbolic form: 1/(4 Im^2 tau).
double omega_density(cplx tau);

// Odd Jacobi theta value; the series is truncated once a geometric tail bound
// drops below tail_bound.  Im tau below 0.05 is rejected, callers reduce tau
// first.
cplx theta11(cplx tau, cplx z, double tail_bound = 1e-14);

// Metric weight (Im tau)^4 exp(-16 pi (Im z)^2 / Im tau) against which theta
// has bounded norm.
double jacobi_metric_h(const FamilyPoint& p);

}  // namespace bettilab::uhp

#endif
