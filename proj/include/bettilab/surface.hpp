#ifndef BETTILAB_SURFACE_HPP
#define BETTILAB_SURFACE_HPP

// An elliptic surface over the projective line in Legendre form: a
// classifying map lambda = r(t) together with an algebraic section
// (x(t), y(t)) of y^2 = x (x - 1) (x - lambda).  This module does the exact
// bookkeeping: parsing and validation, the set of bad fibers, ramification
// of r, the degree identities the multiplicity census is checked against,
// toroidal coordinates near cusps, and local Taylor models of lambda at the
// cusps with exact vanishing orders.  Floating point enters only at root
// isolation and in the Taylor shifts.

#include "bettilab/algebra.hpp"
#include "bettilab/curve.hpp"
#include "bettilab/numeric.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace bettilab::surface {

using algebra::Poly;
using algebra::Rat;
using algebra::RationalFunction;

// Point of the base P^1; `t` is meaningful only when `infinite` is false.
struct BasePoint {
  cplx t{0.0, 0.0};
  bool infinite = false;

  static BasePoint at_infinity() { return BasePoint{cplx(0.0, 0.0), true}; }
};
bool same_point(const BasePoint& a, const BasePoint& b, double tol);

struct SurfaceSpec {
  int level = 2;
  RationalFunction r;           // classifying map t -> lambda
  curve::GenericPoint section;  // (x(t), y(t)) over Q(t)
  std::string label;
};

// Parse error with 1-based position in the input text.
class parse_error : public std::runtime_error {
 public:
  parse_error(int line, int column, const std::string& what);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_, column_;
};

// Plain-text surface description: `key = value` lines, '#' comments,
// whitespace-insensitive.  Keys: label, level, r.num, r.den, section.x.num,
// section.x.den, section.y.num, section.y.den.  Coefficient lists are
// comma-separated exact rationals ("p/q" or integers), constant term first.
// Denominators default to 1 when omitted.  Syntax only; call
// validate_section for the curve identity.
SurfaceSpec parse_surface(std::istream& in);
SurfaceSpec parse_surface_text(const std::string& text);
SurfaceSpec parse_surface_file(const std::string& path);

// Throws unless y^2 - x (x - 1) (x - r) vanishes identically over Q(t); the
// message carries the residual as a rational function in lowest terms.
void validate_section(const SurfaceSpec& spec);

// Which puncture of the lambda line the fiber over a bad point reaches.
enum class FiberTarget { zero, one, infinity };
const char* fiber_target_name(FiberTarget f);

struct BadPoint {
  BasePoint point;
  FiberTarget target = FiberTarget::zero;
  int multiplicity = 1;  // in the preimage divisor of {0, 1, infinity}
  double residual = 0.0;  // root certification residual, 0 for exact points
};

// All points of B over {0, 1, infinity}, including t = infinity when r
// sends it there.  Multiplicities are exact; each fiber's multiplicities
// sum to deg r.
std::vector<BadPoint> bad_reduction_set(const SurfaceSpec& spec);

struct RamPoint {
  BasePoint point;
  int index = 1;  // local ramification index of r, listed only when >= 2
  bool in_s = false;
  double residual = 0.0;
};

struct RamificationData {
  std::vector<RamPoint> points;  // every point with index >= 2
  int deg_r_good = 0;  // sum of (index - 1) over points of good reduction
  int total = 0;       // sum of (index - 1) over all points; equals 2d - 2
};

// Ramification of r from the exact vanishing of num' den - num den', split
// off the pole and bad-fiber factors by gcd.  Throws if the genus-zero
// Hurwitz count total != 2 deg(r) - 2 (impossible for consistent input).
RamificationData ramification(const SurfaceSpec& spec);

// Cusp count of the level-k modular curve: (k^2 / 2) prod_{p | k} (1 - 1/p^2)
// for k >= 3, and 3 for k = 2 (the lambda line has cusps 0, 1, infinity).
long nu_infinity(int k);

// The exact degree arithmetic that the census totals are compared against.
// `predicted_total` is half the degree of K_B (x) O(S) (x) R, the predicted
// value of Sum_b (m_b - 1); it comes in two readings because |S| can be
// counted as the reduced divisor or as the preimage divisor of {0,1,inf}.
struct DegreeReport {
  int d = 0;           // degree of the classifying map
  int genus_base = 0;  // base is P^1
  int level = 2;
  int genus_x = 0;  // genus of the level curve, supplied by the caller
  int s_reduced = 0;     // number of distinct bad points
  int s_preimage = 0;    // degree of the preimage divisor of {0,1,infinity}
  int deg_r_good = 0;    // sum of (r_b - 1) over good points
  long nu_inf = 0;
  Rat area_term;  // d (genus_x - 1 + nu_inf / 2), the hyperbolic area count
  Rat predicted_total_reduced;   // (2 g_B - 2 + s_reduced + deg_r_good) / 2
  Rat predicted_total_preimage;  // same with s_preimage
  bool predicted_total_integer = false;  // reduced reading is an integer
  bool readings_agree = false;
  // Upper bounds for the number of good points with m_b >= 2, through the
  // two published routes; `bound_rhs` subtracts the area term,
  // `bound_rhs_pullback` subtracts the degree of the pulled-back relative
  // cotangent sheaf recovered from the census degree arithmetic.  The two
  // agree whenever the Hurwitz and cusp counts are consistent.
  Rat bound_rhs;           // 2 g_B - 2 - area_term + s_reduced
  Rat bound_rhs_pullback;  // 2 g_B - 2 - (predicted_total_reduced
                           //              - deg_r_good) + s_reduced
  Rat bound_averaged;      // g_B - 1 + s_reduced / 2 + deg_r_good / 2
  bool forms_agree = false;  // bound_rhs == bound_rhs_pullback
};
DegreeReport degree_report(const SurfaceSpec& spec, int level, int genus_x);

// Toroidal coordinates of (tau, z) in the band-n chart at level k:
//   zeta = e^{2 pi i (z - n tau / k)},  xi = e^{2 pi i ((n+1) tau / k - z)},
// so that xi zeta = e^{2 pi i tau / k} and xi^n zeta^{n+1} = e^{2 pi i z}.
// n is an actual integer (the band floor(k b2) or round(k b2) of the tracked
// z-representative), not a residue.
struct Toroidal {
  cplx xi, zeta;
};
Toroidal toroidal_coords(cplx tau, cplx z, int k, long n);

// Chart label at a cusp: the band integer reduced mod k.
struct CuspChart {
  int k = 2;
  int n = 0;  // 0 <= n < k
  BasePoint cusp;
};

// Taylor model of lambda at a cusp with the vanishing or pole order exact.
// In the local coordinate w (= t - t_c, or 1/t at infinity):
//   target zero:      lambda(w) = w^e A(w) / B(w)
//   target one:       lambda(w) = 1 + w^e A(w) / B(w)
//   target infinity:  lambda(w) = A(w) / (w^e B(w))
// with A(0) != 0 and B(0) != 0.  The shift to the certified root is done
// once in double; coefficients below the known order, which would be pure
// rounding noise, are dropped rather than carried.
struct CuspLocalModel {
  FiberTarget target = FiberTarget::zero;
  BasePoint cusp;
  int order = 1;           // e, exact from the divisor bookkeeping
  std::vector<cplx> a, b;  // Taylor coefficients of A and B at w = 0
  cplx w_of_t(cplx t) const;
  cplx t_of_w(cplx w) const;
  // The small quantity that vanishes at the cusp, at full relative
  // precision: lambda, lambda - 1, or 1 / lambda according to the target.
  cplx deviation(cplx w) const;
  cplx lambda(cplx w) const;
  cplx dlambda_dw(cplx w) const;
};
CuspLocalModel cusp_local_model(const SurfaceSpec& spec, const BadPoint& cusp);

}  // namespace bettilab::surface

#endif
