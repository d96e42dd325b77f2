#include "doctest.h"

#include "bettilab/curve.hpp"

#include <cmath>
#include <random>

using namespace bettilab;
using namespace bettilab::curve;
using algebra::Poly;
using algebra::Rat;
using algebra::RationalFunction;

namespace {

std::mt19937_64 rng(DEFAULT_SEED ^ 0x11);

cplx random_cplx(double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return cplx{u(rng), u(rng)};
}

CurvePoint random_on_curve(cplx lambda) {
  cplx x = random_cplx(-2.0, 2.0);
  cplx y = std::sqrt(curve_rhs(lambda, x));
  if (std::uniform_int_distribution<int>(0, 1)(rng)) y = -y;
  return CurvePoint{x, y, false};
}

// The fixture family: lambda(t) = 2 - 2 t^2 with the section (2, 2t).
RationalFunction fixture_lambda() {
  return RationalFunction(Poly({Rat(2), Rat(0), Rat(-2)}), Poly({Rat(1)}));
}

GenericPoint fixture_section() {
  GenericPoint p;
  p.x = RationalFunction::constant(Rat(2));
  p.y = RationalFunction(Poly({Rat(0), Rat(2)}), Poly({Rat(1)}));
  return p;
}

}  // namespace

TEST_CASE("numeric group law: identity, inverse, closure") {
  for (int trial = 0; trial < 50; ++trial) {
    cplx lambda = random_cplx(-1.5, 1.5);
    if (std::abs(lambda) < 0.1 || std::abs(lambda - 1.0) < 0.1) continue;
    CurvePoint p = random_on_curve(lambda);
    CHECK(on_curve_residual(lambda, p) < 1e-12);
    CHECK(add(lambda, p, CurvePoint::zero()).x == p.x);
    CHECK(add(lambda, p, negate(p)).infinite);
    CurvePoint q = random_on_curve(lambda);
    CurvePoint s = add(lambda, p, q);
    if (!s.infinite) CHECK(on_curve_residual(lambda, s) < 1e-9);
  }
}

TEST_CASE("numeric group law: commutative and associative") {
  for (int trial = 0; trial < 30; ++trial) {
    cplx lambda = random_cplx(-1.5, 1.5);
    if (std::abs(lambda) < 0.1 || std::abs(lambda - 1.0) < 0.1) continue;
    CurvePoint p = random_on_curve(lambda);
    CurvePoint q = random_on_curve(lambda);
    CurvePoint r = random_on_curve(lambda);
    CurvePoint pq = add(lambda, p, q);
    CurvePoint qp = add(lambda, q, p);
    CHECK(std::abs(pq.x - qp.x) < 1e-9 * (1.0 + std::abs(pq.x)));
    CurvePoint a = add(lambda, pq, r);
    CurvePoint b = add(lambda, p, add(lambda, q, r));
    if (!a.infinite && !b.infinite) {
      CHECK(std::abs(a.x - b.x) < 1e-7 * (1.0 + std::abs(a.x)));
      CHECK(std::abs(a.y - b.y) < 1e-6 * (1.0 + std::abs(a.y)));
    } else {
      CHECK(a.infinite == b.infinite);
    }
  }
}

TEST_CASE("numeric scalar multiples agree with repeated addition") {
  cplx lambda{0.4, 0.3};
  CurvePoint p = random_on_curve(lambda);
  CurvePoint three = add(lambda, p, add(lambda, p, p));
  CurvePoint mul = scalar_mul(lambda, 3, p);
  CHECK(std::abs(three.x - mul.x) < 1e-8 * (1.0 + std::abs(three.x)));
  CurvePoint minus = scalar_mul(lambda, -2, p);
  CurvePoint plus = scalar_mul(lambda, 2, p);
  CHECK(std::abs(minus.x - plus.x) < 1e-9 * (1.0 + std::abs(plus.x)));
  CHECK(std::abs(minus.y + plus.y) < 1e-9 * (1.0 + std::abs(plus.y)));
}

TEST_CASE("two torsion doubles to infinity and sums within the kernel") {
  cplx lambda{0.37, 0.41};
  CurvePoint t0{0.0, 0.0, false};
  CurvePoint t1{1.0, 0.0, false};
  CHECK(add(lambda, t0, t0).infinite);
  CurvePoint t01 = add(lambda, t0, t1);
  CHECK(std::abs(t01.x - lambda) < 1e-13);
  CHECK(std::abs(t01.y) < 1e-13);
}

TEST_CASE("fixture section lies on the family exactly") {
  CHECK(generic_on_curve(fixture_lambda(), fixture_section()));
  GenericPoint bogus = fixture_section();
  bogus.y = bogus.y + RationalFunction::constant(Rat(1));
  CHECK(!generic_on_curve(fixture_lambda(), bogus));
}

TEST_CASE("exact doubling of the fixture section") {
  RationalFunction lam = fixture_lambda();
  GenericPoint two = generic_scalar_mul(lam, 2, fixture_section());
  REQUIRE(!two.infinite);
  CHECK(generic_on_curve(lam, two));
  // 2 sigma = ((1+t^2)^2 / (4 t^2), (1-t^4)(3 t^2 - 1) / (8 t^3)).
  RationalFunction x_expect(
      Poly({Rat(1), Rat(0), Rat(2), Rat(0), Rat(1)}),
      Poly({Rat(0), Rat(0), Rat(4)}));
  RationalFunction y_expect(
      Poly({Rat(-1), Rat(0), Rat(3), Rat(0), Rat(1), Rat(0), Rat(-3)}),
      Poly({Rat(0), Rat(0), Rat(0), Rat(8)}));
  CHECK(two.x == x_expect);
  CHECK(two.y == y_expect);
}

TEST_CASE("exact triple stays on the family and matches numeric evaluation") {
  RationalFunction lam = fixture_lambda();
  GenericPoint three = generic_scalar_mul(lam, 3, fixture_section());
  REQUIRE(!three.infinite);
  CHECK(generic_on_curve(lam, three));
  cplx t{0.3, 0.0};
  cplx lam_t = lam.eval(t);
  CurvePoint direct = scalar_mul(lam_t, 3, eval_generic(fixture_section(), t));
  CurvePoint via_generic = eval_generic(three, t);
  CHECK(std::abs(direct.x - via_generic.x) < 1e-10);
  CHECK(std::abs(direct.y - via_generic.y) < 1e-10);
}

TEST_CASE("fixture section is not torsion of small order") {
  CHECK(!torsion_order(fixture_lambda(), fixture_section(), 12).has_value());
}

TEST_CASE("generic two torsion has order two") {
  RationalFunction lam = fixture_lambda();
  GenericPoint t2;
  t2.x = lam;
  t2.y = RationalFunction();
  CHECK(generic_on_curve(lam, t2));
  CHECK(torsion_order(lam, t2, 12) == 2);
}

TEST_CASE("generic inverse cancels") {
  RationalFunction lam = fixture_lambda();
  GenericPoint p = fixture_section();
  CHECK(generic_add(lam, p, generic_negate(p)).infinite);
}
