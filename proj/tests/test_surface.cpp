#include "doctest.h"

#include "bettilab/surface.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace bettilab;
using namespace bettilab::surface;
using algebra::Poly;
using algebra::Rat;
using algebra::RationalFunction;

namespace {

std::mt19937_64 rng(DEFAULT_SEED);

const char* const kFixtureText = R"(# Legendre pencil with a polynomial section.
label = legendre-2t2          # free-form name
level = 2
r.num   = 2, 0, -2            # lambda(t) = 2 - 2 t^2, constant term first
r.den   = 1
section.x.num = 2
section.x.den = 1
section.y.num = 0, 2          # y(t) = 2 t
section.y.den = 1
)";

SurfaceSpec fixture() { return parse_surface_text(kFixtureText); }

// Any classifying map with the 2-torsion section (0, 0), which lies on every
// Legendre curve.
SurfaceSpec with_map(RationalFunction r) {
  SurfaceSpec spec;
  spec.level = 2;
  spec.r = std::move(r);
  spec.section.x = RationalFunction::constant(0);
  spec.section.y = RationalFunction::constant(0);
  spec.section.infinite = false;
  spec.label = "torsion-probe";
  return spec;
}

RationalFunction from_coeffs(std::vector<long> num, std::vector<long> den) {
  auto lift = [](const std::vector<long>& v) {
    std::vector<Rat> c(v.begin(), v.end());
    return Poly(std::move(c));
  };
  return RationalFunction(lift(num), lift(den));
}

cplx cpow_int(cplx c, long n) {
  cplx r{1.0, 0.0};
  bool neg = n < 0;
  for (long i = 0; i < std::abs(n); ++i) r *= c;
  return neg ? 1.0 / r : r;
}

}  // namespace

TEST_CASE("parser reads the fixture description") {
  SurfaceSpec spec = fixture();
  CHECK(spec.label == "legendre-2t2");
  CHECK(spec.level == 2);
  CHECK(spec.r.num() == Poly({Rat(2), Rat(0), Rat(-2)}));
  CHECK(spec.r.den() == Poly({Rat(1)}));
  CHECK(spec.section.x.num() == Poly({Rat(2)}));
  CHECK(spec.section.y.num() == Poly({Rat(0), Rat(2)}));
  CHECK(spec.r.map_degree() == 2);
  CHECK_NOTHROW(validate_section(spec));
}

TEST_CASE("parser accepts rational coefficients and defaults") {
  SurfaceSpec spec = parse_surface_text(
      "r.num=0,1/2\nsection.x.num=0\nsection.y.num=0\n");
  CHECK(spec.label == "unlabeled");
  CHECK(spec.level == 2);
  CHECK(spec.r.num() == Poly({Rat(0), Rat(1, 2)}));
  CHECK(spec.r.den() == Poly({Rat(1)}));
}

TEST_CASE("parser reports positions for malformed input") {
  auto expect_error = [](const std::string& text, int line, int column,
                         const std::string& fragment) {
    try {
      parse_surface_text(text);
      FAIL("expected a parse error for: ", text);
    } catch (const parse_error& e) {
      CHECK(e.line() == line);
      CHECK(e.column() == column);
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };
  std::string tail = "\nsection.x.num = 0\nsection.y.num = 0\n";

  expect_error("r.num = 2, 1/0" + tail, 1, 12, "zero denominator");
  expect_error("r.num = 2, x3" + tail, 1, 12, "malformed rational");
  expect_error("r.num = 2,, 1" + tail, 1, 11, "empty coefficient");
  expect_error("bogus.key = 1\nr.num = 0, 1" + tail, 1, 1, "unknown key");
  expect_error("r.num = 0, 1\nr.num = 0, 2" + tail, 2, 1, "duplicate key");
  expect_error("r.num 0, 1" + tail, 1, 1, "expected `key = value`");
  expect_error("r.num =" + tail, 1, 8, "missing value");
  expect_error("level = 1\nr.num = 0, 1" + tail, 1, 9, "level");
  expect_error("r.num = 5" + tail, 1, 9, "non-constant");
  expect_error("r.num = 0, 1\nr.den = 0" + tail, 2, 9,
               "denominator polynomial is zero");
  expect_error("section.x.num = 0\nsection.y.num = 0\n", 3, 1,
               "missing required key `r.num`");
}

TEST_CASE("off-curve sections are rejected with the residual") {
  SurfaceSpec spec = fixture();
  spec.section.y = from_coeffs({1, 2}, {1});  // y = 2 t + 1
  try {
    validate_section(spec);
    FAIL("expected a validation error");
  } catch (const numeric_error& e) {
    CHECK(std::string(e.what()).find("4*t + 1") != std::string::npos);
  }
  // The 2-torsion section is on every curve of the pencil.
  CHECK_NOTHROW(validate_section(with_map(from_coeffs({0, 0, 7}, {1, 1}))));
}

TEST_CASE("bad reduction set of the fixture") {
  auto bad = bad_reduction_set(fixture());
  REQUIRE(bad.size() == 5);
  const double irt2 = 1.0 / std::sqrt(2.0);
  // Sorted by real part, the infinite point last.
  CHECK(std::abs(bad[0].point.t - cplx{-1.0, 0.0}) < 1e-10);
  CHECK(bad[0].target == FiberTarget::zero);
  CHECK(std::abs(bad[1].point.t - cplx{-irt2, 0.0}) < 1e-10);
  CHECK(bad[1].target == FiberTarget::one);
  CHECK(std::abs(bad[2].point.t - cplx{irt2, 0.0}) < 1e-10);
  CHECK(bad[2].target == FiberTarget::one);
  CHECK(std::abs(bad[3].point.t - cplx{1.0, 0.0}) < 1e-10);
  CHECK(bad[3].target == FiberTarget::zero);
  CHECK(bad[4].point.infinite);
  CHECK(bad[4].target == FiberTarget::infinity);
  CHECK(bad[4].multiplicity == 2);
  for (int i = 0; i < 4; ++i) {
    CHECK(bad[i].multiplicity == 1);
    CHECK(bad[i].residual <= 1e-7);
  }
}

TEST_CASE("bad reduction set of small maps") {
  // Identity map: the three punctures themselves.
  auto s1 = bad_reduction_set(with_map(from_coeffs({0, 1}, {1})));
  REQUIRE(s1.size() == 3);
  CHECK(std::abs(s1[0].point.t) < 1e-12);
  CHECK(std::abs(s1[1].point.t - cplx{1.0, 0.0}) < 1e-12);
  CHECK(s1[2].point.infinite);
  for (const auto& b : s1) CHECK(b.multiplicity == 1);

  // Squaring map: 0 and infinity are double, +-1 are simple.
  auto s2 = bad_reduction_set(with_map(from_coeffs({0, 0, 1}, {1})));
  REQUIRE(s2.size() == 4);
  CHECK(std::abs(s2[0].point.t - cplx{-1.0, 0.0}) < 1e-10);
  CHECK(s2[0].target == FiberTarget::one);
  CHECK(std::abs(s2[1].point.t) < 1e-12);
  CHECK(s2[1].target == FiberTarget::zero);
  CHECK(s2[1].multiplicity == 2);
  CHECK(std::abs(s2[2].point.t - cplx{1.0, 0.0}) < 1e-10);
  CHECK(s2[3].point.infinite);
  CHECK(s2[3].multiplicity == 2);
}

TEST_CASE("ramification of the fixture") {
  auto ram = ramification(fixture());
  REQUIRE(ram.points.size() == 2);
  CHECK(std::abs(ram.points[0].point.t) < 1e-12);
  CHECK(ram.points[0].index == 2);
  CHECK_FALSE(ram.points[0].in_s);
  CHECK(ram.points[1].point.infinite);
  CHECK(ram.points[1].index == 2);
  CHECK(ram.points[1].in_s);
  CHECK(ram.deg_r_good == 1);
  CHECK(ram.total == 2);
}

TEST_CASE("ramification distinguishes good and bad branch points") {
  // Identity map: no ramification at all.
  CHECK(ramification(with_map(from_coeffs({0, 1}, {1}))).points.empty());

  // Squaring map: both branch points sit over the punctures.
  auto r2 = ramification(with_map(from_coeffs({0, 0, 1}, {1})));
  REQUIRE(r2.points.size() == 2);
  CHECK(r2.points[0].in_s);
  CHECK(r2.points[1].in_s);
  CHECK(r2.deg_r_good == 0);
  CHECK(r2.total == 2);

  // (t^2 + 1)/(t^2 - 1): branch point t = 0 is good, infinity lands on 1.
  auto r3 = ramification(with_map(from_coeffs({1, 0, 1}, {-1, 0, 1})));
  REQUIRE(r3.points.size() == 2);
  CHECK(std::abs(r3.points[0].point.t) < 1e-12);
  CHECK_FALSE(r3.points[0].in_s);
  CHECK(r3.points[1].point.infinite);
  CHECK(r3.points[1].in_s);
  CHECK(r3.deg_r_good == 1);

  // t^3 - 3t: branch points +-1 are good, infinity is a triple pole.
  auto r4 = ramification(with_map(from_coeffs({0, -3, 0, 1}, {1})));
  REQUIRE(r4.points.size() == 3);
  CHECK(r4.points[0].index == 2);
  CHECK_FALSE(r4.points[0].in_s);
  CHECK(r4.points[1].index == 2);
  CHECK_FALSE(r4.points[1].in_s);
  CHECK(r4.points[2].point.infinite);
  CHECK(r4.points[2].index == 3);
  CHECK(r4.deg_r_good == 2);
  CHECK(r4.total == 4);
}

TEST_CASE("Hurwitz count holds across a family of maps") {
  std::vector<RationalFunction> maps = {
      from_coeffs({0, 0, 0, 1}, {1}),        // t^3
      from_coeffs({2, 1}, {5, 0, 3}),        // (t + 2)/(3 t^2 + 5)
      from_coeffs({0, 0, 1, 1}, {1, 1}),     // t^2 (t + 1)/(t + 1) = t^2
      from_coeffs({1, 4, 1, 7}, {2, 0, 5}),  //
      from_coeffs({0, 2, 0, 0, 1}, {3, 1}),  //
  };
  for (const auto& r : maps) {
    auto ram = ramification(with_map(r));
    CHECK(ram.total == 2 * r.map_degree() - 2);
    auto bad = bad_reduction_set(with_map(r));
    long pre = 0;
    for (const auto& b : bad) pre += b.multiplicity;
    CHECK(pre == 3 * r.map_degree());
  }
}

TEST_CASE("cusp counts by level") {
  CHECK(nu_infinity(2) == 3);
  CHECK(nu_infinity(3) == 4);
  CHECK(nu_infinity(4) == 6);
  CHECK(nu_infinity(5) == 12);
  CHECK(nu_infinity(6) == 12);
  CHECK(nu_infinity(7) == 24);
  CHECK(nu_infinity(8) == 24);
  CHECK_THROWS_AS(nu_infinity(1), numeric_error);
}

TEST_CASE("degree report of the fixture") {
  DegreeReport rep = degree_report(fixture(), 2, 0);
  CHECK(rep.d == 2);
  CHECK(rep.genus_base == 0);
  CHECK(rep.s_reduced == 5);
  CHECK(rep.s_preimage == 6);
  CHECK(rep.deg_r_good == 1);
  CHECK(rep.nu_inf == 3);
  CHECK(rep.area_term == Rat(1));
  CHECK(rep.predicted_total_reduced == Rat(2));
  CHECK(rep.predicted_total_preimage == Rat(5, 2));
  CHECK(rep.predicted_total_integer);
  CHECK_FALSE(rep.readings_agree);
  CHECK(rep.bound_rhs == Rat(2));
  CHECK(rep.bound_rhs_pullback == Rat(2));
  CHECK(rep.bound_averaged == Rat(2));
  CHECK(rep.forms_agree);
  // The ramification term plus the area term reproduce the predicted total.
  CHECK(Rat(rep.deg_r_good) + rep.area_term == rep.predicted_total_reduced);
}

TEST_CASE("degree report flags half-integer predictions") {
  DegreeReport rep = degree_report(with_map(from_coeffs({0, 1}, {1})), 2, 0);
  CHECK(rep.d == 1);
  CHECK(rep.s_reduced == 3);
  CHECK(rep.s_preimage == 3);
  CHECK(rep.deg_r_good == 0);
  CHECK(rep.predicted_total_reduced == Rat(1, 2));
  CHECK_FALSE(rep.predicted_total_integer);
  CHECK(rep.readings_agree);
  CHECK(rep.bound_rhs == Rat(1, 2));
  CHECK(rep.forms_agree);
}

TEST_CASE("degree arithmetic at higher level") {
  // Degree-one map at level 3: area term is 1.
  DegreeReport rep = degree_report(with_map(from_coeffs({0, 1}, {1})), 3, 0);
  CHECK(rep.nu_inf == 4);
  CHECK(rep.area_term == Rat(1));
}

TEST_CASE("toroidal coordinates satisfy the chart relations") {
  std::uniform_real_distribution<double> re(-2.0, 2.0);
  std::uniform_real_distribution<double> im(0.15, 2.5);
  std::uniform_int_distribution<int> kk(2, 6), nn(-3, 5);
  const cplx tpi(0.0, 2.0 * PI);
  for (int trial = 0; trial < 1000; ++trial) {
    cplx tau{re(rng), im(rng)};
    cplx z{re(rng), re(rng)};
    int k = kk(rng);
    long n = nn(rng);
    Toroidal tc = toroidal_coords(tau, z, k, n);
    cplx qk = std::exp(tpi * tau / double(k));
    CHECK(std::abs(tc.xi * tc.zeta - qk) <= 1e-12 * std::abs(qk));
    cplx ez = std::exp(tpi * z);
    cplx mono = cpow_int(tc.xi, n) * cpow_int(tc.zeta, n + 1);
    CHECK(std::abs(mono - ez) <= 1e-11 * std::abs(ez));
  }
  // Zero-section chart: zeta = 1 and xi = e^{2 pi i tau / k}.
  Toroidal tc = toroidal_coords(cplx{0.3, 1.7}, cplx{0.0, 0.0}, 2, 0);
  CHECK(std::abs(tc.zeta - 1.0) < 1e-15);
  CHECK(std::abs(tc.xi - std::exp(tpi * cplx{0.3, 1.7} / 2.0)) < 1e-15);
}

TEST_CASE("cusp local models match the map near every fixture cusp") {
  SurfaceSpec spec = fixture();
  RationalFunction dr = spec.r.derivative();
  for (const auto& bad : bad_reduction_set(spec)) {
    CuspLocalModel model = cusp_local_model(spec, bad);
    for (int j = 0; j < 8; ++j) {
      cplx w = std::polar(0.05, 2.0 * PI * (j + 0.5) / 8.0);
      cplx t = model.t_of_w(w);
      CHECK(std::abs(model.w_of_t(t) - w) < 1e-14);
      cplx direct = spec.r.eval(t);
      CHECK(std::abs(model.lambda(w) - direct) <=
            1e-9 * (1.0 + std::abs(direct)));
      cplx expect = bad.point.infinite ? -dr.eval(t) / (w * w) : dr.eval(t);
      CHECK(std::abs(model.dlambda_dw(w) - expect) <=
            1e-8 * (1.0 + std::abs(expect)));
    }
  }
}

TEST_CASE("cusp local models stay exact deep into the cusp") {
  SurfaceSpec spec = fixture();
  auto bad = bad_reduction_set(spec);

  // t = 1, lambda -> 0: r(1 + w) = -4w - 2w^2 exactly.
  CuspLocalModel at1 = cusp_local_model(spec, bad[3]);
  CHECK(at1.order == 1);
  REQUIRE(at1.a.size() == 2);
  CHECK(std::abs(at1.a[0] - cplx{-4.0, 0.0}) < 1e-12);
  CHECK(std::abs(at1.a[1] - cplx{-2.0, 0.0}) < 1e-12);
  cplx w{1e-12, 3e-13};
  cplx expect = -4.0 * w - 2.0 * w * w;
  CHECK(std::abs(at1.lambda(w) - expect) <= 1e-12 * std::abs(expect));

  // t = 1/sqrt(2), lambda -> 1: the deviation lambda - 1 = -4 t_c w - 2 w^2
  // keeps full relative precision however small w gets.
  CuspLocalModel ath = cusp_local_model(spec, bad[2]);
  CHECK(ath.order == 1);
  const double tc = 1.0 / std::sqrt(2.0);
  REQUIRE(ath.a.size() == 2);
  CHECK(std::abs(ath.a[0] - cplx{-4.0 * tc, 0.0}) < 1e-10);
  cplx dev = ath.deviation(w);
  cplx dev_expect = -4.0 * tc * w - 2.0 * w * w;
  CHECK(std::abs(dev - dev_expect) <= 1e-10 * std::abs(dev_expect));

  // t = infinity, pole of order 2: lambda(w) = 2 - 2 / w^2, and the
  // deviation is 1 / lambda at full precision.
  CuspLocalModel atinf = cusp_local_model(spec, bad[4]);
  CHECK(atinf.order == 2);
  cplx ws{1e-8, 0.0};
  cplx big = 2.0 - 2.0 / (ws * ws);
  CHECK(std::abs(atinf.lambda(ws) - big) <= 1e-12 * std::abs(big));
  cplx inv = atinf.deviation(cplx{1e-12, 4e-13});
  cplx inv_expect = 1.0 / (2.0 - 2.0 / (cplx{1e-12, 4e-13} * cplx{1e-12, 4e-13}));
  CHECK(std::abs(inv - inv_expect) <= 1e-9 * std::abs(inv_expect));
}

TEST_CASE("cusp local models reject inconsistent orders") {
  SurfaceSpec spec = fixture();
  BadPoint wrong{BasePoint{cplx{1.0, 0.0}, false}, FiberTarget::zero, 2, 0.0};
  CHECK_THROWS_AS(cusp_local_model(spec, wrong), numeric_error);
}
