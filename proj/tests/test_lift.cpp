#include "doctest.h"

#include "bettilab/lift.hpp"

#include <cmath>
#include <vector>

using namespace bettilab;
using lift::FramePoint;
using lift::SectionLift;

namespace {

const char* const kFixtureText = R"(# Legendre pencil with a polynomial section.
label = legendre-2t2
level = 2
r.num   = 2, 0, -2
r.den   = 1
section.x.num = 2
section.x.den = 1
section.y.num = 0, 2
section.y.den = 1
)";

surface::SurfaceSpec fixture() {
  return surface::parse_surface_text(kFixtureText);
}

// One lift shared by all cases; construction walks the anchor machinery.
const SectionLift& fixture_lift() {
  static SectionLift L(fixture());
  return L;
}

// Principal basis at the frame's lambda, valid also for exact-real values.
periods::PeriodBasis principal(cplx lambda) {
  if (lambda.imag() == 0.0) return periods::periods_agm_above(lambda.real());
  return periods::periods_agm(lambda);
}

bool near_integer_pair(Vec2 c, double tol) {
  return std::abs(c.x - std::round(c.x)) < tol &&
         std::abs(c.y - std::round(c.y)) < tol;
}

}  // namespace

TEST_CASE("anchor frame sits at lambda one half with a reduced tau") {
  const SectionLift& L = fixture_lift();
  const FramePoint& a = L.anchor();
  CHECK(std::abs(a.t - cplx(-std::sqrt(3.0) / 2.0, 0.0)) < 1e-9);
  CHECK(std::abs(a.lambda - 0.5) < 1e-10);
  CHECK(std::abs(a.tau() - I) < 1e-8);
  Vec2 b = a.betti();
  CHECK(std::abs(b.x) <= 0.5 + 1e-9);
  CHECK(std::abs(b.y) <= 0.5 + 1e-9);
  CHECK(lift::shortest_period(a.basis) > 1.0);
  CHECK(L.scale() == doctest::Approx(2.0));
  CHECK(L.clearance() == doctest::Approx(0.25 * (1.0 - 1.0 / std::sqrt(2.0))));
}

TEST_CASE("a contractible loop returns the frame unchanged") {
  const SectionLift& L = fixture_lift();
  FramePoint f0 = L.eval(cplx(-0.3, 0.8));
  FramePoint f = L.step(f0, f0.t + cplx(0.6, 0.0));
  f = L.step(f, f0.t + cplx(0.6, 0.7));
  f = L.step(f, f0.t + cplx(0.0, 0.7));
  f = L.step(f, f0.t);
  double span = std::abs(f0.basis.omega1) + std::abs(f0.basis.omega2);
  CHECK(std::abs(f.basis.omega1 - f0.basis.omega1) < 1e-9 * span);
  CHECK(std::abs(f.basis.omega2 - f0.basis.omega2) < 1e-9 * span);
  CHECK(std::abs(f.log_raw - f0.log_raw) <
        1e-8 * lift::shortest_period(f0.basis));
}

TEST_CASE("independent routes agree modulo the lattice") {
  const SectionLift& L = fixture_lift();
  const std::vector<cplx> pts{cplx(0.3, 0.4), cplx(-0.2, -0.6),
                              cplx(1.4, 0.3), cplx(2.5, -1.2)};
  for (cplx t : pts) {
    CAPTURE(t.real());
    CAPTURE(t.imag());
    FramePoint fa = L.eval(t);
    // High road: over the top at Im t = 1.5, far above every bad point.
    FramePoint fb = L.step(L.anchor(), L.anchor().t + cplx(0.0, 1.5));
    fb = L.step(fb, cplx(t.real(), 1.5));
    fb = L.step(fb, t);
    CHECK(periods::same_lattice(fa.basis, fb.basis, 1e-7));
    Vec2 d = fa.basis.lattice_coords(fa.log_raw - fb.log_raw);
    CHECK(near_integer_pair(d, 1e-7));
    // Both frames must describe the lattice of the principal basis.
    CHECK(periods::same_lattice(fa.basis, principal(fa.lambda), 1e-7));
  }
}

TEST_CASE("the torsion parameter carries a half lattice point") {
  const SectionLift& L = fixture_lift();
  FramePoint f = L.eval(cplx(0.0, 0.0));
  CHECK(std::abs(f.lambda - 2.0) < 1e-12);
  Vec2 b = f.betti();
  CHECK(near_integer_pair(Vec2{2.0 * b.x, 2.0 * b.y}, 1e-8));
  double away = std::max(std::abs(b.x - std::round(b.x)),
                         std::abs(b.y - std::round(b.y)));
  CHECK(away > 0.2);  // genuinely half, not a lattice point
}

TEST_CASE("doubling and tripling the section scales the logarithm") {
  const SectionLift& L = fixture_lift();
  surface::SurfaceSpec two = fixture();
  two.section = curve::generic_scalar_mul(two.r, 2, two.section);
  SectionLift L2(two);
  surface::SurfaceSpec three = fixture();
  three.section = curve::generic_scalar_mul(three.r, 3, three.section);
  SectionLift L3(three);
  const std::vector<cplx> pts{cplx(0.3, 0.4), cplx(-1.6, 0.9),
                              cplx(0.1, -0.7)};
  for (cplx t : pts) {
    CAPTURE(t.real());
    CAPTURE(t.imag());
    FramePoint f1 = L.eval(t);
    FramePoint f2 = L2.eval(t);
    CHECK(periods::same_lattice(f1.basis, f2.basis, 1e-7));
    Vec2 d2 = f1.basis.lattice_coords(2.0 * f1.log_raw - f2.log_raw);
    CHECK(near_integer_pair(d2, 1e-6));
  }
  FramePoint f1 = L.eval(pts[0]);
  FramePoint f3 = L3.eval(pts[0]);
  Vec2 d3 = f1.basis.lattice_coords(3.0 * f1.log_raw - f3.log_raw);
  CHECK(near_integer_pair(d3, 1e-6));
}

TEST_CASE("negating the parameter negates the logarithm") {
  // lambda is even in t while the section y is odd, so t -> -t sends the
  // section point to its inverse on the same fiber.
  const SectionLift& L = fixture_lift();
  cplx t(0.4, 0.3);
  FramePoint fp = L.eval(t);
  FramePoint fm = L.eval(-t);
  CHECK(std::abs(fp.lambda - fm.lambda) < 1e-12);
  CHECK(periods::same_lattice(fp.basis, fm.basis, 1e-7));
  Vec2 d = fp.basis.lattice_coords(fp.log_raw + fm.log_raw);
  CHECK(near_integer_pair(d, 1e-7));
}

TEST_CASE("jets match the analytic tau derivative and finite differences") {
  const SectionLift& L = fixture_lift();
  cplx t(0.35, 0.55);
  SectionLift::Jet J = L.jet_at(t);
  cplx analytic = L.dtau_dt(J.at);
  CHECK(std::abs(J.dtau - analytic) < 1e-8 * (1.0 + std::abs(analytic)));

  double h = 1e-4;
  FramePoint fp = L.step(J.at, t + h);
  FramePoint fm = L.step(J.at, t - h);
  cplx dz_fd = (fp.z() - fm.z()) / (2.0 * h);
  CHECK(std::abs(J.dz - dz_fd) < 1e-5 * (1.0 + std::abs(J.dz)));
  cplx d2z_fd = (fp.z() - 2.0 * J.at.z() + fm.z()) / (h * h);
  CHECK(std::abs(J.d2z - d2z_fd) < 1e-3 * (1.0 + std::abs(J.d2z)));

  cplx dtau_fd = (L.dtau_dt(fp) - L.dtau_dt(fm)) / (2.0 * h);
  CHECK(std::abs(J.d2tau - dtau_fd) < 1e-5 * (1.0 + std::abs(J.d2tau)));
}

TEST_CASE("circle closure detects monodromy around a cusp") {
  const SectionLift& L = fixture_lift();
  FramePoint base = L.eval(cplx(1.0, 0.2));
  CHECK_THROWS_AS((void)L.circle(base, cplx(1.0, 0.0), 0.12, 32, true),
                  numeric_error);
  std::vector<FramePoint> frames =
      L.circle(base, cplx(1.0, 0.0), 0.12, 32, false);
  REQUIRE(frames.size() == 33);
  periods::Rebase rb = periods::rebase(frames.back().basis,
                                       frames.front().basis);
  CHECK(rb.residual < 1e-6);
  CHECK(rb.det == 1);
  bool identity = rb.m[0][0] == 1 && rb.m[0][1] == 0 && rb.m[1][0] == 0 &&
                  rb.m[1][1] == 1;
  CHECK_FALSE(identity);
  CHECK(std::labs(rb.m[0][0] + rb.m[1][1]) == 2);  // parabolic, cusp type
  Vec2 d = frames.front().basis.lattice_coords(frames.back().log_raw -
                                               frames.front().log_raw);
  CHECK(near_integer_pair(d, 1e-6));
}

TEST_CASE("a loop around a good region passes the closure check") {
  const SectionLift& L = fixture_lift();
  FramePoint base = L.eval(cplx(0.3, 0.5));
  std::vector<FramePoint> frames =
      L.circle(base, cplx(0.3, 0.5), 0.1, 16, true);
  CHECK(frames.size() == 17);
  for (const FramePoint& f : frames)
    CHECK(std::abs(f.lambda - L.lambda_at(f.t)) < 1e-12);
}

TEST_CASE("local models take over near cusps and at infinity") {
  const SectionLift& L = fixture_lift();
  CHECK(L.model_near(cplx(0.3, 0.0)) == nullptr);
  const surface::CuspLocalModel* m = L.model_near(cplx(1.0 + 0.05, 0.0));
  REQUIRE(m != nullptr);
  CHECK_FALSE(m->cusp.infinite);
  CHECK(std::abs(m->cusp.t - 1.0) < 1e-12);
  const surface::CuspLocalModel* inf_m = L.model_near(cplx(9.0, 0.0));
  REQUIRE(inf_m != nullptr);
  CHECK(inf_m->cusp.infinite);

  cplx t1(1.0 + 1e-3, 0.0);
  CHECK(std::abs(L.lambda_at(t1) - fixture().r.eval(t1)) <
        1e-12 * std::abs(L.lambda_at(t1)));
  cplx t2(9.0, 0.0);
  CHECK(std::abs(L.lambda_at(t2) - fixture().r.eval(t2)) <
        1e-12 * std::abs(L.lambda_at(t2)));
}

TEST_CASE("frames reach deep towards a cusp and out to large parameters") {
  const SectionLift& L = fixture_lift();
  FramePoint f = L.eval(cplx(1.0 + 1e-3, 0.0));
  CHECK(std::abs(f.lambda - L.lambda_at(f.t)) == 0.0);
  CHECK(periods::same_lattice(f.basis, principal(f.lambda), 1e-7));

  FramePoint g = L.eval(cplx(50.0, 5.0));
  CHECK(periods::same_lattice(g.basis, principal(g.lambda), 1e-7));
  CHECK(lift::shortest_period(g.basis) > 0.0);
}

TEST_CASE("evaluation on a bad fiber is rejected") {
  const SectionLift& L = fixture_lift();
  CHECK_THROWS_AS((void)L.eval(cplx(1.0, 0.0)), numeric_error);
  CHECK_THROWS_AS((void)L.eval(cplx(-1.0, 0.0)), numeric_error);
}
