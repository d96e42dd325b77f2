#include "doctest.h"

#include "bettilab/numeric.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace bettilab;

TEST_CASE("pairwise summation is deterministic and accurate") {
  std::mt19937_64 rng(DEFAULT_SEED);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> xs(100001);
  long double exact = 0.0L;
  for (auto& x : xs) {
    x = u(rng);
    exact += x;
  }
  double s1 = pairwise_sum(xs);
  double s2 = pairwise_sum(xs);
  CHECK(s1 == s2);
  CHECK(std::abs(s1 - double(exact)) < 1e-10);
}

TEST_CASE("spectral jet recovers derivatives of exp") {
  auto jet = spectral_jet([](cplx t) { return std::exp(t); }, cplx{0.3, 0.1},
                          1e-3);
  cplx e = std::exp(cplx{0.3, 0.1});
  CHECK(std::abs(jet.f - e) < 1e-13);
  CHECK(std::abs(jet.df - e) < 1e-10);
  CHECK(std::abs(jet.d2f - e) < 1e-7);
}

TEST_CASE("spectral jet on a polynomial is near exact") {
  auto f = [](cplx t) { return 3.0 + t * t * (2.0 + t); };
  auto jet = spectral_jet(f, cplx{1.0, -2.0}, 1e-2);
  cplx t0{1.0, -2.0};
  CHECK(std::abs(jet.df - (4.0 * t0 + 3.0 * t0 * t0)) < 1e-10);
  CHECK(std::abs(jet.d2f - (4.0 + 6.0 * t0)) < 1e-8);
}

TEST_CASE("wirtinger derivatives split holomorphic and conjugate parts") {
  // f = t^2 + 0.5 conj(t): d_t = 2t, d_tbar = 0.5.
  auto f = [](cplx t) { return t * t + 0.5 * std::conj(t); };
  cplx t0{0.7, -0.4};
  auto w = wirtinger_fd(f, t0, 1e-3);
  CHECK(std::abs(w.d_t - 2.0 * t0) < 1e-9);
  CHECK(std::abs(w.d_tbar - 0.5) < 1e-9);
}

TEST_CASE("laplacian stencil on log|t|^2 and on harmonic functions") {
  // d^2/dtau dtaubar of log|t|^2 vanishes away from zero.
  auto f = [](cplx t) { return std::log(std::norm(t)); };
  CHECK(std::abs(laplacian_fd(f, cplx{1.3, 0.8}, 1e-3)) < 1e-8);
  // For |t|^2 it is exactly 1.
  auto g = [](cplx t) { return std::norm(t); };
  CHECK(laplacian_fd(g, cplx{0.2, 0.9}, 1e-3) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("line fit recovers slope and intercept") {
  std::vector<double> xs, ys;
  for (int i = 0; i < 30; ++i) {
    double x = -3.0 + 0.2 * i;
    xs.push_back(x);
    ys.push_back(2.5 * x - 1.25);
  }
  auto fit = fit_line(xs, ys);
  CHECK(fit.slope == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(-1.25).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("least squares solves an overdetermined basis fit") {
  // y = 2 + 3 eps with basis {1, eps}.
  std::vector<std::vector<double>> cols(2);
  std::vector<double> rhs;
  for (int i = 1; i <= 10; ++i) {
    double e = 0.1 * i;
    cols[0].push_back(1.0);
    cols[1].push_back(e);
    rhs.push_back(2.0 + 3.0 * e);
  }
  auto sol = lstsq(cols, rhs);
  CHECK(sol[0] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(sol[1] == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("adaptive quadrature on smooth and singular integrands") {
  auto r1 = integrate_gk_real([](double x) { return std::sin(x); }, 0.0, PI,
                              1e-12);
  CHECK(r1.converged);
  CHECK(r1.value.real() == doctest::Approx(2.0).epsilon(1e-12));

  // Integrable endpoint singularity 1/sqrt(x).
  auto r2 = integrate_gk_real([](double x) { return 1.0 / std::sqrt(x); }, 0.0,
                              1.0, 1e-9);
  CHECK(r2.value.real() == doctest::Approx(2.0).epsilon(1e-8));

  auto r3 = integrate_gk([](double s) { return std::exp(cplx{0.0, 1.0} * s); },
                         0.0, PI / 2, 1e-12);
  CHECK(std::abs(r3.value - cplx{1.0, 1.0}) < 1e-11);
}

TEST_CASE("branched sqrt tracks through a loop segment without jumping") {
  // sqrt of f(u) = exp(2 pi i u) along u in [0,1] must end at -start.
  auto f = [](double u) { return std::exp(2.0 * PI * cplx{0.0, 1.0} * u); };
  BranchedSqrt bs(f, 1.0);
  cplx start = bs.eval(0.0);
  cplx end = bs.eval(1.0);
  CHECK(std::abs(start - 1.0) < 1e-12);
  CHECK(std::abs(end + 1.0) < 1e-12);
  // Continuity along the way.
  cplx prev = start;
  for (int i = 1; i <= 64; ++i) {
    cplx cur = bs.eval(i / 64.0);
    CHECK(std::abs(cur - prev) < 0.2);
    prev = cur;
  }
}

TEST_CASE("branched sqrt respects a chosen starting branch") {
  auto f = [](double) { return cplx{4.0, 0.0}; };
  BranchedSqrt bs(f, -2.0);
  CHECK(std::abs(bs.eval(0.5) + 2.0) < 1e-12);
}

TEST_CASE("2x2 solve and hyperbolic distance") {
  auto v = solve2x2(3.0, 1.0, 1.0, 2.0, 5.0, 5.0);
  CHECK(v.x == doctest::Approx(1.0));
  CHECK(v.y == doctest::Approx(2.0));
  CHECK_THROWS_AS(solve2x2(1.0, 2.0, 2.0, 4.0, 1.0, 1.0), numeric_error);

  CHECK(hyperbolic_distance(cplx{0, 1}, cplx{0, 1}) == doctest::Approx(0.0));
  // dist(i, 2i) = log 2.
  CHECK(hyperbolic_distance(cplx{0, 1}, cplx{0, 2}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
}
