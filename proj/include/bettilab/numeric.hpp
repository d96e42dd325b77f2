#ifndef BETTILAB_NUMERIC_HPP
#define BETTILAB_NUMERIC_HPP

// Shared numerical helpers: deterministic summation, finite-difference and
// spectral derivative stencils, line fits, and adaptive 1-D quadrature.

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bettilab {

using cplx = std::complex<double>;

inline constexpr double PI = 3.14159265358979323846;
inline constexpr cplx I{0.0, 1.0};

// Default seed for every randomized sweep in the project.  Tests and the CLI
// may override it, but two runs with the same seed must agree bit for bit.
inline constexpr std::uint64_t DEFAULT_SEED = 0x5eed0cafe77e11abULL;

class numeric_error : public std::runtime_error {
public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

// Pairwise summation over a fixed index order.  The result depends only on
// the vector contents, never on thread count or scheduling.
double pairwise_sum(const std::vector<double>& v);
cplx pairwise_sum(const std::vector<cplx>& v);

// ---------------------------------------------------------------------------
// Derivative stencils

// Derivatives of a holomorphic function from equispaced samples on a circle
// of radius rho.  Returns value, f', f'' at the center.  The trapezoid rule
// on the circle converges spectrally, so rho can be kept large enough that
// roundoff in the samples is not amplified.
struct HoloJet {
  cplx f, df, d2f;
};
HoloJet spectral_jet(const std::function<cplx(cplx)>& f, cplx t0, double rho,
                     int n = 16);
// Same stencil from precomputed samples f[j] at t0 + rho e^{2 pi i j / n},
// for functions whose evaluation carries sequential state around the circle.
HoloJet spectral_jet_samples(const std::vector<cplx>& f, double rho);

// Values of f' at all n circle samples, from the samples alone.  The circle
// trace of a holomorphic f has a one-sided Fourier series (its Taylor
// modes), so differentiation is exact up to the aliasing tail (rho over the
// distance to the nearest singularity, to the n-th power).
std::vector<cplx> circle_derivative_samples(const std::vector<cplx>& f,
                                            double rho);

// Wirtinger derivatives d/dt and d/dtbar of a smooth complex-valued function
// of one complex variable, by 4th-order central differences in Re t, Im t.
struct Wirtinger {
  cplx d_t, d_tbar;
};
Wirtinger wirtinger_fd(const std::function<cplx(cplx)>& g, cplx t0, double h);

// Mixed Wirtinger second derivative d^2 g / dt dtbar, which is a quarter of
// the real Laplacian, via a 4th-order stencil.
double laplacian_fd(const std::function<double(cplx)>& g, cplx t0, double h);

// ---------------------------------------------------------------------------
// Least squares

// Fit y = a + b x.  r2 is the coefficient of determination; a degenerate fit
// (all x equal) throws.
struct LineFit {
  double intercept = 0.0, slope = 0.0, r2 = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Solve a small dense least-squares system (normal equations; the systems in
// this project have at most four columns).
std::vector<double> lstsq(const std::vector<std::vector<double>>& cols,
                          const std::vector<double>& rhs);

// ---------------------------------------------------------------------------
// Adaptive quadrature (Gauss-Kronrod 7-15) for complex integrands on [a, b].

struct QuadResult {
  cplx value{0.0, 0.0};
  double error = 0.0;
  long evaluations = 0;
  bool converged = true;
};

QuadResult integrate_gk(const std::function<cplx(double)>& f, double a,
                        double b, double abs_tol, int max_depth = 60);

// Real-valued convenience wrapper.
QuadResult integrate_gk_real(const std::function<double(double)>& f, double a,
                             double b, double abs_tol, int max_depth = 60);

// ---------------------------------------------------------------------------
// Branch-tracked square root along a parametrized path.
//
// Given g : [0,1] -> C* continuous, precomputes a chain of reference square
// roots s(u_i) with s(0) = seed (or the principal root) such that consecutive
// references differ by less than a quarter turn.  eval(u) then returns the
// square root of g(u) on the branch continued from the seed, independent of
// evaluation order, so it can sit inside adaptive quadrature.
class BranchedSqrt {
public:
  BranchedSqrt(std::function<cplx(double)> g, cplx seed_sqrt,
               int initial_points = 65, int max_points = 1 << 16);
  // Square root of g(u) on the tracked branch.
  cplx eval(double u) const;
  // Reference value at the end of the path.
  cplx end_value() const { return refs_.back().second; }

private:
  std::function<cplx(double)> g_;
  std::vector<std::pair<double, cplx>> refs_;  // (u, tracked sqrt) sorted by u
};

// Nearest-of-two-branches chooser: returns +cand or -cand, whichever is
// closer to ref.
inline cplx match_branch(cplx cand, cplx ref) {
  return (std::abs(cand - ref) <= std::abs(cand + ref)) ? cand : -cand;
}

// 2x2 real linear solve; throws on (numerically) singular systems.
struct Vec2 {
  double x = 0.0, y = 0.0;
};
Vec2 solve2x2(double a11, double a12, double a21, double a22, double b1,
              double b2);

// Hyperbolic distance on the upper half plane.
double hyperbolic_distance(cplx tau1, cplx tau2);

}  // namespace bettilab

#endif
