#ifndef BETTILAB_VERTICALITY_HPP
#define BETTILAB_VERTICALITY_HPP

// Verticality of a lifted section: the scalar component u = dz/dtau - Im z /
// Im tau of the projection of the section tangent onto the fiber direction,
// and the invariant psi = |u|^2 Im tau it induces on the base.  The module
// checks the first-order equation coupling u to its conjugate, forms the
// covariant derivative whose holomorphy the equation implies, locates the
// zeros of psi, and estimates multiplicities at good points (winding and
// radial decay of psi) and at cusps (toroidal marker coordinate).

#include "bettilab/lift.hpp"
#include "bettilab/surface.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace bettilab::verticality {

// One point of a holomorphic curve w -> (tau(w), z(w)) with derivatives in
// the curve parameter.  z is the normalized logarithm (z = b1 + b2 tau).
struct CurveSample {
  cplx w{0.0, 0.0};
  cplx tau{0.0, 1.0};
  cplx z{0.0, 0.0};
  cplx dtau{0.0, 0.0};
  cplx dz{0.0, 0.0};
};

// |dz Im tau - dtau Im z|^2 / (|dtau|^2 Im tau); +infinity when dtau = 0
// and the numerator does not vanish.  Invariant under lattice translates of
// z and under the modular action, so it is single valued on circles whose
// period monodromy is not.
double psi_value(const CurveSample& s);

// u = dz/dtau - Im z / Im tau; requires dtau != 0.  psi_value = |u|^2 Im tau.
cplx u_value(const CurveSample& s);

// A local holomorphic curve reachable through circle samples on one
// continuous branch.  Backs both the lifted section and the closed-form
// calibration curves, so every estimator runs identically on either.
class ParamCurve {
 public:
  virtual ~ParamCurve() = default;
  // n samples at c + rho e^{2 pi i j / n}, j = 0..n-1, consecutive along
  // the circle.  closed reports whether the branch returns to its start
  // (false once the circle surrounds a cusp); when it is false the samples
  // still carry correct derivatives but form an open chain.
  struct Circle {
    std::vector<CurveSample> samples;
    bool closed = true;
  };
  virtual Circle circle(cplx c, double rho, int n) const = 0;
  virtual CurveSample at(cplx w) const = 0;
};

// The lifted section as a curve in the base parameter t.  Derivatives on a
// closed circle come from the one-sided Fourier series of the samples; on
// an open chain (monodromy) from high-order differences along the arc, with
// the two chain ends dropped.
class LiftCurve : public ParamCurve {
 public:
  explicit LiftCurve(const lift::SectionLift& l) : lift_(&l) {}
  Circle circle(cplx c, double rho, int n) const override;
  CurveSample at(cplx w) const override;
  const lift::SectionLift& lift() const { return *lift_; }

 private:
  const lift::SectionLift* lift_;
};

// tau(w) = tau0 + (w-c)^r, z(w) = z0 + b2 tau(w) + a (w-c)^m: the local
// model of a section whose Betti map vanishes to order m over a base chart
// on which tau is ramified to order r.  Everything is closed form.
class SyntheticCurve : public ParamCurve {
 public:
  SyntheticCurve(int m, int r, double z0, double b2, cplx a = cplx(1.0, 0.0),
                 cplx tau0 = cplx(0.0, 1.0), cplx center = cplx(0.0, 0.0));
  Circle circle(cplx c, double rho, int n) const override;
  CurveSample at(cplx w) const override;

 private:
  int m_, r_;
  cplx z0_, b2_, a_, tau0_, center_;
};

// Constant section lift z(w) = z0 over tau(w) = tau0 + (w - c); its u is
// -Im z0 / Im tau in closed form.
class ConstantLiftCurve : public ParamCurve {
 public:
  ConstantLiftCurve(cplx z0, cplx tau0 = cplx(0.0, 1.0),
                    cplx center = cplx(0.0, 0.0))
      : z0_(z0), tau0_(tau0), center_(center) {}
  Circle circle(cplx c, double rho, int n) const override;
  CurveSample at(cplx w) const override;

 private:
  cplx z0_, tau0_, center_;
};

// ---------------------------------------------------------------------------
// Pointwise verticality on a lifted section

struct VerticalityValue {
  cplx u{0.0, 0.0};  // meaningful only when ray_limit is false
  double psi = 0.0;  // +infinity at a ramification point with dz != 0
  cplx tau{0.0, 1.0};
  cplx dtau_dt{0.0, 0.0};
  cplx dz_dt{0.0, 0.0};
  bool ray_limit = false;  // dtau/dt = 0; psi is the limit along rays
};
VerticalityValue psi_pullback(const lift::SectionLift& l, cplx t);
VerticalityValue psi_pullback(const lift::SectionLift& l,
                              const lift::SectionLift::Jet& jet);

// ---------------------------------------------------------------------------
// Local Taylor chart

// Truncated development of (tau(t), z(t)) at t0 from one circle of samples,
// usable on |t - t0| <= rho/2.  tail is the relative magnitude of the last
// retained coefficients; it bounds the truncation error at the rim of the
// usable disk.
struct LocalChart {
  cplx t0{0.0, 0.0};
  double rho = 0.0;
  std::vector<cplx> tau_c, z_c;  // Taylor coefficients in (t - t0)
  double tail = 0.0;

  cplx tau(cplx t) const;
  cplx dtau(cplx t) const;
  cplx z(cplx t) const;
  cplx dz(cplx t) const;
  CurveSample sample(cplx t) const;
  // Solve tau(t) = target by Newton from t0; requires dtau(t0) != 0 and the
  // solution to stay inside the usable disk.
  cplx t_of_tau(cplx target) const;
  CurveSample sample_at_tau(cplx target) const;
};

// Chart at f.t; rho 0 picks a radius from the distances to the bad points
// and to the ramification points of the classifying map.
LocalChart local_chart(const ParamCurve& curve, cplx c, double rho, int n = 64);
LocalChart local_chart(const lift::SectionLift& l, const lift::FramePoint& f,
                       double rho = 0.0, int n = 64);

// ---------------------------------------------------------------------------
// Differential checks at a chart center (tau usable as coordinate there)

// Finite-difference check of  du/dtaubar = -i conj(u) / (2 Im tau)  with u
// sampled as a function of tau through the chart.
struct PdeCheck {
  cplx u{0.0, 0.0};
  cplx du_dtaubar{0.0, 0.0};
  double residual = 0.0;  // |du/dtaubar + i conj(u)/(2 Im tau)|
  double step = 0.0;      // tau-plane step used
};
PdeCheck pde_residual(const LocalChart& chart);
PdeCheck pde_residual(const lift::SectionLift& l, cplx t);

// v = du/dtau + u/(tau - taubar), the covariant derivative of the
// verticality in the half-canonical frame.  v_series is the same quantity
// assembled from the chart's second derivatives (z''(tau)); the equation
// forces dv/dtaubar = 0, reported as a finite-difference residual.
struct NablaEta {
  cplx v{0.0, 0.0};
  cplx v_series{0.0, 0.0};
  double antiholo = 0.0;  // |dv/dtaubar|
  double step = 0.0;
};
NablaEta nabla_eta(const LocalChart& chart);
NablaEta nabla_eta(const lift::SectionLift& l, cplx t);

// Curvature identity for log psi away from zeros of u:
//   d^2 log psi / dtau dtaubar = 1/(4 Im^2 tau) - Im(v conj(u)/u^2) / Im tau.
// lhs is the finite-difference mixed derivative, rhs uses the v from
// nabla_eta; residual_rel is |lhs - rhs| over the magnitude scale of rhs.
struct CurvatureCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual_rel = 0.0;
};
CurvatureCheck log_psi_laplacian_check(const LocalChart& chart);
CurvatureCheck log_psi_laplacian_check(const lift::SectionLift& l, cplx t);

// ---------------------------------------------------------------------------
// Order estimators

struct WindingResult {
  int turns = 0;
  int samples = 0;
  double max_jump = 0.0;  // largest adjacent phase step, radians
};
// Winding number of u along |w - c| = rho, sampled densely enough that
// every adjacent phase step is below pi/2 (doubling from min_samples).
// Requires a closed circle (no cusp inside).
WindingResult order_by_winding(const ParamCurve& curve, cplx c, double rho,
                               int min_samples = 64, int max_samples = 4096);

enum class LogCorrection { none, plus, minus };
const char* log_correction_name(LogCorrection c);

struct SlopeFit {
  double exponent = 0.0;   // e in  mean psi ~ rho^{2e} |log rho|^{s}
  double intercept = 0.0;
  double r2 = 0.0;
  LogCorrection correction = LogCorrection::none;
  bool converged = false;  // r2 >= 0.999
};

// Mean of psi over the circle |w - c| = rho for each radius.
std::vector<double> psi_circle_means(const ParamCurve& curve, cplx c,
                                     const std::vector<double>& radii,
                                     int n = 64);
// Least squares of log(mean) against 2 log(rho) after subtracting the
// chosen log-factor term; radii must be decreasing and positive.
SlopeFit slope_from_means(const std::vector<double>& radii,
                          const std::vector<double>& means, LogCorrection c);
// All three corrections fitted, smallest residual kept.
SlopeFit slope_auto(const std::vector<double>& radii,
                    const std::vector<double>& means);
SlopeFit order_by_slope(const ParamCurve& curve, cplx c,
                        const std::vector<double>& radii, LogCorrection corr,
                        int n = 64);
// Decreasing geometric radii, ratio one half.
std::vector<double> geometric_radii(double r0, int count);

// ---------------------------------------------------------------------------
// Zero search

struct ZeroRecord {
  cplx t_star{0.0, 0.0};
  int order_winding = 0;
  double order_slope = 0.0;
  double slope_r2 = 0.0;
  double refined_residual = 0.0;  // psi at the refined minimum
  double isolation_radius = 0.0;  // winding circle radius
  bool cluster = false;  // another candidate inside the isolation radius
};

struct GridConfig {
  double half_width = 0.0;  // 0: pick from the bad locus
  int n = 101;              // samples per side
  double exclusion = 0.0;   // 0: half the lift clearance
  double threshold_factor = 1e-6;  // minima below factor * median qualify
  bool invert = false;      // scan in the chart w = 1/t instead
};

// Serpentine grid scan of psi with local minima below the threshold refined
// by compass search on local charts.  Each confirmed zero carries winding
// and slope evidence.  Torsion input yields an empty list trivially, so
// callers run torsion_test first.
std::vector<ZeroRecord> find_zeros(const lift::SectionLift& l,
                                   const GridConfig& cfg);

// ---------------------------------------------------------------------------
// Torsion screen

struct TorsionVerdict {
  bool torsion = false;
  double max_psi = 0.0;
  double threshold = 0.0;
  std::optional<int> algebraic_order;  // order found by scalar multiples
  bool agree = true;  // numeric and algebraic routes consistent
};
TorsionVerdict torsion_test(const lift::SectionLift& l, int grid_n = 11,
                            int order_max = 12);

// ---------------------------------------------------------------------------
// Cusps

// Psi from toroidal chart values and a chart tangent; equals psi_value
// through the coordinate change, and extends where tau does not reach.
double psi_toroidal(const surface::Toroidal& p, cplx v_xi, cplx v_zeta, int k);

struct CuspMultiplicity {
  surface::BasePoint cusp;
  // One more than the contact order of the marker with its limit when that
  // limit sits on the unit circle, 1 otherwise.  With this normalization
  // psi decays like rho^(2 (m_c - 1)) up to a logarithmic factor, the same
  // exponent law the good points obey.
  int m_c = 1;
  int r_c = 1;  // vanishing or pole order of the local lambda model
  // Marker coordinate: whichever of (xi, zeta) stays away from 0 on the
  // approach; the section meets the singular fiber where the other vanishes.
  bool marker_is_zeta = true;
  cplx marker0{0.0, 0.0};    // extrapolated marker value at the cusp
  double marker_err = 0.0;   // extrapolation error estimate
  bool on_unit_circle = false;  // | |marker0| - 1 | <= 1e-4
  int band = 0;              // frozen chart integer n
  int xi_order = 0;          // vanishing order of marker - marker0, if fitted
  double xi_order_r2 = 0.0;
  double psi_slope = 0.0;    // radial decay exponent of psi, log-corrected
  LogCorrection psi_corr = LogCorrection::none;
  double psi_slope_r2 = 0.0;
  bool indeterminate = false;  // unit-circle band hit but order fit failed
  bool slope_disagrees = false;  // psi exponent differs from xi-order reading
  std::string evidence;
};
// Multiplicity of the section at a bad point, from radial approaches on
// several rays.  The continued frames are mapped to a standard cusp chart
// before the toroidal coordinates are read off.
CuspMultiplicity cusp_multiplicity(const lift::SectionLift& l,
                                   const surface::BadPoint& cusp);

}  // namespace bettilab::verticality

#endif
