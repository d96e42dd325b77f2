#ifndef BETTILAB_LIFT_HPP
#define BETTILAB_LIFT_HPP

// Analytic lift of a section over the base.  Away from the bad fibers every
// parameter t carries a period basis and an abelian logarithm of the section
// point, both continued from a fixed anchor, so t -> (tau(t), z(t)) is a
// single continuous branch along the path taken.  Frames move by short hops
// whose z increment must stay under half the shortest lattice vector and
// must be reproduced through the hop's midpoint; that keeps the modular
// reconciliation of each fresh logarithm unambiguous.

#include "bettilab/periods.hpp"
#include "bettilab/surface.hpp"

#include <vector>

namespace bettilab::lift {

// One point of the lifted section.  log_raw and the basis live on a common
// scale, so the normalized coordinate and the Betti pair are ratios.
struct FramePoint {
  cplx t{0.0, 0.0};
  cplx lambda{0.0, 0.0};
  periods::PeriodBasis basis;  // lattice basis continued from the anchor
  cplx log_raw{0.0, 0.0};      // abelian log of the section, same branch

  cplx tau() const { return basis.tau(); }
  // Coordinate on C / (Z + Z tau).
  cplx z() const { return log_raw / basis.omega1; }
  // (beta1, beta2) with z = beta1 + beta2 tau.
  Vec2 betti() const { return basis.lattice_coords(log_raw); }
};

// Shortest nonzero vector of the lattice, by Lagrange reduction of the
// basis; invariant under the integer rebasing done during continuation.
double shortest_period(const periods::PeriodBasis& basis);

class SectionLift {
public:
  explicit SectionLift(const surface::SurfaceSpec& spec);

  const surface::SurfaceSpec& spec() const { return spec_; }
  const std::vector<surface::BadPoint>& bad_points() const { return bad_; }
  const FramePoint& anchor() const { return anchor_; }
  // Largest pairwise distance among the finite bad points (1 when none).
  double scale() const { return scale_; }
  // Default distance kept from bad points when routing paths.
  double clearance() const { return clearance_; }

  // Local models of lambda at the bad points, aligned with bad_points().
  const std::vector<surface::CuspLocalModel>& cusp_models() const {
    return models_;
  }
  // Model whose activation disk covers t, null otherwise.
  const surface::CuspLocalModel* model_near(cplx t) const;

  // lambda(t); near a cusp the value is routed through the local model, so
  // the small quantity among lambda, lambda - 1, 1 / lambda keeps full
  // relative precision.
  cplx lambda_at(cplx t) const;
  // Section point on the fiber over t; throws on coordinate poles.
  curve::CurvePoint section_at(cplx t) const;

  // Frame at t, continued from the anchor along a path that dodges the bad
  // points.  Targets inside the clearance disk of a bad point are reached
  // by a final radial leg.
  FramePoint eval(cplx t) const;
  // Frame at t continued from an existing frame along the straight segment,
  // subdividing adaptively.  The segment itself must keep clear of bad
  // points; callers route around them.
  FramePoint step(const FramePoint& from, cplx t) const;
  // n + 1 frames on the circle |t - c| = rho, continued sequentially from
  // `base`: entries 0..n-1 sit at angles 2 pi j / n and the last entry
  // closes the loop back to angle 0.  With require_trivial the closure must
  // reproduce the first frame (the loop bounds a disk of good fibers);
  // without it the mismatch of the two end frames is the monodromy.
  std::vector<FramePoint> circle(const FramePoint& base, cplx c, double rho,
                                 int n, bool require_trivial = true) const;

  // First and second t-derivatives of tau and of the normalized z, from
  // spectral jets on a circle around f.t (rho 0 picks a default radius).
  struct Jet {
    FramePoint at;
    cplx dtau{0.0, 0.0}, d2tau{0.0, 0.0};
    cplx dz{0.0, 0.0}, d2z{0.0, 0.0};
  };
  Jet jet(const FramePoint& f, double rho = 0.0, int n = 16) const;
  Jet jet_at(cplx t, double rho = 0.0, int n = 16) const;

  // d tau / dt through the hypergeometric Wronskian and the chain rule;
  // needs no sampling and no subdivision.
  cplx dtau_dt(const FramePoint& f) const;

  // Distance from t to the nearest finite bad point (infinity if none).
  double bad_distance(cplx t) const;

private:
  surface::SurfaceSpec spec_;
  algebra::RationalFunction r_prime_;
  std::vector<surface::BadPoint> bad_;
  std::vector<surface::CuspLocalModel> models_;
  std::vector<double> model_radius_;  // per model; 0 for the cusp at infinity
  double far_radius_ = 0.0;           // |t| beyond which the infinite model runs
  std::vector<cplx> finite_bad_;
  double scale_ = 1.0;
  double clearance_ = 0.25;
  FramePoint anchor_;

  FramePoint advance(const FramePoint& from, cplx t_next) const;
  std::vector<cplx> lambda_polyline(cplx a, cplx b) const;
};

}  // namespace bettilab::lift

#endif
