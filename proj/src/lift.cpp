#include "bettilab/lift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace bettilab::lift {

using algebra::Poly;
using algebra::Rat;
using periods::PeriodBasis;

namespace {

double dist_point_segment(cplx p, cplx a, cplx b) {
  cplx d = b - a;
  double len2 = std::norm(d);
  if (len2 == 0.0) return std::abs(p - a);
  double s = std::clamp(
      ((p - a).real() * d.real() + (p - a).imag() * d.imag()) / len2, 0.0,
      1.0);
  return std::abs(p - (a + s * d));
}

// Bend the segment around the worst offender.  An obstacle hugging an
// endpoint only shrinks its required clearance: a radial-leg exit sits on
// its own clearance circle, and the leg must still not cut well inside
// that circle (a collinear approach would otherwise cross the obstacle).
void dodge(std::vector<cplx>& acc, cplx from, cplx to,
           const std::vector<cplx>& obstacles, double d_min, double d_off,
           int depth) {
  if (depth > 10)
    throw numeric_error("section lift: path dodging failed to settle");
  const cplx* worst = nullptr;
  double worst_ratio = 0.999;
  for (const cplx& e : obstacles) {
    double de = std::min(std::abs(e - from), std::abs(e - to));
    double need = std::min(d_min, 0.45 * de);
    if (need <= 1e-13 * (1.0 + std::abs(e))) continue;
    double d = dist_point_segment(e, from, to);
    if (d / need < worst_ratio) {
      worst_ratio = d / need;
      worst = &e;
    }
  }
  if (worst == nullptr) {
    acc.push_back(to);
    return;
  }
  cplx d = to - from;
  double len2 = std::norm(d);
  double s = std::clamp(((*worst - from).real() * d.real() +
                         (*worst - from).imag() * d.imag()) /
                            len2,
                        0.0, 1.0);
  cplx closest = from + s * d;
  cplx nu = closest - *worst;
  if (std::abs(nu) < 1e-14)
    nu = I * d / std::abs(d);
  else
    nu /= std::abs(nu);
  cplx waypoint = *worst + nu * d_off;
  dodge(acc, from, waypoint, obstacles, d_min, d_off, depth + 1);
  dodge(acc, waypoint, to, obstacles, d_min, d_off, depth + 1);
}

std::vector<cplx> dodged_route(cplx from, cplx to,
                               const std::vector<cplx>& obstacles,
                               double d_min, double d_off) {
  std::vector<cplx> acc{from};
  dodge(acc, from, to, obstacles, d_min, d_off, 0);
  return acc;
}

}  // namespace

double shortest_period(const PeriodBasis& basis) {
  cplx u = basis.omega1, v = basis.omega2;
  for (int i = 0; i < 64; ++i) {
    if (std::abs(u) < std::abs(v)) std::swap(u, v);
    if (std::norm(v) == 0.0) return std::abs(u);
    double q = std::round((u * std::conj(v)).real() / std::norm(v));
    if (q == 0.0) break;
    u -= q * v;
  }
  return std::min(std::abs(u), std::abs(v));
}

SectionLift::SectionLift(const surface::SurfaceSpec& spec)
    : spec_(spec), r_prime_(spec.r.derivative()) {
  bad_ = surface::bad_reduction_set(spec_);
  double max_abs = 0.0;
  for (const auto& b : bad_) {
    models_.push_back(surface::cusp_local_model(spec_, b));
    if (!b.point.infinite) {
      finite_bad_.push_back(b.point.t);
      max_abs = std::max(max_abs, std::abs(b.point.t));
    }
  }
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < finite_bad_.size(); ++i)
    for (std::size_t j = i + 1; j < finite_bad_.size(); ++j) {
      double d = std::abs(finite_bad_[i] - finite_bad_[j]);
      scale_ = std::max(scale_, d);
      min_gap = std::min(min_gap, d);
    }
  clearance_ = finite_bad_.size() >= 2 ? 0.25 * min_gap
                                       : 0.25 * std::max(1.0, scale_);
  far_radius_ = 4.0 * (1.0 + max_abs);
  for (const auto& m : models_) {
    if (m.cusp.infinite) {
      model_radius_.push_back(0.0);
      continue;
    }
    double dmin = std::numeric_limits<double>::infinity();
    for (const cplx& c : finite_bad_)
      if (std::abs(c - m.cusp.t) > 1e-12)
        dmin = std::min(dmin, std::abs(c - m.cusp.t));
    if (!std::isfinite(dmin)) dmin = std::max(1.0, scale_);
    model_radius_.push_back(0.45 * dmin);
  }

  // Anchor at a parameter where lambda hits a fixed rational value well
  // inside (0, 1); the first target with a usable preimage wins, so the
  // anchor is a deterministic function of the surface alone.
  static const std::pair<long, long> targets[] = {
      {1, 2}, {1, 3}, {2, 3}, {2, 5}, {3, 5}, {1, 4}, {3, 4}};
  bool found = false;
  cplx t0;
  for (const auto& [tp, tq] : targets) {
    Poly cand = spec_.r.num() * Poly::constant(Rat(tq)) -
                spec_.r.den() * Poly::constant(Rat(tp));
    if (cand.degree() < 1) continue;
    std::vector<algebra::Root> rts;
    try {
      rts = algebra::roots(cand);
    } catch (const std::exception&) {
      continue;
    }
    for (const auto& rt : rts) {
      if (bad_distance(rt.location) < 1.2 * clearance_) continue;
      if (std::abs(rt.location) > 10.0 * std::max(1.0, max_abs)) continue;
      try {
        (void)section_at(rt.location);
      } catch (const std::exception&) {
        continue;
      }
      t0 = rt.location;
      found = true;
      break;
    }
    if (found) break;
  }
  if (!found) throw numeric_error("section lift: no usable anchor parameter");

  anchor_.t = t0;
  anchor_.lambda = lambda_at(t0);
  PeriodBasis b0 = anchor_.lambda.imag() == 0.0
                       ? periods::periods_agm_above(anchor_.lambda.real())
                       : periods::periods_agm(anchor_.lambda);
  auto [tau_red, g] = periods::reduce_gamma2(b0.tau());
  (void)tau_red;
  PeriodBasis rb;
  rb.omega1 = double(g.c) * b0.omega2 + double(g.d) * b0.omega1;
  rb.omega2 = double(g.a) * b0.omega2 + double(g.b) * b0.omega1;
  anchor_.basis = rb;
  cplx zr = periods::elliptic_log(anchor_.lambda, section_at(t0));
  anchor_.log_raw = anchor_.basis.reduce(zr);
}

const surface::CuspLocalModel* SectionLift::model_near(cplx t) const {
  for (std::size_t i = 0; i < models_.size(); ++i) {
    if (models_[i].cusp.infinite) {
      if (std::abs(t) > far_radius_) return &models_[i];
    } else if (std::abs(t - models_[i].cusp.t) < model_radius_[i]) {
      return &models_[i];
    }
  }
  return nullptr;
}

cplx SectionLift::lambda_at(cplx t) const {
  if (const auto* m = model_near(t)) return m->lambda(m->w_of_t(t));
  return spec_.r.eval(t);
}

curve::CurvePoint SectionLift::section_at(cplx t) const {
  return curve::eval_generic(spec_.section, t);
}

double SectionLift::bad_distance(cplx t) const {
  double d = std::numeric_limits<double>::infinity();
  for (const cplx& c : finite_bad_) d = std::min(d, std::abs(t - c));
  return d;
}

std::vector<cplx> SectionLift::lambda_polyline(cplx a, cplx b) const {
  struct Seg {
    cplx ta, tb;
    int depth;
  };
  std::vector<cplx> acc{lambda_at(a)};
  std::vector<Seg> stack{{a, b, 0}};
  while (!stack.empty()) {
    Seg s = stack.back();
    stack.pop_back();
    cplx la = lambda_at(s.ta), lb = lambda_at(s.tb);
    double dpunct = std::min(std::min(std::abs(la), std::abs(la - 1.0)),
                             std::min(std::abs(lb), std::abs(lb - 1.0)));
    bool ok = std::abs(lb - la) <= 0.4 * dpunct &&
              std::abs(s.tb - s.ta) <= 0.25 * bad_distance(s.ta);
    if (ok) {
      acc.push_back(lb);
    } else {
      if (s.depth >= 42)
        throw numeric_error("section lift: lambda path refinement failed");
      cplx m = s.ta + 0.5 * (s.tb - s.ta);
      stack.push_back({m, s.tb, s.depth + 1});
      stack.push_back({s.ta, m, s.depth + 1});
    }
  }
  return acc;
}

FramePoint SectionLift::advance(const FramePoint& from, cplx t_next) const {
  std::vector<cplx> lpoly = lambda_polyline(from.t, t_next);
  PeriodBasis basis = periods::continue_along(lpoly, from.basis);
  curve::CurvePoint p = section_at(t_next);
  cplx zr = periods::elliptic_log(lpoly.back(), p);
  Vec2 c = basis.lattice_coords(zr - from.log_raw);
  cplx z_next = zr - double(std::llround(c.x)) * basis.omega1 -
                double(std::llround(c.y)) * basis.omega2;
  return FramePoint{t_next, lpoly.back(), basis, z_next};
}

FramePoint SectionLift::step(const FramePoint& from, cplx t) const {
  FramePoint cur = from;
  std::vector<cplx> pending{t};
  long hops = 0;
  while (!pending.empty()) {
    cplx target = pending.back();
    if (std::abs(target - cur.t) < 1e-15 * (1.0 + std::abs(cur.t))) {
      pending.pop_back();
      continue;
    }
    // The hop is trustworthy only when z moved by less than half the
    // shortest lattice vector, with margin.  The size test alone is not
    // enough: a true motion close to a whole lattice vector snaps to the
    // wrong representative and still looks small, so every passing hop is
    // recomputed through its midpoint, where a wrong snap surfaces as a
    // full lattice vector between the two endpoint logs.  Halving always
    // reaches a scale whose motion is too small to straddle a cell, so the
    // verification terminates.
    bool accepted = false;
    FramePoint next = advance(cur, target);
    const double sp_next = shortest_period(next.basis);
    if (std::abs(next.log_raw - cur.log_raw) <= 0.35 * sp_next) {
      cplx mid = cur.t + 0.5 * (target - cur.t);
      bool splittable =
          std::abs(mid - cur.t) >= 1e-15 * (1.0 + std::abs(cur.t)) &&
          std::abs(target - mid) >= 1e-15 * (1.0 + std::abs(target));
      if (!splittable) {
        accepted = true;
      } else {
        FramePoint half = advance(cur, mid);
        if (std::abs(half.log_raw - cur.log_raw) <=
            0.35 * shortest_period(half.basis)) {
          FramePoint rejoin = advance(half, target);
          accepted =
              std::abs(rejoin.log_raw - half.log_raw) <= 0.35 * sp_next &&
              std::abs(rejoin.log_raw - next.log_raw) <= 0.05 * sp_next;
        }
      }
    }
    if (accepted) {
      cur = next;
      pending.pop_back();
    } else {
      pending.push_back(cur.t + 0.5 * (target - cur.t));
      if (pending.size() > 80)
        throw numeric_error("section lift: step failed to subdivide");
    }
    if (++hops > 200000)
      throw numeric_error("section lift: step budget exhausted");
  }
  return cur;
}

FramePoint SectionLift::eval(cplx t) const {
  double db = bad_distance(t);
  if (db <= 1e-13 * (1.0 + std::abs(t)))
    throw numeric_error("section lift: evaluation at a bad fiber");
  cplx outer = t;
  bool radial = false;
  if (db < clearance_) {
    const cplx* c = nullptr;
    for (const cplx& e : finite_bad_)
      if (c == nullptr || std::abs(t - e) < std::abs(t - *c)) c = &e;
    cplx dir = (t - *c) / std::abs(t - *c);
    outer = *c + clearance_ * dir;
    radial = true;
  }
  std::vector<cplx> path = dodged_route(anchor_.t, outer, finite_bad_,
                                        clearance_, 1.6 * clearance_);
  if (radial) path.push_back(t);
  FramePoint cur = anchor_;
  for (std::size_t i = 1; i < path.size(); ++i) cur = step(cur, path[i]);
  return cur;
}

std::vector<FramePoint> SectionLift::circle(const FramePoint& base, cplx c,
                                            double rho, int n,
                                            bool require_trivial) const {
  if (rho <= 0.0 || n < 4)
    throw numeric_error("section lift: bad circle parameters");
  std::vector<FramePoint> out;
  out.reserve(std::size_t(n) + 1);
  out.push_back(step(base, c + rho));
  for (int j = 1; j < n; ++j)
    out.push_back(
        step(out.back(), c + rho * std::polar(1.0, 2.0 * PI * j / n)));
  out.push_back(step(out.back(), c + rho));
  if (require_trivial) {
    const FramePoint& f0 = out.front();
    const FramePoint& fc = out.back();
    double cell = shortest_period(f0.basis);
    double span = std::abs(f0.basis.omega1) + std::abs(f0.basis.omega2);
    if (std::abs(fc.log_raw - f0.log_raw) > 1e-6 * cell ||
        std::abs(fc.basis.omega1 - f0.basis.omega1) > 1e-8 * span ||
        std::abs(fc.basis.omega2 - f0.basis.omega2) > 1e-8 * span)
      throw numeric_error("section lift: circle closure failed (the loop is "
                          "not contractible in the good locus)");
  }
  return out;
}

SectionLift::Jet SectionLift::jet(const FramePoint& f, double rho,
                                  int n) const {
  if (rho <= 0.0) {
    rho = std::min(0.35 * bad_distance(f.t), 0.08 * (1.0 + std::abs(f.t)));
    if (!(rho > 0.0))
      throw numeric_error("section lift: no room for a jet circle");
  }
  std::vector<FramePoint> frames = circle(f, f.t, rho, n, true);
  std::vector<cplx> taus, zs;
  taus.reserve(std::size_t(n));
  zs.reserve(std::size_t(n));
  for (int j = 0; j < n; ++j) {
    taus.push_back(frames[std::size_t(j)].tau());
    zs.push_back(frames[std::size_t(j)].z());
  }
  HoloJet jt = spectral_jet_samples(taus, rho);
  HoloJet jz = spectral_jet_samples(zs, rho);
  // The spectral center must reproduce the carried frame, else the circle
  // aliased (radius too large for the nearest singularity).
  if (std::abs(jt.f - f.tau()) > 1e-6 * (1.0 + std::abs(f.tau())) ||
      std::abs(jz.f - f.z()) > 1e-6 * (1.0 + std::abs(f.z())))
    throw numeric_error("section lift: jet circle is aliased");
  Jet out;
  out.at = f;
  out.dtau = jt.df;
  out.d2tau = jt.d2f;
  out.dz = jz.df;
  out.d2z = jz.d2f;
  return out;
}

SectionLift::Jet SectionLift::jet_at(cplx t, double rho, int n) const {
  return jet(eval(t), rho, n);
}

cplx SectionLift::dtau_dt(const FramePoint& f) const {
  return periods::dtau_dlambda(f.lambda, f.basis) * r_prime_.eval(f.t);
}

}  // namespace bettilab::lift
