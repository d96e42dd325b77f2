#include "bettilab/periods.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bettilab::periods {

namespace {

double dist_point_segment(cplx p, cplx a, cplx b) {
  cplx d = b - a;
  double len2 = std::norm(d);
  if (len2 == 0.0) return std::abs(p - a);
  double t = std::clamp(
      ((p - a).real() * d.real() + (p - a).imag() * d.imag()) / len2, 0.0, 1.0);
  return std::abs(p - (a + t * d));
}

double orient(cplx a, cplx b, cplx c) {
  return (b.real() - a.real()) * (c.imag() - a.imag()) -
         (b.imag() - a.imag()) * (c.real() - a.real());
}

// Strict interior crossing; touching endpoints do not count.
bool segments_cross(cplx a1, cplx b1, cplx a2, cplx b2) {
  double o1 = orient(a1, b1, a2), o2 = orient(a1, b1, b2);
  double o3 = orient(a2, b2, a1), o4 = orient(a2, b2, b1);
  return (o1 * o2 < 0.0) && (o3 * o4 < 0.0);
}

bool on_cut(cplx lambda) {
  return lambda.imag() == 0.0 &&
         (lambda.real() <= 0.0 || lambda.real() >= 1.0);
}

}  // namespace

cplx agm(cplx a, cplx b) {
  if (a == cplx{0.0, 0.0} || b == cplx{0.0, 0.0})
    throw numeric_error("agm of zero");
  for (int iter = 0; iter < 120; ++iter) {
    if (std::abs(a - b) <= 4e-16 * (std::abs(a) + std::abs(b)))
      return 0.5 * (a + b);
    cplx am = 0.5 * (a + b);
    cplx gm = std::sqrt(a * b);
    // Optimal branch: keep the means in the same half plane; exact ties go
    // to the root with positive imaginary part relative to the mean.
    double d_minus = std::abs(am - gm), d_plus = std::abs(am + gm);
    if (d_minus > d_plus)
      gm = -gm;
    else if (d_minus == d_plus && (gm / am).imag() < 0.0)
      gm = -gm;
    a = am;
    b = gm;
  }
  throw numeric_error("agm failed to converge");
}

Vec2 PeriodBasis::lattice_coords(cplx v) const {
  return solve2x2(omega1.real(), omega2.real(), omega1.imag(), omega2.imag(),
                  v.real(), v.imag());
}

cplx PeriodBasis::reduce(cplx z) const {
  Vec2 c = lattice_coords(z);
  double m = c.x - std::round(c.x);
  double n = c.y - std::round(c.y);
  return m * omega1 + n * omega2;
}

PeriodBasis periods_agm(cplx lambda) {
  if (std::abs(lambda) < 1e-13 || std::abs(lambda - 1.0) < 1e-13)
    throw numeric_error("periods_agm: lambda too close to a degenerate fiber");
  if (on_cut(lambda))
    throw numeric_error("periods_agm: lambda on a branch cut");
  PeriodBasis basis;
  basis.omega1 = 2.0 * PI / agm(1.0, std::sqrt(1.0 - lambda));
  basis.omega2 = 2.0 * PI * I / agm(1.0, std::sqrt(lambda));
  if (basis.tau().imag() <= 0.0)
    throw numeric_error("periods_agm: basis lost its orientation");
  return basis;
}

PeriodBasis periods_agm_above(double lambda) {
  if (lambda > 0.0 && lambda < 1.0) return periods_agm(cplx(lambda, 0.0));
  // With the imaginary part an exact positive zero, the principal square
  // roots of lambda and 1 - lambda evaluate to their limits from the upper
  // half plane, so no cut check is needed.
  cplx lam(lambda, +0.0);
  if (std::abs(lam) < 1e-13 || std::abs(lam - 1.0) < 1e-13)
    throw numeric_error("periods_agm: lambda too close to a degenerate fiber");
  PeriodBasis basis;
  basis.omega1 = 2.0 * PI / agm(1.0, std::sqrt(1.0 - lam));
  basis.omega2 = 2.0 * PI * I / agm(1.0, std::sqrt(lam));
  if (basis.tau().imag() <= 0.0)
    throw numeric_error("periods_agm: basis lost its orientation");
  return basis;
}

Rebase rebase(const PeriodBasis& a, const PeriodBasis& b) {
  Vec2 c1 = b.lattice_coords(a.omega1);
  Vec2 c2 = b.lattice_coords(a.omega2);
  Rebase r;
  r.m[0][0] = std::llround(c1.x);
  r.m[0][1] = std::llround(c1.y);
  r.m[1][0] = std::llround(c2.x);
  r.m[1][1] = std::llround(c2.y);
  r.residual = std::max({std::abs(c1.x - double(r.m[0][0])),
                         std::abs(c1.y - double(r.m[0][1])),
                         std::abs(c2.x - double(r.m[1][0])),
                         std::abs(c2.y - double(r.m[1][1]))});
  r.det = r.m[0][0] * r.m[1][1] - r.m[0][1] * r.m[1][0];
  return r;
}

bool same_lattice(const PeriodBasis& a, const PeriodBasis& b, double tol) {
  try {
    Rebase ab = rebase(a, b);
    Rebase ba = rebase(b, a);
    return ab.residual < tol && ba.residual < tol && std::labs(ab.det) == 1 &&
           std::labs(ba.det) == 1;
  } catch (const numeric_error&) {
    return false;
  }
}

namespace {

// Principal basis for continuation purposes.  Rebasing only needs some valid
// basis of the lattice at b, so exact-real samples on the cut may use the
// limit from above; the integer matrix absorbs the branch choice.
PeriodBasis principal_any(cplx b) {
  if (b.imag() == 0.0) return periods_agm_above(b.real());
  return periods_agm(b);
}

// One continuation step: re-express `cur` in the principal basis at b.
// Both the integer rounding and the basis drift must be small, otherwise the
// caller subdivides; aliasing onto a wrong integer matrix would move the
// basis by at least one period and trips the drift bound.
bool try_step(PeriodBasis& cur, cplx b) {
  PeriodBasis pb;
  try {
    pb = principal_any(b);
  } catch (const numeric_error&) {
    return false;
  }
  Rebase r;
  try {
    r = rebase(cur, pb);
  } catch (const numeric_error&) {
    return false;
  }
  if (r.residual > 0.08 || r.det != 1) return false;
  cplx n1 = double(r.m[0][0]) * pb.omega1 + double(r.m[0][1]) * pb.omega2;
  cplx n2 = double(r.m[1][0]) * pb.omega1 + double(r.m[1][1]) * pb.omega2;
  double span = std::abs(cur.omega1) + std::abs(cur.omega2);
  if (std::abs(n1 - cur.omega1) > 0.25 * span ||
      std::abs(n2 - cur.omega2) > 0.25 * span)
    return false;
  cur = PeriodBasis{n1, n2};
  return true;
}

void continue_segment(PeriodBasis& cur, cplx a, cplx b, int depth) {
  if (try_step(cur, b)) return;
  if (depth > 48)
    throw numeric_error("period continuation failed to subdivide");
  cplx m = a + 0.5 * (b - a);
  continue_segment(cur, a, m, depth + 1);
  continue_segment(cur, m, b, depth + 1);
}

}  // namespace

PeriodBasis continue_along(const std::vector<cplx>& polyline,
                           const PeriodBasis& start) {
  if (polyline.size() < 1)
    throw numeric_error("continue_along: empty path");
  {
    Rebase r = rebase(start, principal_any(polyline.front()));
    if (r.residual > 0.05 || r.det != 1)
      throw numeric_error("continue_along: start basis does not describe the "
                          "lattice at the path start");
  }
  PeriodBasis cur = start;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i)
    continue_segment(cur, polyline[i], polyline[i + 1], 0);
  return cur;
}

namespace {

struct Edge {
  cplx integral;   // of dx/y from the branch point e to the target
  cplx y_end;      // tracked y at the target
  double err = 0.0;
  long evaluations = 0;
  bool converged = true;
};

// Integral of dx/y out of a simple branch point, desingularized by
// x = e + u^2.  The branch of y is the edge's own; the caller reconciles
// signs at junctions.
Edge edge_integral(cplx e, cplx target, cplx lambda, double tol) {
  const cplx pts[3] = {cplx{0.0, 0.0}, cplx{1.0, 0.0}, lambda};
  double scale = std::max({1.0, std::abs(lambda), std::abs(target)});
  int which = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(e - pts[i]) < std::abs(e - pts[which])) which = i;
  if (std::abs(e - pts[which]) > 1e-9 * scale)
    throw numeric_error("edge_integral: start is not a branch point");
  cplx o1 = pts[(which + 1) % 3], o2 = pts[(which + 2) % 3];

  cplx u_end = std::sqrt(target - e);
  auto g = [=](double s) {
    cplx x = e + (s * s) * (target - e);
    return (x - o1) * (x - o2);
  };
  BranchedSqrt bs(g, cplx{0.0, 0.0});
  auto integrand = [&](double s) { return 2.0 * u_end / bs.eval(s); };
  QuadResult q = integrate_gk(integrand, 0.0, 1.0, tol);
  Edge out;
  out.integral = q.value;
  out.y_end = u_end * bs.eval(1.0);
  out.err = q.error;
  out.evaluations = q.evaluations;
  out.converged = q.converged;
  return out;
}

struct HalfPeriod {
  cplx value;
  double err = 0.0;
  long evaluations = 0;
  bool converged = true;
  std::vector<cplx> polyline;  // for crossing checks between the two arcs
};

// Integral of dx/y between two branch points through a junction that stays
// clear of the third branch point.
HalfPeriod half_period(cplx e_from, cplx e_to, cplx third, cplx lambda,
                       double tol) {
  double scale = std::max({1.0, std::abs(lambda), std::abs(1.0 - lambda)});
  cplx junction = 0.5 * (e_from + e_to);
  if (dist_point_segment(third, e_from, e_to) < 0.15 * scale) {
    cplx dir = e_to - e_from;
    cplx nu = I * dir / std::abs(dir);
    double side = (std::conj(nu) * (third - junction)).real();
    cplx offset = (side >= 0.0 ? -nu : nu) * (0.45 * scale);
    junction += offset;
    if (dist_point_segment(third, e_from, junction) < 0.12 * scale ||
        dist_point_segment(third, junction, e_to) < 0.12 * scale)
      throw numeric_error("half_period: no clear path between branch points");
  }
  Edge a = edge_integral(e_from, junction, lambda, 0.5 * tol);
  Edge b = edge_integral(e_to, junction, lambda, 0.5 * tol);
  double match = std::min(std::abs(b.y_end - a.y_end),
                          std::abs(b.y_end + a.y_end));
  if (match > 1e-5 * (1.0 + std::abs(a.y_end)))
    throw numeric_error("half_period: sheets failed to meet at the junction");
  bool same_sheet = std::abs(b.y_end - a.y_end) <= std::abs(b.y_end + a.y_end);
  HalfPeriod h;
  h.value = same_sheet ? (a.integral - b.integral) : (a.integral + b.integral);
  h.err = a.err + b.err;
  h.evaluations = a.evaluations + b.evaluations;
  h.converged = a.converged && b.converged;
  h.polyline = {e_from, junction, e_to};
  return h;
}

}  // namespace

OracleResult periods_oracle(cplx lambda, double tol) {
  if (std::abs(lambda) < 1e-6 || std::abs(lambda - 1.0) < 1e-6)
    throw numeric_error("periods_oracle: lambda too close to a degenerate "
                        "fiber");
  HalfPeriod h1 = half_period(0.0, lambda, 1.0, lambda, 0.5 * tol);
  HalfPeriod h2 = half_period(lambda, 1.0, 0.0, lambda, 0.5 * tol);
  // The two defining arcs may only meet at lambda, else the contour classes
  // are not the intended ones.
  for (std::size_t i = 0; i + 1 < h1.polyline.size(); ++i)
    for (std::size_t j = 0; j + 1 < h2.polyline.size(); ++j) {
      if (i + 2 == h1.polyline.size() && j == 0) continue;  // share lambda
      if (segments_cross(h1.polyline[i], h1.polyline[i + 1], h2.polyline[j],
                         h2.polyline[j + 1]))
        throw numeric_error("periods_oracle: contour arcs cross");
    }
  OracleResult out;
  out.basis.omega1 = 2.0 * h1.value;
  out.basis.omega2 = 2.0 * h2.value;
  if (out.basis.tau().imag() < 0.0) out.basis.omega2 = -out.basis.omega2;
  out.err = 2.0 * (h1.err + h2.err);
  out.evaluations = h1.evaluations + h2.evaluations;
  out.converged = h1.converged && h2.converged;
  return out;
}

namespace {

// Polyline from `from` to `to` that keeps clear of the obstacles, bending
// around the closest offender.
void dodge(std::vector<cplx>& acc, cplx from, cplx to,
           const std::vector<cplx>& obstacles, double d_min, double d_off,
           int depth) {
  if (depth > 8) throw numeric_error("path dodging failed to settle");
  const cplx* worst = nullptr;
  double worst_d = d_min;
  for (const cplx& e : obstacles) {
    // Obstacles at the very ends are the caller's concern.
    if (std::abs(e - from) < 0.5 * d_min || std::abs(e - to) < 0.5 * d_min)
      continue;
    double d = dist_point_segment(e, from, to);
    if (d < worst_d) {
      worst_d = d;
      worst = &e;
    }
  }
  if (worst == nullptr) {
    acc.push_back(to);
    return;
  }
  cplx d = to - from;
  double len2 = std::norm(d);
  double t = std::clamp(((*worst - from).real() * d.real() +
                         (*worst - from).imag() * d.imag()) /
                            len2,
                        0.0, 1.0);
  cplx closest = from + t * d;
  cplx nu = closest - *worst;
  if (std::abs(nu) < 1e-14)
    nu = I * d / std::abs(d);
  else
    nu /= std::abs(nu);
  cplx waypoint = *worst + nu * d_off;
  dodge(acc, from, waypoint, obstacles, d_min, d_off, depth + 1);
  dodge(acc, waypoint, to, obstacles, d_min, d_off, depth + 1);
}

std::vector<cplx> dodged_polyline(cplx from, cplx to,
                                  const std::vector<cplx>& obstacles,
                                  double d_min, double d_off) {
  std::vector<cplx> acc{from};
  dodge(acc, from, to, obstacles, d_min, d_off, 0);
  return acc;
}

double polyline_clearance(const std::vector<cplx>& pl,
                          const std::vector<cplx>& obstacles) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < pl.size(); ++i)
    for (const cplx& e : obstacles) {
      if (std::abs(e - pl.front()) < 1e-12 || std::abs(e - pl.back()) < 1e-12)
        continue;
      best = std::min(best, dist_point_segment(e, pl[i], pl[i + 1]));
    }
  return best;
}

}  // namespace

cplx elliptic_log(cplx lambda, const curve::CurvePoint& p, double tol) {
  if (p.infinite) return cplx{0.0, 0.0};
  if (curve::on_curve_residual(lambda, p) > 1e-8)
    throw numeric_error("elliptic_log: point is not on the curve");
  double scale = std::max(1.0, std::abs(lambda));
  const std::vector<cplx> branch_pts{cplx{0.0, 0.0}, cplx{1.0, 0.0}, lambda};

  // An x near a branch point (a two-torsion x lands exactly on one) makes
  // the direct quadrature grind against argument roundoff, so the final
  // stretch runs through the edge chart x = e + s^2 (target - e), where the
  // square root is smooth through the branch point.
  bool edge_end = false;
  cplx edge_e;
  double edge_sep = 0.0;
  for (const cplx& e : branch_pts) {
    double sep = std::numeric_limits<double>::infinity();
    for (const cplx& f : branch_pts)
      if (std::abs(f - e) > 0.0) sep = std::min(sep, std::abs(f - e));
    double d = std::abs(p.x - e);
    // Both gates matter: closeness on the global scale, and closeness
    // relative to the gap separating e from its neighbours, so a huge
    // lambda cannot drag a comfortably distant x into the edge chart.
    if (d < 0.03 * scale && d < 0.25 * sep &&
        (!edge_end || d < std::abs(p.x - edge_e))) {
      edge_end = true;
      edge_e = e;
      edge_sep = sep;
    }
  }

  double d_min = 0.08 * scale;
  for (const cplx& e : branch_pts) {
    double d = std::abs(p.x - e);
    if (!edge_end && d < 2.0 * d_min) d_min = std::max(1e-4, 0.45 * d);
  }
  double d_off = 0.30 * scale;

  cplx inner_target = p.x;
  if (edge_end) {
    cplx away = p.x - lambda / 2.0;
    if (std::abs(away) < 1e-9) away = 1.0;
    inner_target =
        edge_e + std::min(0.3 * scale, 0.5 * edge_sep) * away / std::abs(away);
  }

  // Pick the far entry angle with the best clearance.
  double radius = 8.0 * std::max({1.0, std::abs(lambda), std::abs(p.x)});
  std::vector<cplx> path;
  double best_score = -1.0;
  for (int k = 0; k < 16; ++k) {
    cplx x0 = std::polar(radius, 2.0 * PI * (k + 0.37) / 16.0);
    try {
      auto cand = dodged_polyline(x0, inner_target, branch_pts, d_min, d_off);
      double score = polyline_clearance(cand, branch_pts);
      if (score > best_score) {
        best_score = score;
        path = std::move(cand);
      }
    } catch (const numeric_error&) {
    }
  }
  if (path.empty()) throw numeric_error("elliptic_log: no usable path");

  // Each leg gets a share of the requested tolerance in absolute terms.  At
  // large lambda the legs are long but their masses are tiny (the integrand
  // scales like 1 / sqrt(lambda)), so an absolute floor tied to the path
  // length would dwarf the period scale and let the quadrature stop after a
  // single panel; the integrator's own mass-relative floor and stuck-panel
  // rules already absorb argument roundoff without outside help.
  double leg_tol = tol / double(path.size() + 2);

  // Leg through the chart at infinity: x = w^-2, dx/y = -2 dw / s with
  // s^2 = (1 - w^2)(1 - lambda w^2), from w = 0 to the far point.
  cplx x0 = path.front();
  cplx w0 = std::exp(-0.5 * std::log(x0));
  auto gw = [=](double u) {
    cplx w = u * w0;
    return (1.0 - w * w) * (1.0 - lambda * w * w);
  };
  BranchedSqrt bw(gw, cplx{1.0, 0.0});
  QuadResult qw = integrate_gk(
      [&](double u) { return -2.0 * w0 / bw.eval(u); }, 0.0, 1.0, leg_tol);
  cplx acc = qw.value;
  cplx y_cur = bw.eval(1.0) / (w0 * w0 * w0);

  auto f = [=](cplx x) { return curve::curve_rhs(lambda, x); };
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    cplx a = path[i], b = path[i + 1];
    auto leg = [=](double u) { return f(a + u * (b - a)); };
    cplx f0 = leg(0.0);
    if (std::abs(y_cur * y_cur - f0) > 1e-5 * (1.0 + std::abs(f0)))
      throw numeric_error("elliptic_log: sheet seed inconsistent");
    BranchedSqrt bs(leg, y_cur);
    QuadResult q = integrate_gk(
        [&](double u) { return (b - a) / bs.eval(u); }, 0.0, 1.0, leg_tol);
    acc += q.value;
    y_cur = bs.end_value();
  }

  if (edge_end) {
    // In from inner_target to the branch point, then back out to p.x, both
    // through the edge chart.  The two edges share the principal square
    // root of the smooth factor at s = 0, so the sheet continues through
    // the branch point; one sign, fixed at the junction with the tracked
    // path, covers the whole V.
    Edge e_in = edge_integral(edge_e, inner_target, lambda, leg_tol);
    if (std::min(std::abs(e_in.y_end - y_cur), std::abs(e_in.y_end + y_cur)) >
        1e-5 * (1.0 + std::abs(y_cur)))
      throw numeric_error("elliptic_log: edge junction sheet mismatch");
    const double sgn =
        std::abs(e_in.y_end - y_cur) <= std::abs(e_in.y_end + y_cur) ? 1.0
                                                                     : -1.0;
    acc -= sgn * e_in.integral;
    cplx y_fin{0.0, 0.0};
    if (std::abs(p.x - edge_e) > 1e-14 * scale) {
      Edge e_p = edge_integral(edge_e, p.x, lambda, leg_tol);
      acc += sgn * e_p.integral;
      y_fin = sgn * e_p.y_end;
    }
    if (std::min(std::abs(y_fin - p.y), std::abs(y_fin + p.y)) >
        1e-5 * (1.0 + std::abs(p.y)))
      throw numeric_error("elliptic_log: edge endpoint sheet mismatch");
    if (std::abs(y_fin - p.y) <= std::abs(y_fin + p.y)) return acc;
    return -acc;
  }

  double match = std::min(std::abs(y_cur - p.y), std::abs(y_cur + p.y));
  if (match > 1e-5 * (1.0 + std::abs(p.y)))
    throw numeric_error("elliptic_log: endpoint sheet mismatch");
  // Landing on the opposite sheet means the integral reached -P; negating
  // it gives the logarithm of P modulo the lattice.
  if (std::abs(y_cur - p.y) <= std::abs(y_cur + p.y)) return acc;
  return -acc;
}

cplx dtau_dlambda(cplx lambda, const PeriodBasis& basis) {
  return -4.0 * PI * I /
         (lambda * (1.0 - lambda) * basis.omega1 * basis.omega1);
}

cplx Mobius::apply(cplx tau) const {
  return (double(a) * tau + double(b)) / (double(c) * tau + double(d));
}

Mobius Mobius::compose(const Mobius& o) const {
  Mobius r;
  r.a = a * o.a + b * o.c;
  r.b = a * o.b + b * o.d;
  r.c = c * o.a + d * o.c;
  r.d = c * o.b + d * o.d;
  return r;
}

std::pair<cplx, Mobius> reduce_gamma2(cplx tau) {
  if (tau.imag() <= 0.0)
    throw numeric_error("reduce_gamma2: not in the upper half plane");
  Mobius m;
  for (int iter = 0; iter < 512; ++iter) {
    long n = std::lround(tau.real() / 2.0);
    if (n != 0) {
      tau -= 2.0 * double(n);
      m = Mobius{1, -2 * n, 0, 1}.compose(m);
    }
    if (std::abs(2.0 * tau + 1.0) < 1.0 - 1e-13) {
      Mobius g{1, 0, 2, 1};
      tau = g.apply(tau);
      m = g.compose(m);
      continue;
    }
    if (std::abs(2.0 * tau - 1.0) < 1.0 - 1e-13) {
      Mobius g{1, 0, -2, 1};
      tau = g.apply(tau);
      m = g.compose(m);
      continue;
    }
    return {tau, m};
  }
  throw numeric_error("reduce_gamma2 failed to terminate");
}

std::pair<cplx, Mobius> reduce_sl2(cplx tau) {
  if (tau.imag() <= 0.0)
    throw numeric_error("reduce_sl2: not in the upper half plane");
  Mobius m;
  for (int iter = 0; iter < 512; ++iter) {
    long n = std::lround(tau.real());
    if (n != 0) {
      tau -= double(n);
      m = Mobius{1, -n, 0, 1}.compose(m);
    }
    if (std::abs(tau) < 1.0 - 1e-13) {
      Mobius s{0, -1, 1, 0};
      tau = s.apply(tau);
      m = s.compose(m);
      continue;
    }
    return {tau, m};
  }
  throw numeric_error("reduce_sl2 failed to terminate");
}

bool gamma2_equivalent(cplx t1, cplx t2, double tol) {
  cplx r1 = reduce_gamma2(t1).first;
  cplx r2 = reduce_gamma2(t2).first;
  const Mobius edges[5] = {{1, 0, 0, 1}, {1, 2, 0, 1}, {1, -2, 0, 1},
                           {1, 0, 2, 1}, {1, 0, -2, 1}};
  for (const Mobius& g : edges)
    if (hyperbolic_distance(r1, g.apply(r2)) < tol) return true;
  return false;
}

}  // namespace bettilab::periods
