#include "bettilab/verticality.hpp"

#include "bettilab/periods.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace bettilab::verticality {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

cplx ipow(cplx w, int k) {
  cplx acc{1.0, 0.0};
  for (int i = 0; i < k; ++i) acc *= w;
  return acc;
}

cplx horner(const std::vector<cplx>& c, cplx x) {
  cplx acc{0.0, 0.0};
  for (std::size_t k = c.size(); k-- > 0;) acc = acc * x + c[k];
  return acc;
}

cplx horner_deriv(const std::vector<cplx>& c, cplx x) {
  cplx acc{0.0, 0.0};
  for (std::size_t k = c.size(); k-- > 1;) acc = acc * x + double(k) * c[k];
  return acc;
}

double dist_point_segment(cplx a, cplx b, cplx p) {
  const cplx ab = b - a;
  const double len2 = std::norm(ab);
  if (len2 == 0.0) return std::abs(p - a);
  double s = ((p - a) * std::conj(ab)).real() / len2;
  s = std::clamp(s, 0.0, 1.0);
  return std::abs(p - (a + s * ab));
}

}  // namespace

double psi_value(const CurveSample& s) {
  const double imt = s.tau.imag();
  if (!(imt > 0.0))
    throw numeric_error("psi: sample tau not in the upper half plane");
  const double n2 = std::norm(s.dz * imt - s.dtau * s.z.imag());
  const double d2 = std::norm(s.dtau) * imt;
  if (d2 == 0.0) return n2 == 0.0 ? 0.0 : kInf;
  return n2 / d2;
}

cplx u_value(const CurveSample& s) {
  if (s.dtau == cplx(0.0, 0.0))
    throw numeric_error("u: ramified sample (dtau = 0)");
  return s.dz / s.dtau - s.z.imag() / s.tau.imag();
}

// ---------------------------------------------------------------------------
// Curves

ParamCurve::Circle LiftCurve::circle(cplx c, double rho, int n) const {
  const lift::FramePoint base = lift_->eval(c + rho);
  const auto frames = lift_->circle(base, c, rho, n, false);
  const lift::FramePoint& f0 = frames.front();
  const lift::FramePoint& fn = frames.back();
  const double cell = lift::shortest_period(f0.basis);
  const double span =
      std::max(std::abs(f0.basis.omega1), std::abs(f0.basis.omega2));
  const bool closed = std::abs(fn.log_raw - f0.log_raw) <= 1e-6 * cell &&
                      std::abs(fn.basis.omega1 - f0.basis.omega1) +
                              std::abs(fn.basis.omega2 - f0.basis.omega2) <=
                          1e-7 * span;

  Circle out;
  out.closed = closed;
  if (closed) {
    // One-sided Fourier series of the circle trace gives dz at every sample.
    std::vector<cplx> zs;
    zs.reserve(std::size_t(n));
    for (int j = 0; j < n; ++j) zs.push_back(frames[std::size_t(j)].z());
    const std::vector<cplx> dzs = circle_derivative_samples(zs, rho);
    out.samples.reserve(std::size_t(n));
    for (int j = 0; j < n; ++j) {
      const lift::FramePoint& f = frames[std::size_t(j)];
      out.samples.push_back(CurveSample{f.t, f.tau(), zs[std::size_t(j)],
                                        lift_->dtau_dt(f),
                                        dzs[std::size_t(j)]});
    }
    return out;
  }

  // Monodromy around the circle: z is only continuous as an open chain, so
  // differentiate along the arc and drop the two chain ends.
  const double h = 2.0 * PI / double(n);
  for (int j = 2; j <= n - 2; ++j) {
    const lift::FramePoint& f = frames[std::size_t(j)];
    const cplx dz_dtheta =
        (frames[std::size_t(j - 2)].z() - 8.0 * frames[std::size_t(j - 1)].z() +
         8.0 * frames[std::size_t(j + 1)].z() -
         frames[std::size_t(j + 2)].z()) /
        (12.0 * h);
    const cplx dt_dtheta = I * (f.t - c);
    out.samples.push_back(CurveSample{f.t, f.tau(), f.z(), lift_->dtau_dt(f),
                                      dz_dtheta / dt_dtheta});
  }
  return out;
}

CurveSample LiftCurve::at(cplx w) const {
  const auto J = lift_->jet_at(w);
  return CurveSample{w, J.at.tau(), J.at.z(), J.dtau, J.dz};
}

SyntheticCurve::SyntheticCurve(int m, int r, double z0, double b2, cplx a,
                               cplx tau0, cplx center)
    : m_(m), r_(r), z0_(z0), b2_(b2), a_(a), tau0_(tau0), center_(center) {
  if (m < 1 || r < 1) throw numeric_error("synthetic curve: orders must be >= 1");
}

CurveSample SyntheticCurve::at(cplx w) const {
  const cplx W = w - center_;
  CurveSample s;
  s.w = w;
  s.tau = tau0_ + ipow(W, r_);
  s.dtau = double(r_) * ipow(W, r_ - 1);
  s.z = z0_ + b2_ * s.tau + a_ * ipow(W, m_);
  s.dz = b2_ * s.dtau + double(m_) * a_ * ipow(W, m_ - 1);
  return s;
}

ParamCurve::Circle SyntheticCurve::circle(cplx c, double rho, int n) const {
  Circle out;
  out.samples.reserve(std::size_t(n));
  for (int j = 0; j < n; ++j) {
    const double th = 2.0 * PI * double(j) / double(n);
    out.samples.push_back(at(c + rho * std::exp(I * th)));
  }
  return out;
}

CurveSample ConstantLiftCurve::at(cplx w) const {
  CurveSample s;
  s.w = w;
  s.tau = tau0_ + (w - center_);
  s.dtau = cplx(1.0, 0.0);
  s.z = z0_;
  s.dz = cplx(0.0, 0.0);
  return s;
}

ParamCurve::Circle ConstantLiftCurve::circle(cplx c, double rho, int n) const {
  Circle out;
  out.samples.reserve(std::size_t(n));
  for (int j = 0; j < n; ++j) {
    const double th = 2.0 * PI * double(j) / double(n);
    out.samples.push_back(at(c + rho * std::exp(I * th)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pointwise verticality

VerticalityValue psi_pullback(const lift::SectionLift& l,
                              const lift::SectionLift::Jet& jet) {
  (void)l;
  VerticalityValue v;
  v.tau = jet.at.tau();
  v.dtau_dt = jet.dtau;
  v.dz_dt = jet.dz;
  CurveSample s{jet.at.t, v.tau, jet.at.z(), jet.dtau, jet.dz};
  const double scale = std::abs(jet.dz) + std::abs(jet.dtau);
  if (std::abs(jet.dtau) <= 1e-12 * scale) {
    // Ramification point of the base chart: psi is the common limit along
    // rays, infinite unless the numerator degenerates too.
    v.ray_limit = true;
    s.dtau = cplx(0.0, 0.0);
    v.psi = psi_value(s);
    return v;
  }
  v.u = u_value(s);
  v.psi = psi_value(s);
  return v;
}

VerticalityValue psi_pullback(const lift::SectionLift& l, cplx t) {
  return psi_pullback(l, l.jet_at(t));
}

// ---------------------------------------------------------------------------
// Local chart

cplx LocalChart::tau(cplx t) const { return horner(tau_c, t - t0); }
cplx LocalChart::dtau(cplx t) const { return horner_deriv(tau_c, t - t0); }
cplx LocalChart::z(cplx t) const { return horner(z_c, t - t0); }
cplx LocalChart::dz(cplx t) const { return horner_deriv(z_c, t - t0); }

CurveSample LocalChart::sample(cplx t) const {
  return CurveSample{t, tau(t), z(t), dtau(t), dz(t)};
}

cplx LocalChart::t_of_tau(cplx target) const {
  cplx t = t0;
  for (int it = 0; it < 60; ++it) {
    const cplx f = tau(t) - target;
    const cplx d = dtau(t);
    if (std::abs(d) == 0.0)
      throw numeric_error("chart: dtau vanished during inversion");
    const cplx next = t - f / d;
    if (std::abs(next - t0) > 0.6 * rho)
      throw numeric_error("chart: tau target leaves the usable disk");
    if (std::abs(next - t) <= 1e-15 * (std::abs(next - t0) + rho)) {
      t = next;
      break;
    }
    t = next;
  }
  if (std::abs(tau(t) - target) > 1e-10 * (1.0 + std::abs(target)))
    throw numeric_error("chart: tau inversion did not converge");
  return t;
}

CurveSample LocalChart::sample_at_tau(cplx target) const {
  return sample(t_of_tau(target));
}

LocalChart local_chart(const ParamCurve& curve, cplx c, double rho, int n) {
  if (!(rho > 0.0)) throw numeric_error("chart: radius must be positive");
  const auto circ = curve.circle(c, rho, n);
  if (!circ.closed || int(circ.samples.size()) != n)
    throw numeric_error("chart: circle does not close (cusp inside?)");
  LocalChart chart;
  chart.t0 = c;
  chart.rho = rho;
  const int keep = n / 2;
  chart.tau_c.assign(std::size_t(keep), cplx(0.0, 0.0));
  chart.z_c.assign(std::size_t(keep), cplx(0.0, 0.0));
  // Discrete Fourier coefficients of the circle trace are the Taylor
  // coefficients scaled by rho^k, up to the aliasing tail.
  for (int k = 0; k < keep; ++k) {
    cplx at{0.0, 0.0}, az{0.0, 0.0};
    for (int j = 0; j < n; ++j) {
      const cplx ph = std::exp(-I * (2.0 * PI * double(k) * double(j) / n));
      at += circ.samples[std::size_t(j)].tau * ph;
      az += circ.samples[std::size_t(j)].z * ph;
    }
    const double sc = double(n) * std::pow(rho, k);
    chart.tau_c[std::size_t(k)] = at / sc;
    chart.z_c[std::size_t(k)] = az / sc;
  }
  double peak = 0.0, tail = 0.0;
  for (int k = 0; k < keep; ++k) {
    const double mag = (std::abs(chart.tau_c[std::size_t(k)]) +
                        std::abs(chart.z_c[std::size_t(k)])) *
                       std::pow(rho, k);
    peak = std::max(peak, mag);
    if (k >= keep - 3) tail = std::max(tail, mag);
  }
  chart.tail = peak > 0.0 ? tail / peak : 0.0;
  return chart;
}

namespace {

// Distance from t to the nearest finite ramification point of the
// classifying map (infinite when there is none).
double ram_distance(const lift::SectionLift& l, cplx t) {
  double d = kInf;
  for (const auto& rp : surface::ramification(l.spec()).points)
    if (!rp.point.infinite) d = std::min(d, std::abs(t - rp.point.t));
  return d;
}

double default_chart_radius(const lift::SectionLift& l, cplx t) {
  double rho = 0.35 * l.bad_distance(t);
  rho = std::min(rho, 0.45 * ram_distance(l, t));
  rho = std::min(rho, 0.5 * (1.0 + std::abs(t)));
  if (!(rho > 0.0))
    throw numeric_error("chart: no usable radius at this point");
  return rho;
}

}  // namespace

LocalChart local_chart(const lift::SectionLift& l, const lift::FramePoint& f,
                       double rho, int n) {
  if (rho <= 0.0) rho = default_chart_radius(l, f.t);
  return local_chart(LiftCurve(l), f.t, rho, n);
}

// ---------------------------------------------------------------------------
// Differential checks

namespace {

// tau-plane scale of a chart: the image radius of the usable disk.
double tau_scale(const LocalChart& chart) {
  const cplx d = chart.dtau(chart.t0);
  if (std::abs(d) == 0.0)
    throw numeric_error("check needs an unramified chart center");
  return std::abs(d) * chart.rho;
}

}  // namespace

PdeCheck pde_residual(const LocalChart& chart) {
  const CurveSample s0 = chart.sample(chart.t0);
  const double h = tau_scale(chart) / 24.0;
  auto u_at = [&chart](cplx tau) { return u_value(chart.sample_at_tau(tau)); };
  const Wirtinger W = wirtinger_fd(u_at, s0.tau, h);
  PdeCheck out;
  out.u = u_value(s0);
  out.du_dtaubar = W.d_tbar;
  out.residual =
      std::abs(W.d_tbar + I * std::conj(out.u) / (2.0 * s0.tau.imag()));
  out.step = h;
  return out;
}

PdeCheck pde_residual(const lift::SectionLift& l, cplx t) {
  return pde_residual(local_chart(l, l.eval(t)));
}

NablaEta nabla_eta(const LocalChart& chart) {
  const CurveSample s0 = chart.sample(chart.t0);
  const double H = tau_scale(chart);
  const double h_in = H / 48.0, h_out = H / 12.0;
  auto u_at = [&chart](cplx tau) { return u_value(chart.sample_at_tau(tau)); };
  auto v_at = [&](cplx tau) {
    const Wirtinger W = wirtinger_fd(u_at, tau, h_in);
    return W.d_t + u_at(tau) / (tau - std::conj(tau));
  };
  const Wirtinger WV = wirtinger_fd(v_at, s0.tau, h_out);
  NablaEta out;
  out.v = v_at(s0.tau);
  out.antiholo = std::abs(WV.d_tbar);
  out.step = h_out;
  // Second derivative of z with respect to tau, from the chart series.
  if (chart.tau_c.size() < 3 || chart.z_c.size() < 3)
    throw numeric_error("chart too short for second derivatives");
  const cplx tau_t = chart.tau_c[1], tau_tt = 2.0 * chart.tau_c[2];
  const cplx z_t = chart.z_c[1], z_tt = 2.0 * chart.z_c[2];
  out.v_series = (z_tt * tau_t - z_t * tau_tt) / (tau_t * tau_t * tau_t);
  return out;
}

NablaEta nabla_eta(const lift::SectionLift& l, cplx t) {
  return nabla_eta(local_chart(l, l.eval(t)));
}

CurvatureCheck log_psi_laplacian_check(const LocalChart& chart) {
  const CurveSample s0 = chart.sample(chart.t0);
  const cplx u0 = u_value(s0);
  if (std::norm(u0) == 0.0)
    throw numeric_error("curvature check at a zero of the verticality");
  const double h = tau_scale(chart) / 12.0;
  auto logpsi = [&chart](cplx tau) {
    const double p = psi_value(chart.sample_at_tau(tau));
    if (!(p > 0.0)) throw numeric_error("curvature check hit a zero of psi");
    return std::log(p);
  };
  const double lhs = laplacian_fd(logpsi, s0.tau, h);
  const NablaEta ne = nabla_eta(chart);
  const double imt = s0.tau.imag();
  const double curv = 1.0 / (4.0 * imt * imt);
  const double chi = std::imag(ne.v * std::conj(u0) / (u0 * u0)) / imt;
  CurvatureCheck out;
  out.lhs = lhs;
  out.rhs = curv - chi;
  out.residual_rel = std::abs(lhs - out.rhs) / (curv + std::abs(chi));
  return out;
}

CurvatureCheck log_psi_laplacian_check(const lift::SectionLift& l, cplx t) {
  return log_psi_laplacian_check(local_chart(l, l.eval(t)));
}

// ---------------------------------------------------------------------------
// Order estimators

WindingResult order_by_winding(const ParamCurve& curve, cplx c, double rho,
                               int min_samples, int max_samples) {
  for (int n = min_samples; n <= max_samples; n *= 2) {
    const auto circ = curve.circle(c, rho, n);
    if (!circ.closed)
      throw numeric_error("winding needs a closed circle (cusp inside)");
    const std::size_t nn = circ.samples.size();
    std::vector<cplx> us;
    us.reserve(nn);
    for (const auto& s : circ.samples) us.push_back(u_value(s));
    double total = 0.0, max_jump = 0.0;
    for (std::size_t j = 0; j < nn; ++j) {
      const cplx a = us[j], b = us[(j + 1) % nn];
      if (std::norm(a) == 0.0 || std::norm(b) == 0.0)
        throw numeric_error("winding: u vanishes on the circle");
      const double jump = std::arg(b / a);
      max_jump = std::max(max_jump, std::abs(jump));
      total += jump;
    }
    if (max_jump < PI / 2.0) {
      WindingResult w;
      w.turns = int(std::lround(total / (2.0 * PI)));
      w.samples = int(nn);
      w.max_jump = max_jump;
      if (std::abs(total / (2.0 * PI) - double(w.turns)) > 0.05)
        throw numeric_error("winding: phase sum far from an integer");
      return w;
    }
  }
  throw numeric_error("winding: phase jumps stayed above a quarter turn");
}

const char* log_correction_name(LogCorrection c) {
  switch (c) {
    case LogCorrection::none: return "none";
    case LogCorrection::plus: return "plus";
    case LogCorrection::minus: return "minus";
  }
  return "?";
}

std::vector<double> psi_circle_means(const ParamCurve& curve, cplx c,
                                     const std::vector<double>& radii, int n) {
  std::vector<double> out;
  out.reserve(radii.size());
  for (double rho : radii) {
    const auto circ = curve.circle(c, rho, n);
    if (circ.samples.empty()) throw numeric_error("psi means: empty circle");
    std::vector<double> ps;
    ps.reserve(circ.samples.size());
    for (const auto& s : circ.samples) ps.push_back(psi_value(s));
    out.push_back(pairwise_sum(ps) / double(ps.size()));
  }
  return out;
}

SlopeFit slope_from_means(const std::vector<double>& radii,
                          const std::vector<double>& means, LogCorrection c) {
  if (radii.size() != means.size() || radii.size() < 3)
    throw numeric_error("slope fit needs at least three circles");
  std::vector<double> x, y, raw;
  x.reserve(radii.size());
  y.reserve(radii.size());
  raw.reserve(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0 && radii[i] < 1.0))
      throw numeric_error("slope fit radii must lie in (0, 1)");
    if (i > 0 && radii[i] >= radii[i - 1])
      throw numeric_error("slope fit radii must decrease");
    if (!(means[i] > 0.0) || !std::isfinite(means[i]))
      throw numeric_error("slope fit needs positive finite circle means");
    const double lm = std::log(means[i]);
    const double lcorr = std::log(std::abs(std::log(radii[i])));
    raw.push_back(lm);
    x.push_back(2.0 * std::log(radii[i]));
    y.push_back(lm - (c == LogCorrection::plus
                          ? lcorr
                          : (c == LogCorrection::minus ? -lcorr : 0.0)));
  }
  const LineFit fit = fit_line(x, y);
  // Residuals agree with the raw log-mean residuals (the correction is a
  // fixed offset per point), so score r2 against the raw variance to keep
  // fits with different corrections comparable.
  double sse = 0.0, sst = 0.0, mean_raw = 0.0;
  for (double v : raw) mean_raw += v;
  mean_raw /= double(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double res = y[i] - (fit.intercept + fit.slope * x[i]);
    sse += res * res;
    sst += (raw[i] - mean_raw) * (raw[i] - mean_raw);
  }
  SlopeFit out;
  out.exponent = fit.slope;
  out.intercept = fit.intercept;
  out.correction = c;
  out.r2 = sst > 0.0 ? 1.0 - sse / sst : 1.0;
  out.converged = out.r2 >= 0.999;
  return out;
}

SlopeFit slope_auto(const std::vector<double>& radii,
                    const std::vector<double>& means) {
  SlopeFit best;
  bool have = false;
  for (LogCorrection c :
       {LogCorrection::none, LogCorrection::plus, LogCorrection::minus}) {
    const SlopeFit f = slope_from_means(radii, means, c);
    if (!have || f.r2 > best.r2) {
      best = f;
      have = true;
    }
  }
  return best;
}

SlopeFit order_by_slope(const ParamCurve& curve, cplx c,
                        const std::vector<double>& radii, LogCorrection corr,
                        int n) {
  return slope_from_means(radii, psi_circle_means(curve, c, radii, n), corr);
}

std::vector<double> geometric_radii(double r0, int count) {
  if (!(r0 > 0.0) || count < 1) throw numeric_error("bad radius sequence");
  std::vector<double> out;
  out.reserve(std::size_t(count));
  double r = r0;
  for (int i = 0; i < count; ++i, r *= 0.5) out.push_back(r);
  return out;
}

// ---------------------------------------------------------------------------
// Grid scan shared by the zero search and the torsion screen

namespace {

struct GridScan {
  int n = 0;
  double L = 0.0, cell = 0.0, excl = 0.0;
  bool invert = false;
  std::vector<double> psi;  // n*n, quiet NaN where unavailable
  std::vector<std::optional<lift::FramePoint>> frames;
  std::vector<cplx> ram;  // finite ramification points
  double median = 0.0;
  double max_psi = 0.0;

  std::size_t idx(int i, int j) const {
    return std::size_t(i) * std::size_t(n) + std::size_t(j);
  }
  cplx node(int i, int j) const {
    return cplx(-L + cell * double(j), -L + cell * double(i));
  }
  // Base parameter t of a node.
  cplx t_of(cplx w) const { return invert ? 1.0 / w : w; }
};

double resolve_half_width(const lift::SectionLift& l, const GridConfig& cfg) {
  if (cfg.half_width > 0.0) return cfg.half_width;
  double m = 1.0;
  for (const auto& b : l.bad_points())
    if (!b.point.infinite) m = std::max(m, std::abs(b.point.t));
  const double L = 1.2 * m + 1.0;
  return cfg.invert ? 1.0 / L : L;
}

GridScan scan_psi_grid(const lift::SectionLift& l, const GridConfig& cfg) {
  GridScan g;
  g.n = cfg.n;
  if (g.n < 5) throw numeric_error("grid scan needs at least 5 points a side");
  g.invert = cfg.invert;
  g.L = resolve_half_width(l, cfg);
  g.cell = 2.0 * g.L / double(g.n - 1);
  g.excl = cfg.exclusion > 0.0
               ? cfg.exclusion
               : (cfg.invert ? 2.0 * g.cell : 0.5 * l.clearance());
  for (const auto& rp : surface::ramification(l.spec()).points)
    if (!rp.point.infinite) g.ram.push_back(rp.point.t);
  std::vector<cplx> bad;
  for (const auto& b : l.bad_points())
    if (!b.point.infinite) bad.push_back(b.point.t);

  auto usable = [&](cplx w) -> bool {
    if (g.invert) {
      if (std::abs(w) < g.excl) return false;
      const cplx t = 1.0 / w;
      for (cplx b : bad)
        if (std::abs(t - b) < g.excl) return false;
      for (cplx r : g.ram)
        if (std::norm(r) > 0.0 && std::abs(w - 1.0 / r) < g.excl) return false;
      return true;
    }
    for (cplx b : bad)
      if (std::abs(w - b) < g.excl) return false;
    for (cplx r : g.ram)
      if (std::abs(w - r) < g.excl) return false;
    return true;
  };

  g.psi.assign(std::size_t(g.n) * std::size_t(g.n),
               std::numeric_limits<double>::quiet_NaN());
  g.frames.assign(std::size_t(g.n) * std::size_t(g.n), std::nullopt);

  // Serpentine walk; a fresh anchored evaluation replaces the step whenever
  // the straight segment would brush the excluded zone.
  std::optional<lift::FramePoint> prev;
  for (int i = 0; i < g.n; ++i) {
    const bool fwd = (i % 2 == 0);
    for (int jj = 0; jj < g.n; ++jj) {
      const int j = fwd ? jj : g.n - 1 - jj;
      const cplx w = g.node(i, j);
      if (!usable(w)) continue;
      const cplx t = g.t_of(w);
      try {
        if (!prev) {
          g.frames[g.idx(i, j)] = l.eval(t);
        } else {
          bool risky = false;
          for (cplx b : bad)
            if (dist_point_segment(prev->t, t, b) < 0.6 * g.excl) risky = true;
          if (!g.invert)
            for (cplx r : g.ram)
              if (dist_point_segment(prev->t, t, r) < 1e-3 * g.cell)
                risky = true;
          g.frames[g.idx(i, j)] =
              risky ? l.eval(t) : l.step(*prev, t);
        }
        prev = g.frames[g.idx(i, j)];
      } catch (const std::exception&) {
        // Unreachable node (for instance a pole of the section coordinates);
        // leave the hole and re-anchor at the next node.
        prev.reset();
      }
    }
  }

  // Row-direction finite differences give dz; tau comes analytically.
  std::vector<double> valid;
  for (int i = 0; i < g.n; ++i)
    for (int j = 1; j + 1 < g.n; ++j) {
      const auto& fm = g.frames[g.idx(i, j - 1)];
      const auto& f0 = g.frames[g.idx(i, j)];
      const auto& fp = g.frames[g.idx(i, j + 1)];
      if (!fm || !f0 || !fp) continue;
      CurveSample s;
      s.w = g.node(i, j);
      s.tau = f0->tau();
      s.z = f0->z();
      s.dz = (fp->z() - fm->z()) / (2.0 * g.cell);
      cplx dtau = l.dtau_dt(*f0);
      if (g.invert) {
        const cplx t = f0->t;
        dtau *= -(t * t);  // dt/dw for w = 1/t
      }
      s.dtau = dtau;
      const double p = psi_value(s);
      if (!std::isfinite(p)) continue;
      g.psi[g.idx(i, j)] = p;
      valid.push_back(p);
      g.max_psi = std::max(g.max_psi, p);
    }
  if (valid.size() < 9)
    throw numeric_error("grid scan: too few usable nodes");
  std::nth_element(valid.begin(), valid.begin() + long(valid.size() / 2),
                   valid.end());
  g.median = valid[valid.size() / 2];
  return g;
}

// Compass minimization of psi on a chart around t_c; psi evaluations use
// the chart series, so the search is cheap and deterministic.
struct CompassResult {
  cplx t;
  double psi = 0.0;
};
CompassResult compass_min(const LocalChart& chart, cplx start) {
  static const std::array<cplx, 8> dirs = {
      cplx(1, 0),  cplx(-1, 0), cplx(0, 1),  cplx(0, -1),
      cplx(M_SQRT1_2, M_SQRT1_2),   cplx(-M_SQRT1_2, M_SQRT1_2),
      cplx(M_SQRT1_2, -M_SQRT1_2), cplx(-M_SQRT1_2, -M_SQRT1_2)};
  cplx best = start;
  double p_best = psi_value(chart.sample(best));
  double st = 0.2 * chart.rho;
  int evals = 0;
  while (st > 1e-13 * chart.rho && evals < 600) {
    bool improved = false;
    for (const cplx& d : dirs) {
      const cplx cand = best + st * d;
      if (std::abs(cand - chart.t0) > 0.45 * chart.rho) continue;
      const double p = psi_value(chart.sample(cand));
      ++evals;
      if (p < p_best) {
        p_best = p;
        best = cand;
        improved = true;
      }
    }
    if (!improved) st *= 0.5;
  }
  return CompassResult{best, p_best};
}

}  // namespace

std::vector<ZeroRecord> find_zeros(const lift::SectionLift& l,
                                   const GridConfig& cfg) {
  const GridScan g = scan_psi_grid(l, cfg);
  const double thr = cfg.threshold_factor * g.median;

  // Grid minima under the threshold.
  std::vector<cplx> seeds;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      const double p = g.psi[g.idx(i, j)];
      if (!std::isfinite(p) || p >= thr) continue;
      bool is_min = true;
      for (int di = -1; di <= 1 && is_min; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          const int ii = i + di, jj = j + dj;
          if (ii < 0 || jj < 0 || ii >= g.n || jj >= g.n) continue;
          const double q = g.psi[g.idx(ii, jj)];
          if (std::isfinite(q) && q < p) {
            is_min = false;
            break;
          }
        }
      if (is_min) seeds.push_back(g.t_of(g.node(i, j)));
    }

  // Refine each seed by compass search on recentered local charts.
  std::vector<ZeroRecord> out;
  std::vector<double> local_cell;
  for (cplx seed : seeds) {
    cplx t_c = seed;
    const double cell_t =
        cfg.invert ? g.cell * std::norm(t_c) : g.cell;  // |dt/dw| = |t|^2
    double p_ref = kInf;
    for (int round = 0; round < 4; ++round) {
      double rho = default_chart_radius(l, t_c);
      rho = std::min(rho, std::max(6.0 * cell_t, 0.05 * rho));
      const LocalChart chart = local_chart(l, l.eval(t_c), rho);
      const CompassResult r = compass_min(chart, t_c);
      const double moved = std::abs(r.t - t_c);
      t_c = r.t;
      p_ref = r.psi;
      if (moved < 0.05 * rho) break;
    }
    if (!(p_ref < thr)) continue;  // shallow dip, not a zero

    // Collapse duplicates found from adjacent cells.
    bool dup = false;
    for (std::size_t a = 0; a < out.size(); ++a)
      if (std::abs(out[a].t_star - t_c) < 0.5 * std::max(cell_t, local_cell[a]))
        dup = true;
    if (dup) continue;
    ZeroRecord rec;
    rec.t_star = t_c;
    rec.refined_residual = p_ref;
    out.push_back(rec);
    local_cell.push_back(cell_t);
  }

  // Winding and slope evidence, with isolation radii kept off the bad and
  // ramification loci and away from the other candidates.
  for (std::size_t a = 0; a < out.size(); ++a) {
    ZeroRecord& rec = out[a];
    double iso = 0.4 * l.bad_distance(rec.t_star);
    iso = std::min(iso, 0.45 * ram_distance(l, rec.t_star));
    for (std::size_t b = 0; b < out.size(); ++b)
      if (b != a)
        iso = std::min(iso, 0.4 * std::abs(out[b].t_star - rec.t_star));
    iso = std::min(iso, 0.25 * (1.0 + std::abs(rec.t_star)));
    rec.isolation_radius = iso;
    const LiftCurve curve(l);
    const WindingResult w = order_by_winding(curve, rec.t_star, iso);
    rec.order_winding = w.turns;
    const SlopeFit fit = order_by_slope(curve, rec.t_star,
                                        geometric_radii(0.5 * iso, 6),
                                        LogCorrection::none);
    rec.order_slope = fit.exponent;
    rec.slope_r2 = fit.r2;
  }
  for (std::size_t a = 0; a < out.size(); ++a)
    for (std::size_t b = a + 1; b < out.size(); ++b)
      if (std::abs(out[a].t_star - out[b].t_star) <
          out[a].isolation_radius + out[b].isolation_radius) {
        out[a].cluster = true;
        out[b].cluster = true;
      }
  std::sort(out.begin(), out.end(), [](const ZeroRecord& x, const ZeroRecord& y) {
    if (x.t_star.real() != y.t_star.real())
      return x.t_star.real() < y.t_star.real();
    return x.t_star.imag() < y.t_star.imag();
  });
  return out;
}

// ---------------------------------------------------------------------------
// Torsion screen

TorsionVerdict torsion_test(const lift::SectionLift& l, int grid_n,
                            int order_max) {
  GridConfig cfg;
  cfg.n = grid_n;
  const GridScan g = scan_psi_grid(l, cfg);
  TorsionVerdict v;
  v.max_psi = g.max_psi;
  v.threshold = 1e-14 * l.scale();
  v.torsion = g.max_psi < v.threshold;
  v.algebraic_order =
      curve::torsion_order(l.spec().r, l.spec().section, order_max);
  v.agree = v.torsion == v.algebraic_order.has_value();
  return v;
}

// ---------------------------------------------------------------------------
// Cusps

double psi_toroidal(const surface::Toroidal& p, cplx v_xi, cplx v_zeta,
                    int k) {
  const double ax = std::abs(p.xi), az = std::abs(p.zeta);
  if (!(ax > 0.0) || !(az > 0.0))
    throw numeric_error("toroidal psi: point on the singular fiber");
  const cplx num = v_zeta * p.xi * std::log(ax) - v_xi * p.zeta * std::log(az);
  const cplx mix = p.zeta * v_xi + p.xi * v_zeta;
  const double lq = std::log(ax * az);
  if (!(lq < 0.0))
    throw numeric_error("toroidal psi: chart valid only for |xi zeta| < 1");
  const double den = -2.0 * PI * double(k) * std::norm(mix) * lq;
  if (den == 0.0) return std::norm(num) == 0.0 ? 0.0 : kInf;
  return std::norm(num) / den;
}

namespace {

// Polynomial extrapolation of f(s) to s = 0 from samples at decreasing
// positive nodes (Neville); err is the size of the last correction.
struct Extrapolated {
  cplx value{0.0, 0.0};
  double err = 0.0;
};
Extrapolated neville_to_zero(const std::vector<double>& s,
                             const std::vector<cplx>& f) {
  const std::size_t n = s.size();
  if (n < 2 || f.size() != n) throw numeric_error("extrapolation needs >= 2 nodes");
  std::vector<cplx> p = f;
  cplx prev = p[0];
  double err = kInf;
  for (std::size_t level = 1; level < n; ++level) {
    for (std::size_t i = 0; i + level < n; ++i) {
      // Value at 0 of the interpolant through nodes i..i+level.
      p[i] = (s[i] * p[i + 1] - s[i + level] * p[i]) / (s[i] - s[i + level]);
    }
    err = std::abs(p[0] - prev);
    prev = p[0];
  }
  return Extrapolated{p[0], err};
}

struct RayTrace {
  std::vector<double> radii;     // |w| along the ray, decreasing
  std::vector<cplx> marker;      // marker coordinate per depth
  bool marker_is_zeta = true;
  long band = 0;
  cplx marker0{0.0, 0.0};
  double marker_err = 0.0;
  double order_slope = 0.0;      // fitted vanishing order of marker - marker0
  double order_r2 = 0.0;
  bool order_fitted = false;
};

}  // namespace

CuspMultiplicity cusp_multiplicity(const lift::SectionLift& l,
                                   const surface::BadPoint& cusp) {
  CuspMultiplicity out;
  out.cusp = cusp.point;
  const int k = l.spec().level;

  const surface::CuspLocalModel* model = nullptr;
  for (std::size_t i = 0; i < l.bad_points().size(); ++i)
    if (surface::same_point(l.bad_points()[i].point, cusp.point, 1e-9))
      model = &l.cusp_models()[i];
  if (model == nullptr)
    throw numeric_error("cusp multiplicity: point is not a bad point");
  out.r_c = model->order;

  // Starting radius: close enough that the deviation of lambda from its
  // puncture is small, far enough that the approach stays clear of the
  // other bad points.
  double s0 = cusp.point.infinite ? 0.02 : std::min(0.5, 2.0 * l.clearance());
  for (int guard = 0; guard < 60; ++guard) {
    if (std::abs(model->deviation(s0)) <= 1e-2) break;
    s0 *= 0.5;
  }
  const int n_depth = 11;
  const double ratio = std::pow(10.0, -0.5);

  const std::array<double, 4> angles = {0.31, 0.31 + PI / 2.0, 0.31 + PI,
                                        0.31 + 1.5 * PI};
  std::vector<RayTrace> rays;
  for (double th : angles) {
    const cplx dir = std::exp(I * th);
    RayTrace ray;
    std::vector<cplx> taus, zs;
    lift::FramePoint f = l.eval(model->t_of_w(s0 * dir));
    double s = s0;
    for (int j = 0; j < n_depth; ++j) {
      if (j > 0) {
        s *= ratio;
        f = l.step(f, model->t_of_w(s * dir));
      }
      ray.radii.push_back(s);
      taus.push_back(f.tau());
      zs.push_back(f.z());
    }

    // Map the approach into the standard cusp chart: the reduction of the
    // deepest frame fixes one modular transformation for the whole ray.
    const auto red = periods::reduce_sl2(taus.back());
    const periods::Mobius gm = red.second;
    std::vector<cplx> taut(taus.size()), zt(taus.size());
    for (std::size_t j = 0; j < taus.size(); ++j) {
      const cplx den = double(gm.c) * taus[j] + double(gm.d);
      taut[j] = gm.apply(taus[j]);
      zt[j] = zs[j] / den;
    }
    if (taut.back().imag() < 1.5)
      throw numeric_error("cusp multiplicity: approach not deep enough");

    const double b2_deep = zt.back().imag() / taut.back().imag();
    ray.band = std::lround(double(k) * b2_deep);
    std::vector<cplx> xi(taus.size()), zeta(taus.size());
    for (std::size_t j = 0; j < taus.size(); ++j) {
      const surface::Toroidal tc =
          surface::toroidal_coords(taut[j], zt[j], k, ray.band);
      xi[j] = tc.xi;
      zeta[j] = tc.zeta;
    }
    ray.marker_is_zeta = std::abs(zeta.back()) >= std::abs(xi.back());
    ray.marker = ray.marker_is_zeta ? zeta : xi;

    // Extrapolate the marker to the cusp from the deepest nodes.
    const std::size_t use = std::min<std::size_t>(6, ray.marker.size());
    std::vector<double> sn(ray.radii.end() - long(use), ray.radii.end());
    std::vector<cplx> fn(ray.marker.end() - long(use), ray.marker.end());
    const Extrapolated ex = neville_to_zero(sn, fn);
    ray.marker0 = ex.value;
    ray.marker_err = ex.err;

    // Vanishing order of marker - marker0 along the ray, off the noise floor.
    std::vector<double> lx, ly;
    const double floor = 50.0 * (ex.err + 1e-13);
    for (std::size_t j = 0; j < ray.marker.size(); ++j) {
      const double d = std::abs(ray.marker[j] - ray.marker0);
      if (d > floor) {
        lx.push_back(std::log(ray.radii[j]));
        ly.push_back(std::log(d));
      }
    }
    if (lx.size() >= 4) {
      const LineFit fit = fit_line(lx, ly);
      ray.order_slope = fit.slope;
      ray.order_r2 = fit.r2;
      ray.order_fitted = true;
    }
    rays.push_back(std::move(ray));
  }

  // Cross-ray agreement on the chart-independent quantities.
  out.marker_is_zeta = rays[0].marker_is_zeta;
  out.band = int(rays[0].band);
  out.marker0 = rays[0].marker0;
  out.marker_err = rays[0].marker_err;
  double abs0 = 0.0;
  for (const auto& r : rays) abs0 += std::abs(r.marker0);
  abs0 /= double(rays.size());
  double abs_spread = 0.0;
  for (const auto& r : rays)
    abs_spread = std::max(abs_spread, std::abs(std::abs(r.marker0) - abs0));
  out.on_unit_circle = std::abs(abs0 - 1.0) <= 1e-4;

  if (out.on_unit_circle) {
    double slope_sum = 0.0;
    int fitted = 0;
    double worst_r2 = 1.0;
    for (const auto& r : rays)
      if (r.order_fitted) {
        slope_sum += r.order_slope;
        worst_r2 = std::min(worst_r2, r.order_r2);
        ++fitted;
      }
    if (fitted == 0) {
      out.indeterminate = true;
      out.xi_order = 1;
      out.m_c = 2;
    } else {
      const double mean_slope = slope_sum / double(fitted);
      out.xi_order = std::max(1, int(std::lround(mean_slope)));
      out.xi_order_r2 = worst_r2;
      bool consistent = fitted == int(rays.size()) && worst_r2 >= 0.999;
      for (const auto& r : rays)
        if (r.order_fitted &&
            std::abs(r.order_slope - double(out.xi_order)) > 0.25)
          consistent = false;
      out.indeterminate = !consistent;
      // The multiplicity exceeds the contact order of the marker with its
      // limit by one; the order-zero case is the generic multiplicity one,
      // reached only off the unit circle.
      out.m_c = 1 + out.xi_order;
    }
  } else {
    out.m_c = 1;
  }

  // Radial decay of psi, cross-checking the marker reading.  Circles around
  // the cusp carry monodromy, so the mean uses the open-chain samples.
  {
    std::vector<double> radii;
    for (int j = 1; j <= 6; ++j)
      radii.push_back(s0 * std::pow(ratio, j));
    std::vector<double> means;
    if (cusp.point.infinite) {
      // Circles in w = 1/t around the cusp at infinity: trace the t-image
      // circle, then pull the derivatives back through dw/dt = -1/t^2.
      // Monodromy makes these open chains, so differentiate along the arc.
      means.reserve(radii.size());
      for (double rho : radii) {
        const double R = 1.0 / rho;
        const int n = 64;
        const lift::FramePoint base = l.eval(cplx(R, 0.0));
        const auto frames = l.circle(base, cplx(0.0, 0.0), R, n, false);
        const double h = 2.0 * PI / double(n);
        std::vector<double> ps;
        for (int j = 2; j <= n - 2; ++j) {
          const lift::FramePoint& f = frames[std::size_t(j)];
          const cplx dz_dtheta =
              (frames[std::size_t(j - 2)].z() -
               8.0 * frames[std::size_t(j - 1)].z() +
               8.0 * frames[std::size_t(j + 1)].z() -
               frames[std::size_t(j + 2)].z()) /
              (12.0 * h);
          const cplx dt_dtheta = I * f.t;
          const cplx dw_dt = -1.0 / (f.t * f.t);
          const CurveSample s{1.0 / f.t, f.tau(), f.z(),
                              l.dtau_dt(f) / dw_dt,
                              (dz_dtheta / dt_dtheta) / dw_dt};
          ps.push_back(psi_value(s));
        }
        means.push_back(pairwise_sum(ps) / double(ps.size()));
      }
    } else {
      means = psi_circle_means(LiftCurve(l), cusp.point.t, radii, 64);
    }
    const SlopeFit best = slope_auto(radii, means);
    out.psi_slope = best.exponent;
    out.psi_corr = best.correction;
    out.psi_slope_r2 = best.r2;
  }
  out.slope_disagrees =
      std::abs(out.psi_slope - double(out.m_c - 1)) > 0.25;

  std::ostringstream ev;
  ev.precision(6);
  ev << "band n=" << out.band << "; marker "
     << (out.marker_is_zeta ? "zeta" : "xi") << "; |marker0|=" << abs0
     << " (ray spread " << abs_spread << ", extrap err " << out.marker_err
     << ")";
  if (out.on_unit_circle) {
    ev << "; unit circle hit; marker-order " << out.xi_order << " (worst r2 "
       << out.xi_order_r2 << ") so m_c=" << out.m_c;
    if (out.indeterminate) ev << "; order fit indeterminate";
  } else {
    ev << "; off the unit circle so m_c=1";
  }
  ev << "; psi slope " << out.psi_slope << " (log "
     << log_correction_name(out.psi_corr) << ", r2 " << out.psi_slope_r2
     << ")";
  if (out.slope_disagrees)
    ev << "; psi decay disagrees with the displayed cusp exponent "
       << (out.m_c - 1);
  out.evidence = ev.str();
  return out;
}

}  // namespace bettilab::verticality
