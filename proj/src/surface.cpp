#include "bettilab/surface.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace bettilab::surface {

using algebra::divmod;
using algebra::gcd;
using algebra::roots;
using algebra::to_double;

bool same_point(const BasePoint& a, const BasePoint& b, double tol) {
  if (a.infinite || b.infinite) return a.infinite && b.infinite;
  return std::abs(a.t - b.t) <= tol;
}

// ---------------------------------------------------------------------------
// Parsing.

parse_error::parse_error(int line, int column, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

namespace {

std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct RawField {
  std::string value;
  int line = 0;
  int offset = 0;  // 0-based index of the value within its line
};

// Comma-separated exact rationals, constant term first.
Poly parse_coeffs(const RawField& f) {
  std::vector<algebra::Rat> coeffs;
  std::size_t pos = 0;
  const std::string& v = f.value;
  for (;;) {
    std::size_t comma = v.find(',', pos);
    std::size_t end = (comma == std::string::npos) ? v.size() : comma;
    std::size_t lead = v.find_first_not_of(" \t\r", pos);
    bool empty = (lead == std::string::npos || lead >= end);
    int col = int(f.offset + (empty ? pos : lead)) + 1;
    if (empty) throw parse_error(f.line, col, "empty coefficient");
    try {
      coeffs.push_back(algebra::parse_rat(v.substr(pos, end - pos)));
    } catch (const std::exception& e) {
      throw parse_error(f.line, col, e.what());
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return Poly(std::move(coeffs));
}

}  // namespace

SurfaceSpec parse_surface(std::istream& in) {
  static const char* const known[] = {
      "label",         "level",         "r.num",         "r.den",
      "section.x.num", "section.x.den", "section.y.num", "section.y.den"};
  std::map<std::string, RawField> fields;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string body = line.substr(0, line.find('#'));
    if (trim(body).empty()) continue;
    std::size_t eq = body.find('=');
    int keycol = int(body.find_first_not_of(" \t\r")) + 1;
    if (eq == std::string::npos)
      throw parse_error(lineno, keycol, "expected `key = value`");
    std::string key = trim(body.substr(0, eq));
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) {
          return key == k;
        }) == std::end(known))
      throw parse_error(lineno, keycol, "unknown key `" + key + "`");
    if (fields.count(key))
      throw parse_error(lineno, keycol, "duplicate key `" + key + "`");
    std::size_t voff = body.find_first_not_of(" \t\r", eq + 1);
    if (voff == std::string::npos)
      throw parse_error(lineno, int(eq) + 2, "missing value for `" + key + "`");
    fields[key] = RawField{trim(body.substr(eq + 1)), lineno, int(voff)};
  }

  for (const char* req : {"r.num", "section.x.num", "section.y.num"})
    if (!fields.count(req))
      throw parse_error(lineno + 1, 1,
                        std::string("missing required key `") + req + "`");

  SurfaceSpec spec;
  spec.label = fields.count("label") ? fields["label"].value : "unlabeled";
  if (fields.count("level")) {
    const RawField& f = fields["level"];
    try {
      algebra::Rat k = algebra::parse_rat(f.value);
      if (denominator(k) != 1 || k < 2 || k > 1000000)
        throw numeric_error("level must be an integer >= 2");
      spec.level = int(numerator(k));
    } catch (const std::exception& e) {
      throw parse_error(f.line, f.offset + 1, e.what());
    }
  }

  auto rational = [&](const char* num_key, const char* den_key) {
    Poly num = parse_coeffs(fields[num_key]);
    Poly den = Poly::constant(1);
    if (fields.count(den_key)) {
      den = parse_coeffs(fields[den_key]);
      if (den.is_zero())
        throw parse_error(fields[den_key].line, fields[den_key].offset + 1,
                          "denominator polynomial is zero");
    }
    return RationalFunction(std::move(num), std::move(den));
  };
  spec.r = rational("r.num", "r.den");
  if (spec.r.map_degree() < 1)
    throw parse_error(fields["r.num"].line, fields["r.num"].offset + 1,
                      "classifying map must be non-constant");
  spec.section.x = rational("section.x.num", "section.x.den");
  spec.section.y = rational("section.y.num", "section.y.den");
  spec.section.infinite = false;
  return spec;
}

SurfaceSpec parse_surface_text(const std::string& text) {
  std::istringstream in(text);
  return parse_surface(in);
}

SurfaceSpec parse_surface_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw numeric_error("cannot open surface file: " + path);
  return parse_surface(in);
}

void validate_section(const SurfaceSpec& spec) {
  const RationalFunction& x = spec.section.x;
  const RationalFunction& y = spec.section.y;
  RationalFunction one = RationalFunction::constant(1);
  RationalFunction residual = y * y - x * (x - one) * (x - spec.r);
  if (!residual.is_zero())
    throw numeric_error("section is not on the curve: residual " +
                        residual.to_string());
}

// ---------------------------------------------------------------------------
// Divisor bookkeeping.

const char* fiber_target_name(FiberTarget f) {
  switch (f) {
    case FiberTarget::zero:
      return "lambda=0";
    case FiberTarget::one:
      return "lambda=1";
    case FiberTarget::infinity:
      return "pole";
  }
  return "?";
}

namespace {

// Remove from w every factor shared with q, to full multiplicity.
Poly strip_shared(Poly w, const Poly& q) {
  if (q.degree() <= 0) return w;
  for (;;) {
    Poly g = gcd(w, q);
    if (g.degree() <= 0) return w;
    w = divmod(w, g).q;
  }
}

// Order of vanishing at 0 of a nonzero polynomial.
int ord0(const Poly& p) {
  if (p.is_zero()) throw numeric_error("vanishing order of the zero polynomial");
  int i = 0;
  while (p[i] == 0) ++i;
  return i;
}

// Behavior of r at t = infinity, via the chart s = 1/t.
struct InfinityData {
  bool in_s = false;
  FiberTarget target = FiberTarget::zero;  // valid when in_s
  int preimage_mult = 0;                   // valid when in_s
  int ram_index = 1;
};

InfinityData infinity_data(const RationalFunction& r) {
  RationalFunction ri = r.at_infinity_chart();
  InfinityData out;
  if (ri.den()[0] == 0) {
    out.in_s = true;
    out.target = FiberTarget::infinity;
    out.preimage_mult = out.ram_index = ord0(ri.den());
    return out;
  }
  algebra::Rat v = ri.num()[0] / ri.den()[0];
  Poly shifted = ri.num() - Poly::constant(v) * ri.den();
  if (shifted.is_zero()) throw numeric_error("classifying map is constant");
  out.ram_index = ord0(shifted);
  if (v == 0 || v == 1) {
    out.in_s = true;
    out.target = (v == 0) ? FiberTarget::zero : FiberTarget::one;
    out.preimage_mult = out.ram_index;
  }
  return out;
}

template <typename T>
void sort_by_point(std::vector<T>& v) {
  std::stable_sort(v.begin(), v.end(), [](const T& a, const T& b) {
    if (a.point.infinite != b.point.infinite) return b.point.infinite;
    if (a.point.t.real() != b.point.t.real())
      return a.point.t.real() < b.point.t.real();
    return a.point.t.imag() < b.point.t.imag();
  });
}

}  // namespace

std::vector<BadPoint> bad_reduction_set(const SurfaceSpec& spec) {
  const Poly& num = spec.r.num();
  const Poly& den = spec.r.den();
  const int d = spec.r.map_degree();
  std::vector<BadPoint> out;
  long fiber_sum[3] = {0, 0, 0};
  auto add_fiber = [&](const Poly& p, FiberTarget f) {
    if (p.is_zero()) throw numeric_error("classifying map is constant");
    for (const auto& rt : roots(p)) {
      out.push_back(
          {BasePoint{rt.location, false}, f, rt.multiplicity, rt.residual});
      fiber_sum[int(f)] += rt.multiplicity;
    }
  };
  add_fiber(num, FiberTarget::zero);
  add_fiber(num - den, FiberTarget::one);
  if (den.degree() > 0) add_fiber(den, FiberTarget::infinity);

  InfinityData inf = infinity_data(spec.r);
  if (inf.in_s) {
    out.push_back(
        {BasePoint::at_infinity(), inf.target, inf.preimage_mult, 0.0});
    fiber_sum[int(inf.target)] += inf.preimage_mult;
  }
  for (int f = 0; f < 3; ++f)
    if (fiber_sum[f] != d)
      throw numeric_error(
          std::string("preimage degree mismatch over ") +
          fiber_target_name(FiberTarget(f)));
  sort_by_point(out);
  return out;
}

RamificationData ramification(const SurfaceSpec& spec) {
  const Poly& num = spec.r.num();
  const Poly& den = spec.r.den();
  const int d = spec.r.map_degree();
  Poly wr = num.derivative() * den - num * den.derivative();
  if (wr.is_zero()) throw numeric_error("classifying map is constant");

  RamificationData out;
  // Finite non-poles: ramification index = 1 + order of vanishing of wr.
  // The den-factors of wr belong to the poles, which follow their own rule
  // (index = pole order), so they are divided out first.  The remaining
  // roots split exactly, by gcd, into those over {0, 1} and the good ones.
  Poly w1 = strip_shared(wr, den);
  Poly good = strip_shared(strip_shared(w1, num), num - den);
  Poly at_bad = divmod(w1, good).q;
  for (const auto& rt : roots(good))
    out.points.push_back(
        {BasePoint{rt.location, false}, rt.multiplicity + 1, false, rt.residual});
  for (const auto& rt : roots(at_bad))
    out.points.push_back(
        {BasePoint{rt.location, false}, rt.multiplicity + 1, true, rt.residual});
  for (const auto& rt : roots(den))
    if (rt.multiplicity >= 2)
      out.points.push_back(
          {BasePoint{rt.location, false}, rt.multiplicity, true, rt.residual});

  InfinityData inf = infinity_data(spec.r);
  if (inf.ram_index >= 2)
    out.points.push_back(
        {BasePoint::at_infinity(), inf.ram_index, inf.in_s, 0.0});

  for (const auto& p : out.points) {
    out.total += p.index - 1;
    if (!p.in_s) out.deg_r_good += p.index - 1;
  }
  if (out.total != 2 * d - 2)
    throw numeric_error("Hurwitz count mismatch: total ramification " +
                        std::to_string(out.total) + " != " +
                        std::to_string(2 * d - 2));
  sort_by_point(out.points);
  return out;
}

long nu_infinity(int k) {
  if (k < 2) throw numeric_error("cusp count needs level >= 2");
  if (k == 2) return 3;
  Rat v = Rat(long(k) * k, 2);
  int m = k;
  for (long p = 2; p * p <= m; ++p) {
    if (m % p) continue;
    v *= Rat(p * p - 1, p * p);
    while (m % p == 0) m /= int(p);
  }
  if (m > 1) v *= Rat(long(m) * m - 1, long(m) * m);
  if (denominator(v) != 1)
    throw numeric_error("cusp count is not an integer");
  return v.convert_to<long>();
}

DegreeReport degree_report(const SurfaceSpec& spec, int level, int genus_x) {
  DegreeReport rep;
  rep.d = spec.r.map_degree();
  rep.genus_base = 0;
  rep.level = level;
  rep.genus_x = genus_x;
  rep.nu_inf = nu_infinity(level);

  auto bad = bad_reduction_set(spec);
  rep.s_reduced = int(bad.size());
  for (const auto& b : bad) rep.s_preimage += b.multiplicity;
  rep.deg_r_good = ramification(spec).deg_r_good;

  const Rat two_g_minus_2(2 * rep.genus_base - 2);
  rep.area_term = Rat(rep.d) * (Rat(genus_x) - 1 + Rat(rep.nu_inf, 2));
  rep.predicted_total_reduced =
      (two_g_minus_2 + rep.s_reduced + rep.deg_r_good) / 2;
  rep.predicted_total_preimage =
      (two_g_minus_2 + rep.s_preimage + rep.deg_r_good) / 2;
  rep.predicted_total_integer =
      denominator(rep.predicted_total_reduced) == 1;
  rep.readings_agree =
      rep.predicted_total_reduced == rep.predicted_total_preimage;

  rep.bound_rhs = two_g_minus_2 - rep.area_term + rep.s_reduced;
  rep.bound_rhs_pullback =
      two_g_minus_2 -
      (rep.predicted_total_reduced - rep.deg_r_good) + rep.s_reduced;
  rep.bound_averaged =
      Rat(rep.genus_base - 1) + Rat(rep.s_reduced, 2) + Rat(rep.deg_r_good, 2);
  rep.forms_agree = rep.bound_rhs == rep.bound_rhs_pullback;
  return rep;
}

// ---------------------------------------------------------------------------
// Toroidal charts.

Toroidal toroidal_coords(cplx tau, cplx z, int k, long n) {
  const cplx tpi(0.0, 2.0 * PI);
  cplx zeta = std::exp(tpi * (z - double(n) * tau / double(k)));
  cplx xi = std::exp(tpi * (double(n + 1) * tau / double(k) - z));
  return {xi, zeta};
}

namespace {

std::vector<cplx> taylor_shift(const Poly& p, cplx t0) {
  int n = p.degree();
  if (n < 0) return {};
  std::vector<cplx> a(n + 1);
  for (int i = 0; i <= n; ++i) a[i] = to_double(p[i]);
  for (int j = 0; j < n; ++j)
    for (int i = n - 1; i >= j; --i) a[i] += t0 * a[i + 1];
  return a;
}

std::vector<cplx> exact_coeffs(const Poly& p) {
  std::vector<cplx> a(p.degree() + 1);
  for (int i = 0; i <= p.degree(); ++i) a[i] = to_double(p[i]);
  return a;
}

// Drop the first e coefficients; anything there beyond rounding noise means
// the claimed order is wrong.
std::vector<cplx> drop_order(std::vector<cplx> a, int e, double noise) {
  double scale = 0.0;
  for (const cplx& c : a) scale = std::max(scale, std::abs(c));
  if (int(a.size()) <= e)
    throw numeric_error("cusp local model: order exceeds the polynomial");
  for (int i = 0; i < e; ++i)
    if (std::abs(a[i]) > noise * scale)
      throw numeric_error("cusp local model: Taylor shift contradicts the order");
  a.erase(a.begin(), a.begin() + e);
  if (std::abs(a[0]) <= noise * scale)
    throw numeric_error("cusp local model: leading coefficient vanishes");
  return a;
}

cplx horner(const std::vector<cplx>& a, cplx w) {
  cplx acc{0.0, 0.0};
  for (auto it = a.rbegin(); it != a.rend(); ++it) acc = acc * w + *it;
  return acc;
}

cplx horner_d(const std::vector<cplx>& a, cplx w) {
  cplx acc{0.0, 0.0};
  for (int i = int(a.size()) - 1; i >= 1; --i) acc = acc * w + double(i) * a[i];
  return acc;
}

cplx ipow(cplx w, int e) {
  cplx r{1.0, 0.0};
  for (int i = 0; i < e; ++i) r *= w;
  return r;
}

}  // namespace

cplx CuspLocalModel::w_of_t(cplx t) const {
  return cusp.infinite ? 1.0 / t : t - cusp.t;
}

cplx CuspLocalModel::t_of_w(cplx w) const {
  return cusp.infinite ? 1.0 / w : cusp.t + w;
}

cplx CuspLocalModel::deviation(cplx w) const {
  cplx av = horner(a, w), bv = horner(b, w);
  if (target == FiberTarget::infinity) return ipow(w, order) * bv / av;
  return ipow(w, order) * av / bv;
}

cplx CuspLocalModel::lambda(cplx w) const {
  switch (target) {
    case FiberTarget::zero:
      return deviation(w);
    case FiberTarget::one:
      return 1.0 + deviation(w);
    case FiberTarget::infinity:
      return 1.0 / deviation(w);
  }
  return cplx{0.0, 0.0};
}

cplx CuspLocalModel::dlambda_dw(cplx w) const {
  cplx av = horner(a, w), bv = horner(b, w);
  cplx dav = horner_d(a, w), dbv = horner_d(b, w);
  double e = double(order);
  if (target == FiberTarget::infinity)
    return (dav * w * bv - av * (e * bv + w * dbv)) /
           (ipow(w, order + 1) * bv * bv);
  return ipow(w, order - 1) * ((e * av + w * dav) * bv - w * av * dbv) /
         (bv * bv);
}

CuspLocalModel cusp_local_model(const SurfaceSpec& spec, const BadPoint& bad) {
  CuspLocalModel m;
  m.target = bad.target;
  m.cusp = bad.point;
  m.order = bad.multiplicity;
  const Poly& num = spec.r.num();
  const Poly& den = spec.r.den();
  if (bad.point.infinite) {
    // Chart coefficients are exact rationals; dropped entries are exact zeros.
    RationalFunction ri = spec.r.at_infinity_chart();
    switch (bad.target) {
      case FiberTarget::zero:
        m.a = drop_order(exact_coeffs(ri.num()), m.order, 0.0);
        m.b = exact_coeffs(ri.den());
        break;
      case FiberTarget::one:
        m.a = drop_order(exact_coeffs(ri.num() - ri.den()), m.order, 0.0);
        m.b = exact_coeffs(ri.den());
        break;
      case FiberTarget::infinity:
        m.a = exact_coeffs(ri.num());
        m.b = drop_order(exact_coeffs(ri.den()), m.order, 0.0);
        break;
    }
  } else {
    const cplx t0 = bad.point.t;
    const double noise = 1e-7;
    switch (bad.target) {
      case FiberTarget::zero:
        m.a = drop_order(taylor_shift(num, t0), m.order, noise);
        m.b = taylor_shift(den, t0);
        break;
      case FiberTarget::one:
        m.a = drop_order(taylor_shift(num - den, t0), m.order, noise);
        m.b = taylor_shift(den, t0);
        break;
      case FiberTarget::infinity:
        m.a = taylor_shift(num, t0);
        m.b = drop_order(taylor_shift(den, t0), m.order, noise);
        break;
    }
  }
  double bscale = 0.0;
  for (const cplx& c : m.b) bscale = std::max(bscale, std::abs(c));
  if (m.b.empty() || std::abs(m.b[0]) <= 1e-12 * bscale)
    throw numeric_error("cusp local model: denominator vanishes at the cusp");
  return m;
}

}  // namespace bettilab::surface
