#include "bettilab/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bettilab::algebra {

using boost::multiprecision::cpp_int;

double to_double(const Rat& r) { return r.convert_to<double>(); }

std::string rat_string(const Rat& r) {
  std::ostringstream os;
  os << numerator(r);
  if (denominator(r) != 1) os << "/" << denominator(r);
  return os.str();
}

Rat parse_rat(const std::string& text) {
  std::string s = text;
  s.erase(std::remove_if(s.begin(), s.end(), ::isspace), s.end());
  if (s.empty()) throw numeric_error("empty rational literal");
  auto slash = s.find('/');
  try {
    if (slash == std::string::npos) return Rat(cpp_int(s));
    cpp_int p(s.substr(0, slash));
    cpp_int q(s.substr(slash + 1));
    if (q == 0) throw numeric_error("rational literal with zero denominator: " + text);
    return Rat(p, q);
  } catch (const numeric_error&) {
    throw;
  } catch (const std::exception&) {
    throw numeric_error("malformed rational literal: " + text);
  }
}

// ---------------------------------------------------------------------------

Poly::Poly(std::vector<Rat> coeffs) : c_(std::move(coeffs)) { trim(); }

void Poly::trim() {
  while (!c_.empty() && c_.back() == 0) c_.pop_back();
}

Poly Poly::constant(const Rat& c) { return Poly(std::vector<Rat>{c}); }

Poly Poly::variable() { return Poly(std::vector<Rat>{Rat(0), Rat(1)}); }

int Poly::degree() const { return (int)c_.size() - 1; }

const Rat& Poly::operator[](int i) const {
  static const Rat zero(0);
  if (i < 0 || i >= (int)c_.size()) return zero;
  return c_[i];
}

Rat Poly::leading() const {
  if (c_.empty()) throw numeric_error("leading coefficient of zero polynomial");
  return c_.back();
}

Poly Poly::operator+(const Poly& o) const {
  std::vector<Rat> out(std::max(c_.size(), o.c_.size()), Rat(0));
  for (std::size_t i = 0; i < c_.size(); ++i) out[i] += c_[i];
  for (std::size_t i = 0; i < o.c_.size(); ++i) out[i] += o.c_[i];
  return Poly(std::move(out));
}

Poly Poly::operator-(const Poly& o) const { return *this + (-o); }

Poly Poly::operator-() const {
  std::vector<Rat> out = c_;
  for (auto& x : out) x = -x;
  return Poly(std::move(out));
}

Poly Poly::operator*(const Poly& o) const {
  if (c_.empty() || o.c_.empty()) return Poly();
  std::vector<Rat> out(c_.size() + o.c_.size() - 1, Rat(0));
  for (std::size_t i = 0; i < c_.size(); ++i)
    for (std::size_t j = 0; j < o.c_.size(); ++j) out[i + j] += c_[i] * o.c_[j];
  return Poly(std::move(out));
}

Poly Poly::derivative() const {
  if (c_.size() <= 1) return Poly();
  std::vector<Rat> out(c_.size() - 1);
  for (std::size_t i = 1; i < c_.size(); ++i) out[i - 1] = c_[i] * (int)i;
  return Poly(std::move(out));
}

Rat Poly::eval(const Rat& t) const {
  Rat acc(0);
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * t + *it;
  return acc;
}

cplx Poly::eval(cplx t) const {
  cplx acc{0.0, 0.0};
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * t + to_double(*it);
  return acc;
}

Poly Poly::reversed(int target_degree) const {
  if (target_degree < degree())
    throw numeric_error("reversed: target degree below actual degree");
  std::vector<Rat> out(target_degree + 1, Rat(0));
  for (int i = 0; i <= degree(); ++i) out[target_degree - i] = c_[i];
  return Poly(std::move(out));
}

Poly Poly::monic() const {
  if (c_.empty()) return Poly();
  std::vector<Rat> out = c_;
  Rat lead = out.back();
  for (auto& x : out) x /= lead;
  return Poly(std::move(out));
}

std::string Poly::to_string(const std::string& var) const {
  if (c_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (int i = degree(); i >= 0; --i) {
    const Rat& a = (*this)[i];
    if (a == 0) continue;
    if (!first) os << (a > 0 ? " + " : " - ");
    else if (a < 0) os << "-";
    Rat mag = abs(a);
    if (mag != 1 || i == 0) os << rat_string(mag);
    if (i >= 1) {
      if (mag != 1) os << "*";
      os << var;
      if (i >= 2) os << "^" << i;
    }
    first = false;
  }
  return os.str();
}

DivMod divmod(const Poly& a, const Poly& b) {
  if (b.is_zero()) throw numeric_error("polynomial division by zero");
  std::vector<Rat> r(a.coeffs());
  int db = b.degree();
  if ((int)r.size() - 1 < db) return DivMod{Poly(), a};
  std::vector<Rat> q(r.size() - db, Rat(0));
  Rat lead = b.leading();
  for (int i = (int)r.size() - 1; i >= db; --i) {
    if (r[i] == 0) continue;
    Rat f = r[i] / lead;
    q[i - db] = f;
    for (int j = 0; j <= db; ++j) r[i - db + j] -= f * b[j];
  }
  return DivMod{Poly(std::move(q)), Poly(std::move(r))};
}

Poly gcd(const Poly& a, const Poly& b) {
  Poly x = a, y = b;
  while (!y.is_zero()) {
    Poly r = divmod(x, y).r;
    x = y;
    y = r;
  }
  if (x.is_zero()) return x;
  return x.monic();
}

std::vector<SquarefreePart> squarefree_decomposition(const Poly& p) {
  std::vector<SquarefreePart> out;
  if (p.degree() <= 0) return out;
  // Yun's algorithm over characteristic zero.
  Poly d = p.derivative();
  Poly a = gcd(p, d);
  Poly b = divmod(p, a).q;
  Poly c = divmod(d, a).q;
  int m = 1;
  while (b.degree() > 0) {
    Poly s = c - b.derivative();
    Poly f = gcd(b, s);
    if (f.degree() > 0) out.push_back({f, m});
    b = divmod(b, f).q;
    c = divmod(s, f).q;
    ++m;
  }
  return out;
}

namespace {

// Aberth-Ehrlich simultaneous iteration on a squarefree polynomial given in
// double precision.  Residuals are certified afterwards by a Newton-step
// bound; the caller rejects results where that bound is large.
std::vector<cplx> aberth(const std::vector<double>& coeff) {
  int n = (int)coeff.size() - 1;
  std::vector<cplx> x(n);
  // Initial guesses on a circle scaled by a root bound (Cauchy bound).
  double lead = std::abs(coeff[n]);
  double bound = 0.0;
  for (int i = 0; i < n; ++i) bound = std::max(bound, std::abs(coeff[i]) / lead);
  double radius = 1.0 + bound;
  for (int i = 0; i < n; ++i)
    x[i] = std::polar(radius * (0.5 + 0.5 * (i + 1.0) / n),
                      2.0 * PI * i / n + 0.4);
  auto horner = [&](cplx t, cplx& p, cplx& dp) {
    p = coeff[n];
    dp = 0.0;
    for (int i = n - 1; i >= 0; --i) {
      dp = dp * t + p;
      p = p * t + coeff[i];
    }
  };
  for (int iter = 0; iter < 400; ++iter) {
    double moved = 0.0;
    for (int i = 0; i < n; ++i) {
      cplx p, dp;
      horner(x[i], p, dp);
      if (p == cplx{0.0, 0.0}) continue;
      cplx newton = p / dp;
      cplx rep{0.0, 0.0};
      for (int j = 0; j < n; ++j)
        if (j != i) rep += 1.0 / (x[i] - x[j]);
      cplx delta = newton / (1.0 - newton * rep);
      x[i] -= delta;
      moved = std::max(moved, std::abs(delta));
    }
    if (moved < 1e-14 * radius) break;
  }
  return x;
}

}  // namespace

std::vector<Root> roots(const Poly& p) {
  std::vector<Root> out;
  auto parts = squarefree_decomposition(p);
  for (const auto& part : parts) {
    const Poly& f = part.factor;
    std::vector<double> coeff(f.degree() + 1);
    for (int i = 0; i <= f.degree(); ++i) coeff[i] = to_double(f[i]);
    std::vector<cplx> locs = aberth(coeff);
    Poly df = f.derivative();
    for (cplx loc : locs) {
      Root r;
      r.location = loc;
      r.multiplicity = part.multiplicity;
      double fv = std::abs(f.eval(loc));
      double dfv = std::abs(df.eval(loc));
      double scale = std::max(1.0, std::abs(loc));
      r.residual = (dfv > 0.0) ? fv / (dfv * scale) : fv;
      if (r.residual > 1e-7)
        throw numeric_error("root refinement failed to certify (residual " +
                            std::to_string(r.residual) + ")");
      out.push_back(r);
    }
  }
  std::sort(out.begin(), out.end(), [](const Root& a, const Root& b) {
    if (a.location.real() != b.location.real())
      return a.location.real() < b.location.real();
    return a.location.imag() < b.location.imag();
  });
  return out;
}

// ---------------------------------------------------------------------------

RationalFunction::RationalFunction(Poly num, Poly den)
    : num_(std::move(num)), den_(std::move(den)) {
  if (den_.is_zero()) throw numeric_error("rational function with zero denominator");
  normalize();
}

void RationalFunction::normalize() {
  Poly g = gcd(num_, den_);
  if (g.degree() > 0) {
    num_ = divmod(num_, g).q;
    den_ = divmod(den_, g).q;
  }
  if (!den_.is_zero() && den_.leading() != 1) {
    Rat lead = den_.leading();
    std::vector<Rat> n(num_.coeffs()), d(den_.coeffs());
    for (auto& x : n) x /= lead;
    for (auto& x : d) x /= lead;
    num_ = Poly(std::move(n));
    den_ = Poly(std::move(d));
  }
}

RationalFunction RationalFunction::constant(const Rat& c) {
  return RationalFunction(Poly::constant(c), Poly::constant(1));
}

RationalFunction RationalFunction::variable() {
  return RationalFunction(Poly::variable(), Poly::constant(1));
}

RationalFunction RationalFunction::operator+(const RationalFunction& o) const {
  return RationalFunction(num_ * o.den_ + o.num_ * den_, den_ * o.den_);
}

RationalFunction RationalFunction::operator-(const RationalFunction& o) const {
  return *this + (-o);
}

RationalFunction RationalFunction::operator*(const RationalFunction& o) const {
  return RationalFunction(num_ * o.num_, den_ * o.den_);
}

RationalFunction RationalFunction::operator/(const RationalFunction& o) const {
  if (o.is_zero()) throw numeric_error("division by the zero rational function");
  return RationalFunction(num_ * o.den_, den_ * o.num_);
}

RationalFunction RationalFunction::operator-() const {
  return RationalFunction(-num_, den_);
}

bool RationalFunction::operator==(const RationalFunction& o) const {
  return (num_ * o.den_) == (o.num_ * den_);
}

RationalFunction RationalFunction::derivative() const {
  return RationalFunction(num_.derivative() * den_ - num_ * den_.derivative(),
                          den_ * den_);
}

cplx RationalFunction::eval(cplx t) const {
  cplx d = den_.eval(t);
  if (d == cplx{0.0, 0.0}) throw numeric_error("rational function evaluated at a pole");
  return num_.eval(t) / d;
}

std::optional<Rat> RationalFunction::eval(const Rat& t) const {
  Rat d = den_.eval(t);
  if (d == 0) return std::nullopt;
  return num_.eval(t) / d;
}

RationalFunction RationalFunction::at_infinity_chart() const {
  int m = std::max(num_.degree(), den_.degree());
  if (m < 0) return *this;
  return RationalFunction(num_.reversed(m), den_.reversed(m));
}

int RationalFunction::map_degree() const {
  return std::max(num_.degree(), den_.degree());
}

std::string RationalFunction::to_string(const std::string& var) const {
  if (den_.degree() == 0 && den_[0] == 1) return num_.to_string(var);
  return "(" + num_.to_string(var) + ")/(" + den_.to_string(var) + ")";
}

}  // namespace bettilab::algebra
