#ifndef BETTILAB_ALGEBRA_HPP
#define BETTILAB_ALGEBRA_HPP

// Exact rational polynomial arithmetic and certified root isolation.
// Coefficients are boost cpp_rational; multiple roots are detected through
// gcd with the derivative, never by clustering numerical roots.

#include "bettilab/numeric.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <string>
#include <vector>

namespace bettilab::algebra {

using Rat = boost::multiprecision::cpp_rational;

double to_double(const Rat& r);
std::string rat_string(const Rat& r);  // "p/q", or "p" when q = 1
Rat parse_rat(const std::string& text);  // integers and "p/q"; rejects q = 0

// Dense polynomial over Q, coefficient of t^i at index i.  The zero
// polynomial is the empty vector; invariant: no trailing zero coefficient.
class Poly {
public:
  Poly() = default;
  explicit Poly(std::vector<Rat> coeffs);
  static Poly constant(const Rat& c);
  static Poly variable();  // t

  int degree() const;  // -1 for the zero polynomial
  bool is_zero() const { return c_.empty(); }
  const std::vector<Rat>& coeffs() const { return c_; }
  const Rat& operator[](int i) const;
  Rat leading() const;

  Poly operator+(const Poly& o) const;
  Poly operator-(const Poly& o) const;
  Poly operator*(const Poly& o) const;
  Poly operator-() const;
  bool operator==(const Poly& o) const { return c_ == o.c_; }

  Poly derivative() const;
  Rat eval(const Rat& t) const;
  cplx eval(cplx t) const;
  // Coefficients of p(1/s) * s^deg, the reversal used by the chart at
  // infinity.
  Poly reversed(int target_degree) const;
  Poly monic() const;
  std::string to_string(const std::string& var = "t") const;

private:
  std::vector<Rat> c_;
  void trim();
};

// Quotient and remainder; divisor must be nonzero.
struct DivMod {
  Poly q, r;
};
DivMod divmod(const Poly& a, const Poly& b);
Poly gcd(const Poly& a, const Poly& b);  // monic

// Factors of the squarefree decomposition: p = prod f_i^{m_i} with the f_i
// squarefree and pairwise coprime.
struct SquarefreePart {
  Poly factor;
  int multiplicity = 0;
};
std::vector<SquarefreePart> squarefree_decomposition(const Poly& p);

// Roots with exact multiplicities.  Locations come from Aberth iteration on
// each squarefree factor and carry a certified residual bound.
struct Root {
  cplx location;
  int multiplicity = 0;
  double residual = 0.0;  // |f(x)| / (|f'(x)| scale), a Newton-step bound
};
std::vector<Root> roots(const Poly& p);

// Ratio of polynomials, kept in lowest terms with monic denominator.
class RationalFunction {
public:
  RationalFunction() : num_(), den_(Poly::constant(1)) {}
  RationalFunction(Poly num, Poly den);
  static RationalFunction constant(const Rat& c);
  static RationalFunction variable();

  const Poly& num() const { return num_; }
  const Poly& den() const { return den_; }
  bool is_zero() const { return num_.is_zero(); }

  RationalFunction operator+(const RationalFunction& o) const;
  RationalFunction operator-(const RationalFunction& o) const;
  RationalFunction operator*(const RationalFunction& o) const;
  RationalFunction operator/(const RationalFunction& o) const;
  RationalFunction operator-() const;
  bool operator==(const RationalFunction& o) const;

  RationalFunction derivative() const;
  cplx eval(cplx t) const;  // throws on a pole
  std::optional<Rat> eval(const Rat& t) const;  // nullopt on a pole
  // Substitute t -> 1/s and clear powers: the function in the chart at
  // infinity.
  RationalFunction at_infinity_chart() const;
  // Degree as a map P1 -> P1.
  int map_degree() const;
  std::string to_string(const std::string& var = "t") const;

private:
  Poly num_, den_;
  void normalize();
};

}  // namespace bettilab::algebra

#endif
