#include "bettilab/uhp.hpp"

#include <cmath>

namespace bettilab::uhp {

namespace {

void require_point(const FamilyPoint& p, const char* where) {
  if (!(p.tau.imag() > 0.0))
    throw numeric_error(std::string(where) + ": tau not in the upper half plane");
}

void require_unimodular(const GroupElement& g, const char* where) {
  if (std::abs(g.det() - 1.0) > 1e-12)
    throw numeric_error(std::string(where) + ": determinant must be 1");
}

}  // namespace

FamilyPoint act(const GroupElement& g, const FamilyPoint& p) {
  require_point(p, "act");
  require_unimodular(g, "act");
  cplx den = g.c * p.tau + g.d;
  cplx tau2 = (g.a * p.tau + g.b) / den;
  cplx z2 = p.z / den + g.alpha + g.beta * tau2;
  return FamilyPoint{tau2, z2};
}

Tangent act_tangent(const GroupElement& g, const FamilyPoint& p,
                    const Tangent& v) {
  require_point(p, "act_tangent");
  require_unimodular(g, "act_tangent");
  cplx den = g.c * p.tau + g.d;
  cplx den2 = den * den;
  Tangent out;
  out.v_tau = v.v_tau / den2;
  // d(z/den) = dz/den - z c dtau/den^2, and beta dtau' = beta dtau/den^2.
  out.v_z = v.v_z / den + (g.beta - g.c * p.z) * v.v_tau / den2;
  return out;
}

BettiPair betti_from(const FamilyPoint& p) {
  require_point(p, "betti_from");
  double y = p.tau.imag();
  BettiPair b;
  b.b2 = p.z.imag() / y;
  b.b1 = p.z.real() - b.b2 * p.tau.real();
  return b;
}

double mu_potential(const FamilyPoint& p) {
  require_point(p, "mu_potential");
  double s = p.z.imag();
  return s * s / p.tau.imag();
}

double MuMatrix::quad(const Tangent& v) const {
  // Real quadratic form of the Hermitian matrix [[m00, m01],[m01, m11]]
  // (entries real here) against the complex vector (v_tau, v_z).
  double a = m[0][0], b = m[0][1], c = m[1][1];
  double cross = (std::conj(v.v_tau) * v.v_z).real();
  return a * std::norm(v.v_tau) + 2.0 * b * cross + c * std::norm(v.v_z);
}

MuMatrix mu_matrix(const FamilyPoint& p) {
  BettiPair bp = betti_from(p);
  double s = 1.0 / (2.0 * p.tau.imag());
  MuMatrix mm;
  mm.m[0][0] = bp.b2 * bp.b2 * s;
  mm.m[0][1] = -bp.b2 * s;
  mm.m[1][0] = -bp.b2 * s;
  mm.m[1][1] = s;
  return mm;
}

double psi(const FamilyPoint& p, const Tangent& v) {
  require_point(p, "psi");
  double y = p.tau.imag();
  double num = std::norm(v.v_z * y - v.v_tau * p.z.imag());
  double den = std::norm(v.v_tau) * y;
  if (den == 0.0) {
    if (num == 0.0) throw numeric_error("psi: zero tangent vector");
    return std::numeric_limits<double>::infinity();
  }
  return num / den;
}

double omega_density(cplx tau) {
  double y = tau.imag();
  if (!(y > 0.0)) throw numeric_error("omega_density: Im tau must be positive");
  return 1.0 / (4.0 * y * y);
}

cplx theta11(cplx tau, cplx z, double tail_bound) {
  double y = tau.imag();
  if (!(y >= 0.05))
    throw numeric_error("theta11: Im tau < 0.05, reduce tau first");
  if (!(tail_bound > 0.0)) throw numeric_error("theta11: tail bound must be positive");

  // Terms exp(pi i tau (n+1/2)^2 + 2 pi i (z+1/2)(n+1/2)); the magnitude of
  // the term at offset n is exp(-pi y (n+1/2)^2 + 2 pi |Im z| |n+1/2|), so
  // past the peak the series is dominated by a geometric one with ratio
  // exp(-2 pi y (N - |Im z|/y)).
  double shift = std::abs(z.imag()) / y;
  int n0 = (int)std::ceil(shift) + 1;
  cplx sum{0.0, 0.0};
  auto term = [&](int n) {
    double m = n + 0.5;
    return std::exp(PI * I * tau * m * m + 2.0 * PI * I * (z + 0.5) * m);
  };
  // Symmetric pair n and -n-1 covers all integers.
  for (int n = 0;; ++n) {
    sum += term(n) + term(-n - 1);
    if (n >= n0) {
      double m = n + 1.5;
      double ratio = std::exp(-PI * y * (2.0 * m) + 2.0 * PI * std::abs(z.imag()));
      if (ratio < 0.5) {
        double next_mag =
            std::exp(-PI * y * m * m + 2.0 * PI * std::abs(z.imag()) * m);
        if (2.0 * next_mag / (1.0 - ratio) < tail_bound) break;
      }
    }
    if (n > 4000) throw numeric_error("theta11: series failed to converge");
  }
  return sum;
}

double jacobi_metric_h(const FamilyPoint& p) {
  require_point(p, "jacobi_metric_h");
  double y = p.tau.imag();
  double s = p.z.imag();
  return y * y * y * y * std::exp(-16.0 * PI * s * s / y);
}

}  // namespace bettilab::uhp
