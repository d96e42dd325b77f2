#include "bettilab/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace bettilab {

namespace {

template <class T>
T pairwise_sum_range(const T* data, std::size_t n) {
  // Fixed recursion pattern: the split point depends only on n, so the
  // result is independent of how the vector was produced.
  if (n <= 8) {
    T acc{};
    for (std::size_t i = 0; i < n; ++i) acc += data[i];
    return acc;
  }
  std::size_t half = n / 2;
  return pairwise_sum_range(data, half) + pairwise_sum_range(data + half, n - half);
}

}  // namespace

double pairwise_sum(const std::vector<double>& v) {
  return v.empty() ? 0.0 : pairwise_sum_range(v.data(), v.size());
}

cplx pairwise_sum(const std::vector<cplx>& v) {
  return v.empty() ? cplx{0.0, 0.0} : pairwise_sum_range(v.data(), v.size());
}

HoloJet spectral_jet(const std::function<cplx(cplx)>& f, cplx t0, double rho,
                     int n) {
  if (rho <= 0.0 || n < 8) throw numeric_error("spectral_jet: bad parameters");
  cplx c0{0.0}, c1{0.0}, c2{0.0};
  for (int j = 0; j < n; ++j) {
    double th = 2.0 * PI * j / n;
    cplx w = std::polar(1.0, th);
    cplx fj = f(t0 + rho * w);
    c0 += fj;
    c1 += fj * std::polar(1.0, -th);
    c2 += fj * std::polar(1.0, -2.0 * th);
  }
  HoloJet jet;
  jet.f = c0 / double(n);
  jet.df = c1 / (double(n) * rho);
  jet.d2f = 2.0 * c2 / (double(n) * rho * rho);
  return jet;
}

HoloJet spectral_jet_samples(const std::vector<cplx>& f, double rho) {
  int n = int(f.size());
  if (rho <= 0.0 || n < 8)
    throw numeric_error("spectral_jet_samples: bad parameters");
  cplx c0{0.0}, c1{0.0}, c2{0.0};
  for (int j = 0; j < n; ++j) {
    double th = 2.0 * PI * j / n;
    c0 += f[j];
    c1 += f[j] * std::polar(1.0, -th);
    c2 += f[j] * std::polar(1.0, -2.0 * th);
  }
  HoloJet jet;
  jet.f = c0 / double(n);
  jet.df = c1 / (double(n) * rho);
  jet.d2f = 2.0 * c2 / (double(n) * rho * rho);
  return jet;
}

std::vector<cplx> circle_derivative_samples(const std::vector<cplx>& f,
                                            double rho) {
  int n = int(f.size());
  if (rho <= 0.0 || n < 8)
    throw numeric_error("circle_derivative_samples: bad parameters");
  std::vector<cplx> modes(n, cplx{0.0});
  for (int k = 0; k < n; ++k) {
    cplx s{0.0};
    for (int j = 0; j < n; ++j)
      s += f[j] * std::polar(1.0, -2.0 * PI * double(j) * double(k) / n);
    modes[k] = s / double(n);
  }
  std::vector<cplx> df(n);
  for (int j = 0; j < n; ++j) {
    cplx s{0.0};
    for (int k = 1; k < n; ++k)
      s += double(k) * modes[k] *
           std::polar(1.0, 2.0 * PI * double(j) * double(k - 1) / n);
    df[j] = s / rho;
  }
  return df;
}

Wirtinger wirtinger_fd(const std::function<cplx(cplx)>& g, cplx t0, double h) {
  auto d4 = [&](cplx dir) {
    return (-g(t0 + 2.0 * h * dir) + 8.0 * g(t0 + h * dir) -
            8.0 * g(t0 - h * dir) + g(t0 - 2.0 * h * dir)) /
           (12.0 * h);
  };
  cplx gx = d4(cplx{1.0, 0.0});
  cplx gy = d4(cplx{0.0, 1.0});
  return Wirtinger{0.5 * (gx - I * gy), 0.5 * (gx + I * gy)};
}

double laplacian_fd(const std::function<double(cplx)>& g, cplx t0, double h) {
  auto dxx = [&](cplx dir) {
    return (-g(t0 + 2.0 * h * dir) + 16.0 * g(t0 + h * dir) - 30.0 * g(t0) +
            16.0 * g(t0 - h * dir) - g(t0 - 2.0 * h * dir)) /
           (12.0 * h * h);
  };
  return 0.25 * (dxx(cplx{1.0, 0.0}) + dxx(cplx{0.0, 1.0}));
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw numeric_error("fit_line: need at least two samples");
  std::size_t n = x.size();
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw numeric_error("fit_line: degenerate abscissae");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

std::vector<double> lstsq(const std::vector<std::vector<double>>& cols,
                          const std::vector<double>& rhs) {
  std::size_t k = cols.size();
  if (k == 0) throw numeric_error("lstsq: empty system");
  std::size_t n = rhs.size();
  for (const auto& c : cols)
    if (c.size() != n) throw numeric_error("lstsq: ragged columns");
  // Normal equations; k is at most 4 in this project.
  std::vector<std::vector<double>> a(k, std::vector<double>(k + 1, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t r = 0; r < n; ++r) a[i][j] += cols[i][r] * cols[j][r];
    for (std::size_t r = 0; r < n; ++r) a[i][k] += cols[i][r] * rhs[r];
  }
  for (std::size_t p = 0; p < k; ++p) {
    std::size_t piv = p;
    for (std::size_t i = p + 1; i < k; ++i)
      if (std::abs(a[i][p]) > std::abs(a[piv][p])) piv = i;
    std::swap(a[p], a[piv]);
    if (std::abs(a[p][p]) < 1e-300) throw numeric_error("lstsq: singular");
    for (std::size_t i = 0; i < k; ++i) {
      if (i == p) continue;
      double f = a[i][p] / a[p][p];
      for (std::size_t j = p; j <= k; ++j) a[i][j] -= f * a[p][j];
    }
  }
  std::vector<double> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = a[i][k] / a[i][i];
  return out;
}

// ---------------------------------------------------------------------------
// Gauss-Kronrod 7-15

namespace {

const double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

const double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

const double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct PanelResult {
  cplx value;
  double error;
  double mass;  // integral of |f|, the roundoff scale of the panel
};

PanelResult gk15(const std::function<cplx(double)>& f, double a, double b,
                 long& evals) {
  double c = 0.5 * (a + b), hl = 0.5 * (b - a);
  cplx fc = f(c);
  evals += 15;
  cplx resk = kWgk[7] * fc;
  cplx resg = kWg[3] * fc;
  double mass = kWgk[7] * std::abs(fc);
  for (int j = 0; j < 7; ++j) {
    cplx f1 = f(c - hl * kXgk[j]);
    cplx f2 = f(c + hl * kXgk[j]);
    resk += kWgk[j] * (f1 + f2);
    mass += kWgk[j] * (std::abs(f1) + std::abs(f2));
    if (j % 2 == 1) resg += kWg[j / 2] * (f1 + f2);
  }
  resk *= hl;
  resg *= hl;
  mass *= std::abs(hl);
  return PanelResult{resk, std::abs(resk - resg), mass};
}

struct Panel {
  double a, b;
  cplx value;
  double error, mass;
  int depth;
  bool stuck;  // depth, width, or roundoff limited; refining cannot help
};

}  // namespace

// Worst-panel-first refinement with a global error budget.  Splitting the
// largest error avoids the tolerance-halving cascade of plain recursive
// bisection, where integrand noise in a region can hold the local error at a
// fixed fraction of the shrinking local tolerance and the tree explodes.
// Panels whose error sits at the roundoff floor of their mass, or whose
// width has reached the resolution of the endpoints, are frozen; an overall
// evaluation budget bounds the worst case, reported through `converged`.
QuadResult integrate_gk(const std::function<cplx(double)>& f, double a,
                        double b, double abs_tol, int max_depth) {
  QuadResult out;
  if (a == b) return out;
  const long eval_budget = 60000;

  std::vector<Panel> panels;
  auto make = [&](double pa, double pb, int depth) {
    PanelResult r = gk15(f, pa, pb, out.evaluations);
    const bool stuck =
        depth >= max_depth || r.error <= 1e-15 * r.mass ||
        std::abs(pb - pa) <= 1e-13 * (1.0 + std::abs(pa) + std::abs(pb));
    return Panel{pa, pb, r.value, r.error, r.mass, depth, stuck};
  };
  panels.push_back(make(a, b, 0));
  double sum_err = panels[0].error;
  double sum_mass = panels[0].mass;

  // Heap of refinable panel indices, worst error first; ties break on the
  // left endpoint so the refinement order is reproducible.
  auto worse = [&panels](std::size_t i, std::size_t j) {
    if (panels[i].error != panels[j].error)
      return panels[i].error < panels[j].error;
    return panels[i].a > panels[j].a;
  };
  std::vector<std::size_t> heap;
  if (!panels[0].stuck) heap.push_back(0);

  while (out.evaluations < eval_budget && !heap.empty()) {
    if (sum_err <= std::max(abs_tol, 4e-15 * sum_mass)) break;
    std::pop_heap(heap.begin(), heap.end(), worse);
    const std::size_t idx = heap.back();
    heap.pop_back();
    const Panel p = panels[idx];
    const double c = 0.5 * (p.a + p.b);
    const Panel left = make(p.a, c, p.depth + 1);
    const Panel right = make(c, p.b, p.depth + 1);
    sum_err += left.error + right.error - p.error;
    sum_mass += left.mass + right.mass - p.mass;
    panels[idx] = left;
    panels.push_back(right);
    if (!left.stuck) {
      heap.push_back(idx);
      std::push_heap(heap.begin(), heap.end(), worse);
    }
    if (!right.stuck) {
      heap.push_back(panels.size() - 1);
      std::push_heap(heap.begin(), heap.end(), worse);
    }
  }

  std::sort(panels.begin(), panels.end(),
            [](const Panel& x, const Panel& y) { return x.a < y.a; });
  std::vector<cplx> vals;
  vals.reserve(panels.size());
  double err = 0.0, mass = 0.0;
  for (const Panel& p : panels) {
    vals.push_back(p.value);
    err += p.error;
    mass += p.mass;
  }
  out.value = pairwise_sum(vals);
  out.error = err;
  out.converged = err <= std::max(abs_tol, 5e-15 * mass);
  return out;
}

QuadResult integrate_gk_real(const std::function<double(double)>& f, double a,
                             double b, double abs_tol, int max_depth) {
  return integrate_gk([&](double u) { return cplx{f(u), 0.0}; }, a, b, abs_tol,
                      max_depth);
}

// ---------------------------------------------------------------------------

BranchedSqrt::BranchedSqrt(std::function<cplx(double)> g, cplx seed_sqrt,
                           int initial_points, int max_points)
    : g_(std::move(g)) {
  cplx s0 = std::sqrt(g_(0.0));
  if (seed_sqrt != cplx{0.0, 0.0}) s0 = match_branch(s0, seed_sqrt);
  refs_.push_back({0.0, s0});
  // March along the path, subdividing until consecutive tracked roots turn
  // by less than a quarter circle.  A root passing near zero defeats the
  // tracking and is reported rather than guessed around.
  double u = 0.0;
  double step = 1.0 / (initial_points - 1);
  const double min_step = 1.0 / max_points;
  while (u < 1.0) {
    double next = std::min(1.0, u + step);
    for (;;) {
      cplx prev = refs_.back().second;
      cplx cand = match_branch(std::sqrt(g_(next)), prev);
      double denom = std::abs(cand) * std::abs(prev);
      if (denom == 0.0) throw numeric_error("branch tracking hit a zero");
      double cosang = (cand.real() * prev.real() + cand.imag() * prev.imag()) / denom;
      if (cosang > 0.70710678) {  // under a quarter turn
        refs_.push_back({next, cand});
        u = next;
        step = std::min(step * 2.0, 1.0 / (initial_points - 1));
        break;
      }
      double mid = 0.5 * (u + next);
      if (next - u < min_step || mid <= u)
        throw numeric_error("branch tracking failed to converge");
      next = mid;
      step = next - u;
    }
  }
}

cplx BranchedSqrt::eval(double u) const {
  auto it = std::lower_bound(
      refs_.begin(), refs_.end(), u,
      [](const std::pair<double, cplx>& p, double val) { return p.first < val; });
  const std::pair<double, cplx>* best;
  if (it == refs_.begin())
    best = &*it;
  else if (it == refs_.end())
    best = &refs_.back();
  else {
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    best = (u - lo.first <= hi.first - u) ? &lo : &hi;
  }
  return match_branch(std::sqrt(g_(u)), best->second);
}

Vec2 solve2x2(double a11, double a12, double a21, double a22, double b1,
              double b2) {
  double det = a11 * a22 - a12 * a21;
  double scale = std::max({std::abs(a11), std::abs(a12), std::abs(a21),
                           std::abs(a22), 1e-300});
  if (std::abs(det) < 1e-13 * scale * scale)
    throw numeric_error("solve2x2: singular system");
  return Vec2{(b1 * a22 - b2 * a12) / det, (a11 * b2 - a21 * b1) / det};
}

double hyperbolic_distance(cplx tau1, cplx tau2) {
  double num = std::abs(tau1 - tau2);
  double den = std::abs(tau1 - std::conj(tau2));
  if (den == 0.0) return 0.0;
  double r = std::min(num / den, 1.0 - 1e-16);
  return 2.0 * std::atanh(r);
}

}  // namespace bettilab
