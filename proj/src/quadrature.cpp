#include "coalsim/quadrature.hpp"

#include <cmath>
#include <stack>

#include "coalsim/errors.hpp"

namespace coalsim {

namespace {

// QUADPACK 15-point Kronrod rule with embedded 7-point Gauss rule.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct GkResult {
  double kronrod;
  double err;
};

GkResult gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double resg = fc * kWg[3];
  double resk = fc * kWgk[7];
  for (int j = 0; j < 7; ++j) {
    const double x = h * kXgk[j];
    const double f1 = f(c - x);
    const double f2 = f(c + x);
    resk += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) resg += kWg[j / 2] * (f1 + f2);
  }
  return {resk * h, std::fabs((resk - resg) * h)};
}

}  // namespace

double gk_adaptive(const std::function<double(double)>& f, double a, double b,
                   double rel_tol, int max_depth) {
  if (a == b) return 0.0;
  struct Interval {
    double a, b;
    int depth;
  };
  std::stack<Interval> work;
  work.push({a, b, 0});
  double total = 0.0;
  // Global magnitude of the integral, used to stop refining subintervals whose
  // absolute error is already negligible for the total (otherwise endpoint
  // singularities like sqrt(x) at 0 never satisfy a purely relative test).
  double scale = 0.0;
  while (!work.empty()) {
    const Interval iv = work.top();
    work.pop();
    const GkResult r = gk15(f, iv.a, iv.b);
    if (iv.depth == 0) scale = std::fabs(r.kronrod);
    const double share = scale * std::fabs((iv.b - iv.a) / (b - a));
    const double tol = rel_tol * std::max(std::fabs(r.kronrod), share) + 1e-300;
    if (r.err <= tol || !std::isfinite(r.kronrod)) {
      if (!std::isfinite(r.kronrod)) throw QuadratureFailure("non-finite integrand value");
      total += r.kronrod;
      continue;
    }
    if (iv.depth >= max_depth)
      throw QuadratureFailure("adaptive refinement stalled at max depth");
    const double mid = 0.5 * (iv.a + iv.b);
    if (mid <= iv.a || mid >= iv.b) {
      total += r.kronrod;  // interval at rounding limit
      continue;
    }
    work.push({iv.a, mid, iv.depth + 1});
    work.push({mid, iv.b, iv.depth + 1});
  }
  return total;
}

double gk_panels(const std::function<double(double)>& f, const std::vector<double>& pts,
                 double rel_tol, int max_depth) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    total += gk_adaptive(f, pts[i], pts[i + 1], rel_tol, max_depth);
  return total;
}

std::vector<double> geometric_panels(double a, double b, double ratio, int max_panels) {
  std::vector<double> pts{a};
  double x = a;
  int k = 0;
  while (x * ratio < b && k + 1 < max_panels) {
    x *= ratio;
    pts.push_back(x);
    ++k;
  }
  pts.push_back(b);
  return pts;
}

}  // namespace coalsim
