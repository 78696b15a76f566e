#include "coalsim/speed.hpp"

#include <cmath>

#include "coalsim/errors.hpp"
#include "coalsim/quadrature.hpp"

namespace coalsim {

namespace {

// int_a^b of f(q)/psi(q) over a possibly wide range, split geometrically
// so each panel sees a bounded dynamic range of psi
double over_psi(const PsiEvaluator& psi, double a, double b,
                const std::function<double(double)>& numer, double rel_tol) {
  if (b <= a) return 0.0;
  auto f = [&](double q) { return numer(q) / psi(q); };
  return gk_panels(f, geometric_panels(a, b, 4.0), rel_tol);
}

double one(double) { return 1.0; }
double identity(double q) { return q; }

}  // namespace

SpeedSolver::SpeedSolver(std::shared_ptr<const PsiEvaluator> psi, int n, double root_rel_tol)
    : psi_(std::move(psi)), n_(n), root_rel_tol_(root_rel_tol) {
  if (n_ < 1) throw BadParameter("speed solver requires n >= 1");
  if (!psi_) throw BadParameter("speed solver requires a psi evaluator");
}

double SpeedSolver::time_to(double v) const {
  if (v > n_ || v < 1.0) throw BadParameter("time_to requires v in [1, n]");
  return over_psi(*psi_, v, static_cast<double>(n_), one, root_rel_tol_);
}

double SpeedSolver::v_of_t(double t) const {
  if (t < 0.0) throw BadParameter("v_of_t requires t >= 0");
  if (t == 0.0) return static_cast<double>(n_);
  const double nd = static_cast<double>(n_);
  const double tol = root_rel_tol_ * std::max(t, 1.0);
  // F(v) = int_v^n dq/psi is strictly decreasing; bracket [lo, hi] keeps
  // F(hi) <= t <= F(lo)
  double lo = 1.0, hi = nd;
  const double f_lo = time_to(lo);
  if (f_lo < t - tol) throw HorizonExceeded("speed drops below 1 before the requested time");
  if (f_lo <= t) return lo;
  double v = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double fv = time_to(v);
    if (std::fabs(fv - t) <= tol) return v;
    if (fv > t)
      lo = v;
    else
      hi = v;
    // Newton step from dv/dt = -psi(v); fall back to bisection outside the bracket
    const double step = v + (fv - t) * psi_->psi(v);
    v = (step > lo && step < hi) ? step : 0.5 * (lo + hi);
    if (hi - lo <= 1e-14 * hi) return v;
  }
  return v;
}

double SpeedSolver::ell() const {
  return over_psi(*psi_, 1.0, static_cast<double>(n_), identity, root_rel_tol_);
}

double SpeedSolver::ell(double t) const {
  return over_psi(*psi_, v_of_t(t), static_cast<double>(n_), identity, root_rel_tol_);
}

std::string cdi_name(Cdi c) {
  switch (c) {
    case Cdi::Yes: return "yes";
    case Cdi::No: return "no";
    case Cdi::Unknown: return "unknown";
  }
  return "?";
}

CdiResult comes_down_check(const CoalescentMeasure& m) {
  // analytic flags first: any origin mass dominates with psi ~ q^2/2
  if (m.kingman_mass > 0.0) return {Cdi::Yes, "analytic"};
  switch (m.family) {
    case Family::Kingman:
      return {Cdi::Yes, "analytic"};
    case Family::Beta:
      return {Cdi::Yes, "analytic"};  // alpha in (1,2): psi grows like q^alpha
    case Family::BolthausenSznitman:
      return {Cdi::No, "analytic"};  // psi ~ q log q, tail integral diverges
    case Family::LambdaAtoms:
    case Family::XiAtoms:
      return {Cdi::No, "analytic"};  // finitely many reproduction sizes: psi = O(q)
    case Family::LambdaDensity:
      break;
  }
  // tail-exponent heuristic on a log grid
  PsiEvaluator psi(m, 1e-9);
  const double qs[] = {1e3, 1e4, 1e5, 1e6};
  double vals[4];
  for (int i = 0; i < 4; ++i) vals[i] = psi(qs[i]);
  bool all_steep = true, all_flat = true;
  for (int i = 0; i < 3; ++i) {
    const double slope = std::log(vals[i + 1] / vals[i]) / std::log(qs[i + 1] / qs[i]);
    if (slope < 1.05) all_steep = false;
    if (slope > 0.95) all_flat = false;
  }
  const bool linear_bounded = vals[3] / qs[3] <= 1.05 * vals[0] / qs[0];
  if (all_steep) return {Cdi::Yes, "numeric"};
  if (all_flat || linear_bounded) return {Cdi::No, "numeric"};
  return {Cdi::Unknown, "numeric"};
}

double cdi_horizon(const PsiEvaluator& psi) {
  const auto check = comes_down_check(psi.measure());
  if (check.cdi == Cdi::No)
    throw CDIRequired("blow-down horizon is infinite: measure does not come down from infinity");
  return over_psi(psi, 1.0, 1e8, one, psi.rel_tol());
}

}  // namespace coalsim
