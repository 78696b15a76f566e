#pragma once

#include <memory>
#include <string>

#include "coalsim/measures.hpp"

namespace coalsim {

// Deterministic speed and length functionals of a coalescent started from
// n blocks: v(t) solves the defining relation int_{v(t)}^n dq/psi(q) = t,
// ell(n) = int_1^n q/psi(q) dq, and ell_t(n) = int_{v(t)}^n q/psi(q) dq.
class SpeedSolver {
 public:
  SpeedSolver(std::shared_ptr<const PsiEvaluator> psi, int n, double root_rel_tol = 1e-9);

  int n() const { return n_; }
  const PsiEvaluator& psi() const { return *psi_; }

  // time at which the speed reaches v, i.e. int_v^n dq/psi(q), for v in [1, n]
  double time_to(double v) const;

  // speed v(t); throws HorizonExceeded once v would drop below 1
  double v_of_t(double t) const;

  double ell() const;          // ell(n)
  double ell(double t) const;  // ell_t(n)

 private:
  std::shared_ptr<const PsiEvaluator> psi_;
  int n_;
  double root_rel_tol_;
};

enum class Cdi { Yes, No, Unknown };

struct CdiResult {
  Cdi cdi = Cdi::Unknown;
  std::string basis;  // "analytic" or "numeric"
};

std::string cdi_name(Cdi c);

// Does the coalescent come down from infinity? Parametric families are
// classified analytically; otherwise a tail-exponent heuristic on psi over
// q in {1e3, 1e4, 1e5, 1e6} decides, answering "unknown" near the critical
// exponent 1.
CdiResult comes_down_check(const CoalescentMeasure& m);

// Blow-down horizon t_max = int_1^infinity dq/psi(q), truncated at q = 1e8.
// Throws CDIRequired when the measure provably does not come down.
double cdi_horizon(const PsiEvaluator& psi);

}  // namespace coalsim
