#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace coalsim {

// Point of the infinite unit simplex: nonincreasing coordinates in [0,1]
// with sum at most 1. The all-zero point is the Kingman origin.
struct SimplexPoint {
  std::vector<double> coords;

  double sum() const;
  double sum_sq() const;
  bool is_origin() const;
};

struct LambdaAtom {
  double x;       // in (0, 1]
  double weight;  // > 0
};

struct XiAtom {
  SimplexPoint point;
  double weight;
};

enum class Family {
  Kingman,
  Beta,
  BolthausenSznitman,
  LambdaAtoms,
  LambdaDensity,
  XiAtoms,
};

// Driving measure on the simplex: a Kingman atom at the origin of mass
// kingman_mass plus a nontrivial part of mass 1 - kingman_mass.
struct CoalescentMeasure {
  double kingman_mass = 1.0;
  Family family = Family::Kingman;

  double beta_alpha = 0.0;                    // Beta family, alpha in (1,2)
  std::vector<LambdaAtom> lambda_atoms;       // LambdaAtoms
  std::vector<double> density_x, density_f;   // LambdaDensity: piecewise-linear density
  std::vector<XiAtom> xi_atoms;               // XiAtoms

  double nontrivial_mass() const { return 1.0 - kingman_mass; }
  bool is_lambda_type() const { return family != Family::XiAtoms; }
  std::string family_name() const;
};

// Parse + invariant-check a structured measure description. Atoms are
// sorted and duplicates aggregated; density tables are renormalized to the
// declared nontrivial mass.
CoalescentMeasure validate_measure(const nlohmann::json& raw);

// CLI shorthand: "kingman", "beta:1.5", "bolthausen_sznitman" (or "bs"),
// "lambda_atoms:x,w[;x,w...]", optionally prefixed "kingman_mass=0.3|...".
CoalescentMeasure parse_measure_string(const std::string& text);

nlohmann::json measure_to_json(const CoalescentMeasure& m);

enum class PsiVariant { Standard, Bar };

// Evaluates the speed generator psi(q) (and the block-jump variant bar-psi)
// of a measure. Immutable apart from an idempotent memo cache.
class PsiEvaluator {
 public:
  explicit PsiEvaluator(CoalescentMeasure m, double quadrature_rel_tol = 1e-9);

  double psi(double q, PsiVariant variant = PsiVariant::Standard) const;
  double operator()(double q) const { return psi(q); }

  const CoalescentMeasure& measure() const { return m_; }
  double rel_tol() const { return rel_tol_; }

 private:
  double evaluate(double q, PsiVariant variant) const;

  CoalescentMeasure m_;
  double rel_tol_;
  mutable std::map<double, double> cache_, bar_cache_;
  mutable std::mutex cache_mutex_;
};

struct RegularityResult {
  double value = 0.0;
  bool finite = true;
};

// Integral of (sum x_i)^2 / sum x_i^2 against the measure, with the ratio
// taken as 0 at the origin atom.
RegularityResult regularity_integral(const CoalescentMeasure& m);

struct MergerRates {
  int b = 0;
  std::vector<double> lambda_bk;  // lambda_{b,k} for k = 2..b at index k-2
  double total = 0.0;             // sum_k C(b,k) lambda_{b,k}
};

// Block-merger rates of a Lambda-type measure.
MergerRates merger_rates(const CoalescentMeasure& m, int b);

// Event-rate kernel driving the Gillespie simulation of Lambda-type
// measures. Memoizes total rates per block count; safe to share between
// concurrently running replicates.
class BlockRateKernel {
 public:
  BlockRateKernel(CoalescentMeasure m, int n_max);

  double total_rate(int b) const;
  // samples the merger size k given block count b and a uniform u in [0,1)
  int sample_k(int b, double u) const;
  double lambda_bk(int b, int k) const;
  int n_max() const { return n_max_; }
  const CoalescentMeasure& measure() const { return m_; }

 private:
  template <typename Visit>
  void visit_terms(int b, Visit&& visit) const;  // C(b,k) lambda_{b,k} for k = 2..b

  CoalescentMeasure m_;
  int n_max_;
  std::vector<double> lgamma_;                 // lgamma(i) for i = 0..n_max+2
  mutable std::vector<double> total_cache_;    // by b, NaN when unset
  mutable std::mutex cache_mutex_;
};

}  // namespace coalsim
