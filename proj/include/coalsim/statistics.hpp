#pragma once

#include <map>
#include <utility>
#include <vector>

#include "coalsim/simulator.hpp"

namespace coalsim {

// Right-continuous step function on [0, inf); ties keep the last value set.
class StepFunction {
 public:
  explicit StepFunction(double initial = 0.0) : initial_(initial) {}

  void add(double t, double value);
  double operator()(double t) const;
  double left_limit(double t) const;

  double initial() const { return initial_; }
  const std::vector<std::pair<double, double>>& points() const { return pts_; }

 private:
  double initial_;
  std::vector<std::pair<double, double>> pts_;  // (time, value from that time)
};

// Block/mutation counting processes of a genealogy: N (active lineages) split
// into open/closed, M (mutations) split the same way, and the accumulated
// lineage length L(t) = int_0^t N(u) du.
struct TrajectoryStats {
  StepFunction N, N_open, N_closed, M, M_open, M_closed;
  double end_time = 0.0;

  double L(double t) const;  // extrapolates past end_time with the final N
};

TrajectoryStats trajectories(const MarkedGenealogy& g);

// Infinite-sites family: the leaf set below the mutated lineage at arrival.
struct SitesFamily {
  int mutation_id;
  std::vector<int> leaves;  // sorted
};

std::vector<SitesFamily> sites_families(const MarkedGenealogy& g);

// Allele block of the infinite-alleles model: leaves sharing their first
// root-ward mutation. mutation_id 0 is the reserved ancestral type carried
// by mutation-free leaves of partial genealogies.
struct AlleleBlock {
  int mutation_id;
  std::vector<int> leaves;  // sorted
};

std::vector<AlleleBlock> alleles_partition(const MarkedGenealogy& g);

struct SpectrumCounts {
  std::map<int, int> sites;    // family size r -> number of sites families
  std::map<int, int> alleles;  // block size r -> number of allele blocks (ancestral excluded)
};

SpectrumCounts spectrum_counts(const MarkedGenealogy& g);

// Predicted family-size spectrum scale: beta * Gamma(r - beta) * ell / r!
double predicted_spectrum(double beta, int r, double ell_value);

}  // namespace coalsim
