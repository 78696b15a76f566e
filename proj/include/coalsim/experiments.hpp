#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "coalsim/measures.hpp"
#include "coalsim/simulator.hpp"

namespace coalsim {

enum class Statistic {
  Tau,
  TauStar,
  MutationsTotal,
  MutationsOpen,
  MutationsClosed,
  Blocks,
  BlocksOpen,
  TotalLength,
  SitesFamiliesOfSize,      // uses spectrum_r
  SupOpenFraction,          // sup_{u <= end} |1 - N_open(u)/N(u)|
  AllelePartitionHistogram  // aggregated as a histogram, not a scalar
};

Statistic statistic_from_name(const std::string& name);
std::string statistic_name(Statistic s);

// "tau", "tau-star", "time=T", "blocks=B"
StopRule parse_stop(const std::string& text);
std::string stop_to_string(const StopRule& stop);

// canonical histogram key "a_1,a_2,...,a_n" of an allele configuration
std::string configuration_key(const std::vector<int>& a);
std::string allele_configuration_key(const MarkedGenealogy& g);

struct ExperimentSpec {
  CoalescentMeasure measure;
  std::vector<int> n_grid;  // nonempty, strictly increasing
  double gamma = 1.0;
  int replicates = 1;
  std::uint64_t master_seed = 0;
  Statistic statistic = Statistic::MutationsTotal;
  StopRule stop = StopRule::until_tau();
  int spectrum_r = 1;          // family size for SitesFamiliesOfSize
  std::vector<double> times;   // per-check time grids (T1/P2 s-grid, T4 t_n)
  std::map<std::string, double> tolerances;  // per-check band overrides
  int threads = 0;             // 0 = hardware concurrency
};

ExperimentSpec experiment_spec_from_json(const nlohmann::json& j);
nlohmann::json experiment_spec_to_json(const ExperimentSpec& spec);

struct ScalarSummary {
  double estimate = 0.0;
  double stderr_ = 0.0;
  int replicates = 0;
};

struct NResult {
  int n = 0;
  // raw per-replicate values sorted by replicate index; aggregates are always
  // recomputed from this order, so merging partial runs is exact
  std::vector<std::pair<int, double>> raw;
  ScalarSummary summary;
  std::map<std::string, std::int64_t> histogram;  // AllelePartitionHistogram only
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<NResult> per_n;
};

// Runs `spec.replicates` simulations per n_grid entry with seeds derived from
// (master_seed, n, replicate_index); deterministic and thread-count independent.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// Same, restricted to replicate indices [rep_begin, rep_end).
ExperimentResult run_experiment_range(const ExperimentSpec& spec, int rep_begin, int rep_end);

// Combines results from disjoint replicate ranges of the same spec.
ExperimentResult merge(const ExperimentResult& a, const ExperimentResult& b);

enum class TheoremCheck {
  T1_closed_fraction,
  P2_speed_envelope,
  T3_family_counts,
  T4_partial_time,
  C7_spectrum
};

TheoremCheck theorem_check_from_name(const std::string& name);

struct CheckItem {
  std::string name;
  double value = 0.0;
  bool pass = false;
  std::string note;
};

struct TheoremVerdict {
  std::string which;
  bool applicable = true;  // false e.g. for T1 with gamma = 0
  bool pass = false;
  std::vector<CheckItem> items;
  nlohmann::json details;  // estimates backing the verdict
};

TheoremVerdict theorem_check(const ExperimentSpec& spec, TheoremCheck which);

struct MartingaleResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  int replicates = 0;
};

// Monte Carlo check that the compensated block count
//   N(t ^ tau) - n + int_0^{t ^ tau} bar-psi(N(u)) du
// is mean zero. This compensated form is used instead of the time-inverted
// one because the block-chain compensator is exact for every Lambda-type
// measure, while the inverted integral carries an O(1/log n) bias for
// heavy-tailed measures at accessible n.
MartingaleResult martingale_diagnostic(const CoalescentMeasure& m, int n, double t,
                                       int replicates, std::uint64_t seed);

}  // namespace coalsim
