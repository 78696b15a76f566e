#include <doctest.h>

#include <cmath>

#include "coalsim/errors.hpp"
#include "coalsim/ewens.hpp"
#include "coalsim/experiments.hpp"
#include "coalsim/measures.hpp"

using namespace coalsim;
using nlohmann::json;

namespace {

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.measure = parse_measure_string("kingman");
  spec.n_grid = {10, 20};
  spec.gamma = 0.5;
  spec.replicates = 200;
  spec.master_seed = 424242;
  spec.statistic = Statistic::MutationsTotal;
  spec.stop = StopRule::until_tau();
  return spec;
}

}  // namespace

TEST_CASE("spec validation and serialization") {
  CHECK_THROWS_AS(
      [] {
        auto s = small_spec();
        s.replicates = 0;
        run_experiment(s);
      }(),
      ZeroReplicates);
  CHECK_THROWS_AS(
      [] {
        auto s = small_spec();
        s.n_grid = std::vector<int>({20, 10});
        run_experiment(s);
      }(),
      BadParameter);

  const auto spec = small_spec();
  const auto j = experiment_spec_to_json(spec);
  const auto back = experiment_spec_from_json(j);
  CHECK(back.n_grid == spec.n_grid);
  CHECK(back.statistic == spec.statistic);
  CHECK(back.master_seed == spec.master_seed);

  auto bad = j;
  bad["gama"] = 1.0;
  CHECK_THROWS_AS(experiment_spec_from_json(bad), ConfigError);

  for (const char* name : {"tau", "tau_star", "mutations_total", "total_length",
                           "sup_open_fraction", "allele_partition_histogram"})
    CHECK(statistic_name(statistic_from_name(name)) == name);
  CHECK_THROWS_AS(statistic_from_name("nope"), ConfigError);

  CHECK(parse_stop("time=0.5").kind == StopRule::Kind::UntilTime);
  CHECK(parse_stop("blocks=3").b == 3);
  CHECK(stop_to_string(StopRule::until_tau_star()) == "tau-star");
  CHECK_THROWS_AS(parse_stop("whenever"), ConfigError);
}

TEST_CASE("determinism and thread independence") {
  auto spec = small_spec();
  spec.threads = 1;
  const auto a = run_experiment(spec);
  spec.threads = 4;
  const auto b = run_experiment(spec);
  REQUIRE(a.per_n.size() == b.per_n.size());
  for (std::size_t i = 0; i < a.per_n.size(); ++i) {
    CHECK(a.per_n[i].raw == b.per_n[i].raw);
    CHECK(a.per_n[i].summary.estimate == b.per_n[i].summary.estimate);
    CHECK(a.per_n[i].summary.stderr_ == b.per_n[i].summary.stderr_);
  }
}

TEST_CASE("split-and-merge equals a monolithic run bit for bit") {
  const auto spec = small_spec();
  const auto whole = run_experiment(spec);
  const auto left = run_experiment_range(spec, 0, 77);
  const auto right = run_experiment_range(spec, 77, spec.replicates);
  const auto joined = merge(left, right);
  const auto joined_flipped = merge(right, left);
  REQUIRE(joined.per_n.size() == whole.per_n.size());
  for (std::size_t i = 0; i < whole.per_n.size(); ++i) {
    CHECK(joined.per_n[i].raw == whole.per_n[i].raw);
    CHECK(joined.per_n[i].summary.estimate == whole.per_n[i].summary.estimate);
    CHECK(joined.per_n[i].summary.stderr_ == whole.per_n[i].summary.stderr_);
    CHECK(joined_flipped.per_n[i].summary.estimate == whole.per_n[i].summary.estimate);
  }
  CHECK_THROWS_AS(merge(left, left), BadParameter);  // overlapping ranges
}

TEST_CASE("standard errors shrink like one over root replicates") {
  auto spec = small_spec();
  spec.n_grid = {20};
  spec.statistic = Statistic::Tau;
  spec.replicates = 400;
  const auto small = run_experiment(spec);
  spec.replicates = 1600;
  const auto big = run_experiment(spec);
  const double ratio = big.per_n[0].summary.stderr_ / small.per_n[0].summary.stderr_;
  CHECK(ratio >= 0.4);
  CHECK(ratio <= 0.6);
}

TEST_CASE("allele-partition histogram matches the exact law at small n") {
  ExperimentSpec spec;
  spec.measure = parse_measure_string("kingman");
  spec.n_grid = {5};
  spec.gamma = 0.5;
  spec.replicates = 20000;
  spec.master_seed = 31337;
  spec.statistic = Statistic::AllelePartitionHistogram;
  spec.stop = StopRule::until_tau_star();
  const auto result = run_experiment(spec);
  const auto& hist = result.per_n[0].histogram;

  const auto exact = ewens_distribution(5, 0.5);
  double tv = 0.0;
  double seen = 0.0;
  for (const auto& [a, p] : exact.pmf) {
    const auto it = hist.find(configuration_key(a));
    const double emp = it == hist.end() ? 0.0
                                        : static_cast<double>(it->second) / spec.replicates;
    tv += std::fabs(emp - p);
    seen += emp;
  }
  tv += 1.0 - seen;  // empirical mass on impossible configurations (none expected)
  CHECK(tv / 2.0 <= 0.02);
}

TEST_CASE("compensated block-count martingale is centered") {
  // time horizon zero: the compensated value is identically zero
  const auto zero = martingale_diagnostic(parse_measure_string("kingman"), 50, 0.0, 100, 5);
  CHECK(zero.mean == 0.0);
  CHECK(zero.stderr_ == 0.0);

  const auto kingman = martingale_diagnostic(parse_measure_string("kingman"), 50, 0.5, 4000, 6);
  CHECK(std::fabs(kingman.mean) <= 3.0 * kingman.stderr_);

  const auto beta = martingale_diagnostic(parse_measure_string("beta:1.5"), 100, 0.5, 4000, 7);
  CHECK(std::fabs(beta.mean) <= 3.0 * beta.stderr_);

  CHECK_THROWS_AS(martingale_diagnostic(
                      validate_measure(json{
                          {"family", "xi_atoms"},
                          {"atoms", json::array({{{"point", {0.5, 0.5}}, {"weight", 1.0}}})}}),
                      10, 1.0, 10, 1),
                  BarUnsupported);
  CHECK_THROWS_AS(martingale_diagnostic(parse_measure_string("kingman"), 10, 1.0, 0, 1),
                  ZeroReplicates);
}

TEST_CASE("check plumbing") {
  CHECK(theorem_check_from_name("t3") == TheoremCheck::T3_family_counts);
  CHECK_THROWS_AS(theorem_check_from_name("t9"), ConfigError);

  // closed-mutation statistics are reported as not-applicable at gamma = 0
  auto spec = small_spec();
  spec.gamma = 0.0;
  const auto v = theorem_check(spec, TheoremCheck::T1_closed_fraction);
  CHECK_FALSE(v.applicable);
  CHECK(v.pass);

  // checks that rely on coming down from infinity refuse divergent measures
  auto bs = small_spec();
  bs.measure = parse_measure_string("bs");
  CHECK_THROWS_AS(theorem_check(bs, TheoremCheck::T3_family_counts), CDIRequired);

  // partial-time check refuses sequences whose length stays below the floor
  auto t4 = small_spec();
  t4.measure = parse_measure_string("beta:1.5");
  t4.n_grid = {10, 20};
  t4.times = {1e-6, 1e-6};
  CHECK_THROWS_AS(theorem_check(t4, TheoremCheck::T4_partial_time), BadParameter);
}

TEST_CASE("family-count ratios concentrate at small scale") {
  // desk-scale version of the full-genealogy limit: loose band, small n
  ExperimentSpec spec;
  spec.measure = parse_measure_string("beta:1.5");
  spec.n_grid = {100, 400};
  spec.gamma = 1.0;
  spec.replicates = 120;
  spec.master_seed = 99;
  spec.tolerances["t3_band_lo"] = 0.5;
  spec.tolerances["t3_band_hi"] = 1.6;
  spec.tolerances["t3_open_frac_min"] = 0.6;
  spec.tolerances["t3_trend_slack"] = 0.25;
  const auto v = theorem_check(spec, TheoremCheck::T3_family_counts);
  CHECK(v.applicable);
  CHECK(v.pass);
}
