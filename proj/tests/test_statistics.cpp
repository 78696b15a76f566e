#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "coalsim/errors.hpp"
#include "coalsim/simulator.hpp"
#include "coalsim/statistics.hpp"

using namespace coalsim;

namespace {

// nine-leaf genealogy with the full open/closed bookkeeping exercised:
// five early mutations, two simultaneous mergers, late mutations on both
// fresh and old lineages, and a final root mutation after the collapse
MarkedGenealogy nine_leaf_fixture() {
  std::vector<Event> script{
      {0.3, MutationEvent{8, 1}},
      {0.4, MutationEvent{3, 2}},
      {0.6, MutationEvent{1, 3}},
      {1.0, MutationEvent{7, 4}},
      {1.2, MutationEvent{3, 5}},  // second mark on an already closed branch
      {1.5, MergerEvent{{1, 2, 3}, 10}},
      {1.5, MergerEvent{{6, 7, 8, 9}, 11}},
      {2.1, MutationEvent{4, 6}},
      {2.3, MutationEvent{11, 7}},
      {2.5, MergerEvent{{4, 5}, 12}},
      {3.2, MutationEvent{11, 8}},
      {3.7, MutationEvent{11, 9}},
      {4.0, MergerEvent{{10, 11, 12}, 13}},
      {5.0, MutationEvent{13, 10}},
  };
  return replay(script, 9);
}

}  // namespace

TEST_CASE("nine-leaf fixture: counting processes") {
  const auto g = nine_leaf_fixture();
  CHECK(*g.tau == 4.0);
  CHECK(*g.tau_star == 5.0);

  const auto ts = trajectories(g);
  const double t1 = 1.5, t2 = 2.5;
  CHECK(ts.N(t1) == 4);
  CHECK(ts.N_open(t1) == 4);
  CHECK(ts.M(t1) == 5);
  CHECK(ts.M_open(t1) == 4);
  CHECK(ts.N_closed.left_limit(t1) == 4);
  CHECK(ts.N_closed(t1) == 0);
  CHECK(ts.N_closed.left_limit(t2) == 2);

  // identities at every event time
  for (const auto& ev : g.events) {
    const double t = ev.time;
    CHECK(ts.N(t) == ts.N_open(t) + ts.N_closed(t));
    CHECK(ts.M(t) == ts.M_open(t) + ts.M_closed(t));
  }
  CHECK(ts.M(*g.tau_star) == 10);
}

TEST_CASE("nine-leaf fixture: sites families") {
  const auto fams = sites_families(nine_leaf_fixture());
  REQUIRE(fams.size() == 10);
  using V = std::vector<int>;
  CHECK(fams[0].leaves == V{8});
  CHECK(fams[1].leaves == V{3});
  CHECK(fams[2].leaves == V{1});
  CHECK(fams[3].leaves == V{7});
  CHECK(fams[4].leaves == V{3});  // duplicate leaf set, distinct mutation
  CHECK(fams[4].mutation_id != fams[1].mutation_id);
  CHECK(fams[5].leaves == V{4});
  CHECK(fams[6].leaves == V{6, 7, 8, 9});
  CHECK(fams[7].leaves == V{6, 7, 8, 9});
  CHECK(fams[8].leaves == V{6, 7, 8, 9});
  CHECK(fams[9].leaves == V{1, 2, 3, 4, 5, 6, 7, 8, 9});
}

TEST_CASE("nine-leaf fixture: allele blocks and spectra") {
  const auto g = nine_leaf_fixture();
  const auto blocks = alleles_partition(g);
  REQUIRE(blocks.size() == 7);
  std::set<std::vector<int>> leafsets;
  for (const auto& blk : blocks) {
    CHECK(blk.mutation_id != 0);  // complete genealogy: no ancestral type
    leafsets.insert(blk.leaves);
  }
  const std::set<std::vector<int>> expected{{1}, {2, 5}, {3}, {4}, {6, 9}, {7}, {8}};
  CHECK(leafsets == expected);

  const auto sc = spectrum_counts(g);
  CHECK(sc.sites.at(1) == 6);
  CHECK(sc.sites.at(4) == 3);
  CHECK(sc.sites.at(9) == 1);
  CHECK(sc.sites.size() == 3);
  CHECK(sc.alleles.at(1) == 5);
  CHECK(sc.alleles.at(2) == 2);
  CHECK(sc.alleles.size() == 2);

  int covered = 0;
  for (const auto& [r, c] : sc.alleles) covered += r * c;
  CHECK(covered == 9);
}

TEST_CASE("accumulated length") {
  // two lineages merging at t = 1: L(2) = 2*1 + 1*1 = 3
  const auto g = replay({{1.0, MergerEvent{{1, 2}, 3}}}, 2);
  auto ts = trajectories(g);
  ts.end_time = 2.0;
  CHECK(ts.L(2.0) == doctest::Approx(3.0));
  CHECK(ts.L(0.5) == doctest::Approx(1.0));

  const auto empty = replay({}, 3);
  CHECK(trajectories(empty).L(2.0) == doctest::Approx(6.0));
}

TEST_CASE("partial genealogies carry an ancestral block") {
  const auto g = replay({{0.5, MutationEvent{1, 1}}}, 3);
  const auto blocks = alleles_partition(g);
  REQUIRE(blocks.size() == 2);
  bool have_ancestral = false;
  for (const auto& blk : blocks)
    if (blk.mutation_id == 0) {
      have_ancestral = true;
      CHECK(blk.leaves == std::vector<int>{2, 3});
    }
  CHECK(have_ancestral);
  // ancestral block is excluded from the mutation spectrum
  CHECK(spectrum_counts(g).alleles.at(1) == 1);
  CHECK(spectrum_counts(g).alleles.size() == 1);
}

TEST_CASE("degenerate partitions") {
  // root mutation only: one block covering everything
  const auto root_only =
      replay({{1.0, MergerEvent{{1, 2, 3}, 4}}, {2.0, MutationEvent{4, 1}}}, 3);
  const auto blocks = alleles_partition(root_only);
  REQUIRE(blocks.size() == 1);
  CHECK(blocks[0].leaves == std::vector<int>{1, 2, 3});

  // every leaf mutated before any merger: all singletons
  const auto singles = replay({{0.1, MutationEvent{1, 1}},
                               {0.2, MutationEvent{2, 2}},
                               {0.3, MutationEvent{3, 3}}},
                              3);
  CHECK(alleles_partition(singles).size() == 3);
  CHECK(sites_families(singles).size() == 3);
}

TEST_CASE("sites families are nested along the root path") {
  const auto g = simulate(parse_measure_string("kingman"), 30, 1.0, 17,
                          StopRule::until_tau_star());
  const auto fams = sites_families(g);
  // families containing a fixed leaf are totally ordered by inclusion
  std::vector<const SitesFamily*> through_one;
  for (const auto& f : fams)
    if (std::find(f.leaves.begin(), f.leaves.end(), 1) != f.leaves.end())
      through_one.push_back(&f);
  for (std::size_t i = 0; i + 1 < through_one.size(); ++i)
    CHECK(std::includes(through_one[i + 1]->leaves.begin(), through_one[i + 1]->leaves.end(),
                        through_one[i]->leaves.begin(), through_one[i]->leaves.end()));
}

TEST_CASE("step functions keep the last value on ties") {
  StepFunction f(5.0);
  f.add(1.0, 4.0);
  f.add(1.0, 3.0);
  CHECK(f(0.5) == 5.0);
  CHECK(f(1.0) == 3.0);
  CHECK(f.left_limit(1.0) == 5.0);
  CHECK(f(9.0) == 3.0);
}

TEST_CASE("predicted spectrum values") {
  CHECK(predicted_spectrum(0.5, 1, 100.0) ==
        doctest::Approx(0.5 * std::tgamma(0.5) * 100.0).epsilon(1e-12));
  CHECK(predicted_spectrum(0.5, 1, 100.0) == doctest::Approx(88.6227).epsilon(1e-4));
  CHECK(predicted_spectrum(0.5, 2, 100.0) == doctest::Approx(22.1557).epsilon(1e-4));
  CHECK_THROWS_AS(predicted_spectrum(1.0, 1, 100.0), BadBeta);
  CHECK_THROWS_AS(predicted_spectrum(0.0, 1, 100.0), BadBeta);
}
