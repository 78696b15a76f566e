#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include <json.hpp>

#include "coalsim/measures.hpp"

namespace coalsim {

struct MergerEvent {
  std::vector<int> participants;  // >= 2 lineage ids active at event time
  int new_id;                     // fresh lineage id introduced by the merger
};

struct MutationEvent {
  int lineage;
  int mutation_id;  // consecutive in arrival order, starting at 1
};

struct Event {
  double time = 0.0;
  std::variant<MergerEvent, MutationEvent> kind;

  bool is_merger() const { return std::holds_alternative<MergerEvent>(kind); }
  const MergerEvent& merger() const { return std::get<MergerEvent>(kind); }
  const MutationEvent& mutation() const { return std::get<MutationEvent>(kind); }
};

// Append-only event log of one simulated (or replayed) genealogy. Initial
// lineages carry ids 1..n; mergers introduce fresh ids in event order.
struct MarkedGenealogy {
  int n = 1;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  std::vector<Event> events;
  std::optional<double> tau;       // collapse to a single lineage
  std::optional<double> tau_star;  // first mutation after tau
  double end_time = 0.0;           // horizon up to which the log is complete
};

struct StopRule {
  enum class Kind { UntilTau, UntilTauStar, UntilTime, UntilBlocks };
  Kind kind = Kind::UntilTau;
  double t = 0.0;  // UntilTime
  int b = 1;       // UntilBlocks

  static StopRule until_tau() { return {Kind::UntilTau, 0.0, 1}; }
  static StopRule until_tau_star() { return {Kind::UntilTauStar, 0.0, 1}; }
  static StopRule until_time(double t) { return {Kind::UntilTime, t, 1}; }
  static StopRule until_blocks(int b) { return {Kind::UntilBlocks, 0.0, b}; }
};

// Simulates the n-sample genealogy with mutation rate gamma. Lambda-type
// measures use the Gillespie block-count scheme (optionally sharing a
// precomputed rate kernel across runs); discrete-Xi measures use direct
// Poisson-process simulation with the coloring rule. Deterministic in
// (measure, n, gamma, seed, stop).
MarkedGenealogy simulate(const CoalescentMeasure& m, int n, double gamma, std::uint64_t seed,
                         StopRule stop,
                         std::shared_ptr<const BlockRateKernel> kernel = nullptr,
                         std::uint64_t event_cap = 100000000ull);

// Builds a genealogy from an explicit event script, validating activity and
// time order and deriving tau / tau_star.
MarkedGenealogy replay(const std::vector<Event>& script, int n, double gamma = 0.0);

nlohmann::json genealogy_to_json(const MarkedGenealogy& g);
MarkedGenealogy genealogy_from_json(const nlohmann::json& j);

}  // namespace coalsim
