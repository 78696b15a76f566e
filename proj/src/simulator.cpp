#include "coalsim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "coalsim/errors.hpp"
#include "coalsim/rng.hpp"

namespace coalsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Floyd's algorithm: k distinct indices from {0..b-1}
std::vector<int> sample_indices(Rng& rng, int b, int k) {
  std::set<int> chosen;
  for (int j = b - k; j < b; ++j) {
    const int r = static_cast<int>(rng.below(static_cast<std::uint64_t>(j) + 1));
    if (!chosen.insert(r).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

// removes the given positions (any order) from `active` in O(k)
void remove_positions(std::vector<int>& active, std::vector<int> positions) {
  std::sort(positions.rbegin(), positions.rend());
  for (int pos : positions) {
    active[static_cast<std::size_t>(pos)] = active.back();
    active.pop_back();
  }
}

struct Runner {
  const CoalescentMeasure& m;
  StopRule stop;
  std::uint64_t event_cap;
  Rng rng;
  MarkedGenealogy g;

  std::vector<int> active;
  int next_id;
  int next_mutation = 1;
  double t = 0.0;
  std::uint64_t steps = 0;

  Runner(const CoalescentMeasure& measure, int n, double gamma, std::uint64_t seed,
         StopRule stop_rule, std::uint64_t cap)
      : m(measure), stop(stop_rule), event_cap(cap), rng(seed), next_id(n + 1) {
    g.n = n;
    g.gamma = gamma;
    g.seed = seed;
    active.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) active[static_cast<std::size_t>(i)] = i + 1;
  }

  bool done() const {
    switch (stop.kind) {
      case StopRule::Kind::UntilTau:
        return g.tau.has_value();
      case StopRule::Kind::UntilTauStar:
        return g.tau_star.has_value();
      case StopRule::Kind::UntilBlocks:
        return static_cast<int>(active.size()) <= stop.b;
      case StopRule::Kind::UntilTime:
        return false;  // handled by time comparison in the loop
    }
    return false;
  }

  void bump_steps() {
    if (++steps > event_cap)
      throw NonTermination("event budget exhausted before the stop rule was met");
  }

  void record_merger(std::vector<int> participants) {
    std::sort(participants.begin(), participants.end());
    g.events.push_back({t, MergerEvent{std::move(participants), next_id}});
    active.push_back(next_id++);
    if (active.size() == 1 && !g.tau) g.tau = t;
  }

  void record_mutation(int lineage) {
    g.events.push_back({t, MutationEvent{lineage, next_mutation++}});
    if (g.tau && !g.tau_star) g.tau_star = t;
  }

  void mutate_uniform() {
    const int idx = static_cast<int>(rng.below(active.size()));
    record_mutation(active[static_cast<std::size_t>(idx)]);
  }

  // caps the next event at the fixed horizon; returns false when the run ends
  bool advance_to(double next) {
    if (stop.kind == StopRule::Kind::UntilTime && next > stop.t) {
      t = stop.t;
      return false;
    }
    t = next;
    return true;
  }

  void finish() {
    if (g.n >= 1 && active.size() == 1 && !g.tau && g.events.empty()) g.tau = 0.0;
    g.end_time = stop.kind == StopRule::Kind::UntilTime ? stop.t : t;
  }

  void run_lambda(std::shared_ptr<const BlockRateKernel> kernel) {
    if (!kernel || kernel->n_max() < g.n)
      kernel = std::make_shared<const BlockRateKernel>(m, g.n);
    if (active.size() == 1 && !g.tau) g.tau = 0.0;
    while (!done()) {
      bump_steps();
      const int b = static_cast<int>(active.size());
      const double merger_rate = b >= 2 ? kernel->total_rate(b) : 0.0;
      const double dt_merger = merger_rate > 0.0 ? rng.exponential(merger_rate) : kInf;
      const double mut_rate = g.gamma * b;
      const double dt_mut = mut_rate > 0.0 ? rng.exponential(mut_rate) : kInf;
      if (dt_merger == kInf && dt_mut == kInf) break;  // nothing can happen
      if (dt_merger <= dt_mut) {
        if (!advance_to(t + dt_merger)) return;
        const int k = kernel->sample_k(b, rng.u01());
        const auto positions = sample_indices(rng, b, k);
        std::vector<int> participants;
        participants.reserve(positions.size());
        for (int pos : positions) participants.push_back(active[static_cast<std::size_t>(pos)]);
        remove_positions(active, positions);
        record_merger(std::move(participants));
      } else {
        if (!advance_to(t + dt_mut)) return;
        mutate_uniform();
      }
    }
  }

  void run_xi() {
    // PPP rates: atom j fires at weight / sum of squared coordinates
    std::vector<double> atom_rate;
    double atoms_total = 0.0;
    for (const auto& a : m.xi_atoms) {
      atom_rate.push_back(a.weight / a.point.sum_sq());
      atoms_total += atom_rate.back();
    }
    if (active.size() == 1 && !g.tau) g.tau = 0.0;
    while (!done()) {
      bump_steps();
      const int b = static_cast<int>(active.size());
      const double pairs = static_cast<double>(b) * (b - 1) / 2.0;
      const double kingman_rate = m.kingman_mass * pairs;
      const double merger_rate = b >= 2 ? atoms_total + kingman_rate : 0.0;
      const double dt_merger = merger_rate > 0.0 ? rng.exponential(merger_rate) : kInf;
      const double mut_rate = g.gamma * b;
      const double dt_mut = mut_rate > 0.0 ? rng.exponential(mut_rate) : kInf;
      if (dt_merger == kInf && dt_mut == kInf) break;
      if (dt_merger <= dt_mut) {
        if (!advance_to(t + dt_merger)) return;
        const double pick = rng.u01() * merger_rate;
        if (pick <= kingman_rate) {
          // pairwise clock of the origin atom: a uniform pair coalesces
          const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(b)));
          int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(b) - 1));
          if (j >= i) ++j;
          std::vector<int> participants{active[static_cast<std::size_t>(i)],
                                        active[static_cast<std::size_t>(j)]};
          remove_positions(active, {i, j});
          record_merger(std::move(participants));
        } else {
          // choose atom proportionally, then apply the coloring rule
          double cum = kingman_rate;
          std::size_t chosen = atom_rate.size() - 1;
          for (std::size_t j = 0; j < atom_rate.size(); ++j) {
            cum += atom_rate[j];
            if (pick <= cum) {
              chosen = j;
              break;
            }
          }
          const auto& coords = m.xi_atoms[chosen].point.coords;
          // color -1 means dust (a unique color: lineage stays single)
          std::unordered_map<int, std::vector<int>> groups;
          for (int pos = 0; pos < b; ++pos) {
            const double u = rng.u01();
            double acc = 0.0;
            int color = -1;
            for (std::size_t i = 0; i < coords.size(); ++i) {
              acc += coords[i];
              if (u <= acc) {
                color = static_cast<int>(i);
                break;
              }
            }
            if (color >= 0) groups[color].push_back(pos);
          }
          // collapse same-color groups; several simultaneous mergers are
          // possible and share the event time
          std::vector<int> merged_positions;
          std::vector<std::vector<int>> mergers;
          for (int color = 0; color < static_cast<int>(coords.size()); ++color) {
            auto it = groups.find(color);
            if (it == groups.end() || it->second.size() < 2) continue;
            std::vector<int> participants;
            for (int pos : it->second) {
              participants.push_back(active[static_cast<std::size_t>(pos)]);
              merged_positions.push_back(pos);
            }
            mergers.push_back(std::move(participants));
          }
          remove_positions(active, std::move(merged_positions));
          for (auto& participants : mergers) record_merger(std::move(participants));
          // all colors distinct: a legitimate no-op that only advances time
        }
      } else {
        if (!advance_to(t + dt_mut)) return;
        mutate_uniform();
      }
    }
  }
};

}  // namespace

MarkedGenealogy simulate(const CoalescentMeasure& m, int n, double gamma, std::uint64_t seed,
                         StopRule stop, std::shared_ptr<const BlockRateKernel> kernel,
                         std::uint64_t event_cap) {
  if (n < 1) throw BadParameter("sample size must be at least 1");
  if (gamma < 0.0) throw BadGamma("mutation rate must be nonnegative");
  if (stop.kind == StopRule::Kind::UntilTauStar && gamma <= 0.0)
    throw GammaZeroWithTauStar("stopping at the first post-collapse mutation requires gamma > 0");
  if (stop.kind == StopRule::Kind::UntilTime && stop.t < 0.0)
    throw BadParameter("time horizon must be nonnegative");
  if (stop.kind == StopRule::Kind::UntilBlocks && stop.b < 1)
    throw BadParameter("block target must be at least 1");

  Runner runner(m, n, gamma, seed, stop, event_cap);
  if (m.family == Family::XiAtoms)
    runner.run_xi();
  else
    runner.run_lambda(std::move(kernel));
  runner.finish();
  return runner.g;
}

MarkedGenealogy replay(const std::vector<Event>& script, int n, double gamma) {
  if (n < 1) throw BadParameter("sample size must be at least 1");
  MarkedGenealogy g;
  g.n = n;
  g.gamma = gamma;

  std::set<int> active, seen;
  for (int i = 1; i <= n; ++i) {
    active.insert(i);
    seen.insert(i);
  }
  double last_time = 0.0;
  int next_mutation = 1;
  for (const auto& ev : script) {
    if (ev.time < last_time)
      throw NonmonotoneTime("event times must be nondecreasing in replay scripts");
    last_time = ev.time;
    if (ev.is_merger()) {
      const auto& mg = ev.merger();
      if (mg.participants.size() < 2)
        throw BadParameter("a merger needs at least two participants");
      std::set<int> distinct(mg.participants.begin(), mg.participants.end());
      if (distinct.size() != mg.participants.size())
        throw BadParameter("merger participants must be distinct");
      for (int id : mg.participants) {
        if (!seen.count(id)) throw UnknownLineage("merger names a lineage never introduced");
        if (!active.count(id)) throw InactiveLineage("merger names an inactive lineage");
        active.erase(id);
      }
      if (seen.count(mg.new_id)) throw BadParameter("merger must introduce a fresh lineage id");
      active.insert(mg.new_id);
      seen.insert(mg.new_id);
      g.events.push_back(ev);
      if (active.size() == 1 && !g.tau) g.tau = ev.time;
    } else {
      const auto& mu = ev.mutation();
      if (!seen.count(mu.lineage)) throw UnknownLineage("mutation names a lineage never introduced");
      if (!active.count(mu.lineage)) throw InactiveLineage("mutation names an inactive lineage");
      if (mu.mutation_id != next_mutation)
        throw BadParameter("mutation ids must be consecutive in arrival order");
      ++next_mutation;
      g.events.push_back(ev);
      if (g.tau && !g.tau_star) g.tau_star = ev.time;
    }
  }
  if (n == 1 && !g.tau) g.tau = 0.0;
  g.end_time = last_time;
  return g;
}

nlohmann::json genealogy_to_json(const MarkedGenealogy& g) {
  nlohmann::json j;
  j["n"] = g.n;
  j["gamma"] = g.gamma;
  j["seed"] = g.seed;
  j["end_time"] = g.end_time;
  j["tau"] = g.tau ? nlohmann::json(*g.tau) : nlohmann::json(nullptr);
  j["tau_star"] = g.tau_star ? nlohmann::json(*g.tau_star) : nlohmann::json(nullptr);
  auto events = nlohmann::json::array();
  for (const auto& ev : g.events) {
    nlohmann::json e;
    e["t"] = ev.time;
    if (ev.is_merger()) {
      e["kind"] = "merger";
      e["participants"] = ev.merger().participants;
      e["new_id"] = ev.merger().new_id;
    } else {
      e["kind"] = "mutation";
      e["lineage"] = ev.mutation().lineage;
      e["mutation_id"] = ev.mutation().mutation_id;
    }
    events.push_back(std::move(e));
  }
  j["events"] = std::move(events);
  return j;
}

MarkedGenealogy genealogy_from_json(const nlohmann::json& j) {
  std::vector<Event> script;
  for (const auto& e : j.at("events")) {
    Event ev;
    ev.time = e.at("t").get<double>();
    const std::string kind = e.at("kind").get<std::string>();
    if (kind == "merger")
      ev.kind = MergerEvent{e.at("participants").get<std::vector<int>>(),
                            e.at("new_id").get<int>()};
    else if (kind == "mutation")
      ev.kind = MutationEvent{e.at("lineage").get<int>(), e.at("mutation_id").get<int>()};
    else
      throw ConfigError("unknown event kind '" + kind + "'");
    script.push_back(std::move(ev));
  }
  MarkedGenealogy g = replay(script, j.at("n").get<int>(), j.value("gamma", 0.0));
  g.seed = j.value("seed", 0ull);
  if (j.contains("end_time")) g.end_time = j.at("end_time").get<double>();
  return g;
}

}  // namespace coalsim
