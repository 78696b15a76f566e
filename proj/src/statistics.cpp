#include "coalsim/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "coalsim/errors.hpp"

namespace coalsim {

void StepFunction::add(double t, double value) {
  if (!pts_.empty() && pts_.back().first == t)
    pts_.back().second = value;
  else
    pts_.emplace_back(t, value);
}

double StepFunction::operator()(double t) const {
  auto it = std::upper_bound(pts_.begin(), pts_.end(), t,
                             [](double x, const auto& p) { return x < p.first; });
  return it == pts_.begin() ? initial_ : std::prev(it)->second;
}

double StepFunction::left_limit(double t) const {
  auto it = std::lower_bound(pts_.begin(), pts_.end(), t,
                             [](const auto& p, double x) { return p.first < x; });
  return it == pts_.begin() ? initial_ : std::prev(it)->second;
}

double TrajectoryStats::L(double t) const {
  double total = 0.0;
  double prev_t = 0.0;
  double prev_v = N.initial();
  for (const auto& [time, value] : N.points()) {
    if (time >= t) break;
    total += prev_v * (time - prev_t);
    prev_t = time;
    prev_v = value;
  }
  if (t > prev_t) total += prev_v * (t - prev_t);
  return total;
}

TrajectoryStats trajectories(const MarkedGenealogy& g) {
  TrajectoryStats ts;
  std::unordered_map<int, bool> open;  // per active lineage
  for (int i = 1; i <= g.n; ++i) open[i] = true;
  int n_open = g.n, n_closed = 0;
  int m_open = 0, m_closed = 0;

  ts.N = StepFunction(g.n);
  ts.N_open = StepFunction(g.n);
  ts.N_closed = StepFunction(0);
  ts.M = StepFunction(0);
  ts.M_open = StepFunction(0);
  ts.M_closed = StepFunction(0);
  ts.end_time = g.end_time;

  for (const auto& ev : g.events) {
    if (ev.is_merger()) {
      const auto& mg = ev.merger();
      bool any_open = false;
      for (int id : mg.participants) {
        auto it = open.find(id);
        if (it == open.end()) throw UnknownLineage("merger names an unknown lineage");
        (it->second ? n_open : n_closed) -= 1;
        any_open = any_open || it->second;
        open.erase(it);
      }
      open[mg.new_id] = any_open;
      (any_open ? n_open : n_closed) += 1;
    } else {
      auto it = open.find(ev.mutation().lineage);
      if (it == open.end()) throw UnknownLineage("mutation names an unknown lineage");
      if (it->second) {
        it->second = false;  // first mark closes the branch
        --n_open;
        ++n_closed;
        ++m_open;
      } else {
        ++m_closed;
      }
    }
    ts.N.add(ev.time, n_open + n_closed);
    ts.N_open.add(ev.time, n_open);
    ts.N_closed.add(ev.time, n_closed);
    ts.M.add(ev.time, m_open + m_closed);
    ts.M_open.add(ev.time, m_open);
    ts.M_closed.add(ev.time, m_closed);
  }
  return ts;
}

std::vector<SitesFamily> sites_families(const MarkedGenealogy& g) {
  std::unordered_map<int, std::vector<int>> leaves;
  for (int i = 1; i <= g.n; ++i) leaves[i] = {i};
  std::vector<SitesFamily> out;
  for (const auto& ev : g.events) {
    if (ev.is_merger()) {
      const auto& mg = ev.merger();
      std::vector<int> merged;
      for (int id : mg.participants) {
        auto it = leaves.find(id);
        if (it == leaves.end()) throw UnknownLineage("merger names an unknown lineage");
        merged.insert(merged.end(), it->second.begin(), it->second.end());
        leaves.erase(it);
      }
      leaves[mg.new_id] = std::move(merged);
    } else {
      auto it = leaves.find(ev.mutation().lineage);
      if (it == leaves.end()) throw UnknownLineage("mutation names an unknown lineage");
      SitesFamily fam{ev.mutation().mutation_id, it->second};
      std::sort(fam.leaves.begin(), fam.leaves.end());
      out.push_back(std::move(fam));
    }
  }
  return out;
}

std::vector<AlleleBlock> alleles_partition(const MarkedGenealogy& g) {
  // per active lineage: leaves whose allelic type is still undetermined;
  // the first mutation met on the root-ward path claims them
  std::unordered_map<int, std::vector<int>> unassigned;
  for (int i = 1; i <= g.n; ++i) unassigned[i] = {i};
  std::map<int, std::vector<int>> blocks;  // mutation_id -> leaves
  for (const auto& ev : g.events) {
    if (ev.is_merger()) {
      const auto& mg = ev.merger();
      std::vector<int> merged;
      for (int id : mg.participants) {
        auto it = unassigned.find(id);
        if (it == unassigned.end()) throw UnknownLineage("merger names an unknown lineage");
        merged.insert(merged.end(), it->second.begin(), it->second.end());
        unassigned.erase(it);
      }
      unassigned[mg.new_id] = std::move(merged);
    } else {
      auto it = unassigned.find(ev.mutation().lineage);
      if (it == unassigned.end()) throw UnknownLineage("mutation names an unknown lineage");
      if (!it->second.empty()) {
        blocks[ev.mutation().mutation_id] = std::move(it->second);
        it->second.clear();
      }
    }
  }
  // leaves never claimed by a mutation keep the ancestral type 0
  std::vector<int> ancestral;
  for (auto& [id, rest] : unassigned)
    ancestral.insert(ancestral.end(), rest.begin(), rest.end());
  if (!ancestral.empty()) blocks[0] = std::move(ancestral);

  std::vector<AlleleBlock> out;
  for (auto& [mid, lv] : blocks) {
    std::sort(lv.begin(), lv.end());
    out.push_back({mid, std::move(lv)});
  }
  return out;
}

SpectrumCounts spectrum_counts(const MarkedGenealogy& g) {
  SpectrumCounts sc;
  for (const auto& fam : sites_families(g)) sc.sites[static_cast<int>(fam.leaves.size())]++;
  for (const auto& blk : alleles_partition(g))
    if (blk.mutation_id != 0) sc.alleles[static_cast<int>(blk.leaves.size())]++;
  return sc;
}

double predicted_spectrum(double beta, int r, double ell_value) {
  if (!(beta > 0.0 && beta < 1.0)) throw BadBeta("beta must lie in (0,1)");
  if (r < 1) throw BadParameter("r must be a positive integer");
  return beta * std::exp(std::lgamma(r - beta) - std::lgamma(r + 1.0)) * ell_value;
}

}  // namespace coalsim
