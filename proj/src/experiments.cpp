#include "coalsim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "coalsim/errors.hpp"
#include "coalsim/rng.hpp"
#include "coalsim/speed.hpp"
#include "coalsim/statistics.hpp"

namespace coalsim {

namespace {

double tolerance(const ExperimentSpec& spec, const std::string& key, double fallback) {
  auto it = spec.tolerances.find(key);
  return it == spec.tolerances.end() ? fallback : it->second;
}

void parallel_for(int begin, int end, int threads, const std::function<void(int)>& body) {
  const int count = end - begin;
  if (count <= 0) return;
  int t = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  t = std::max(1, std::min(t, count));
  if (t == 1) {
    for (int i = begin; i < end; ++i) body(i);
    return;
  }
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  for (int tid = 0; tid < t; ++tid) {
    pool.emplace_back([&, tid] {
      try {
        for (int i = begin + tid; i < end; i += t) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

ScalarSummary summarize(const std::vector<std::pair<int, double>>& raw) {
  ScalarSummary s;
  s.replicates = static_cast<int>(raw.size());
  if (raw.empty()) return s;
  double sum = 0.0;
  for (const auto& [rep, v] : raw) sum += v;
  s.estimate = sum / s.replicates;
  if (s.replicates > 1) {
    double ss = 0.0;
    for (const auto& [rep, v] : raw) ss += (v - s.estimate) * (v - s.estimate);
    s.stderr_ = std::sqrt(ss / (s.replicates - 1) / s.replicates);
  }
  return s;
}

double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = p * (static_cast<double>(v.size()) - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

double sup_open_fraction(const TrajectoryStats& ts) {
  double sup = 0.0;  // before the first event N_open = N
  const auto& n_pts = ts.N.points();
  const auto& o_pts = ts.N_open.points();
  for (std::size_t i = 0; i < n_pts.size(); ++i) {
    const double dev = std::fabs(1.0 - o_pts[i].second / n_pts[i].second);
    sup = std::max(sup, dev);
  }
  return sup;
}

double eval_statistic(const MarkedGenealogy& g, Statistic s, int spectrum_r) {
  switch (s) {
    case Statistic::Tau:
      return g.tau ? *g.tau : std::numeric_limits<double>::quiet_NaN();
    case Statistic::TauStar:
      return g.tau_star ? *g.tau_star : std::numeric_limits<double>::quiet_NaN();
    case Statistic::MutationsTotal: {
      int m = 0;
      for (const auto& ev : g.events) m += ev.is_merger() ? 0 : 1;
      return m;
    }
    default:
      break;
  }
  const TrajectoryStats ts = trajectories(g);
  const double end = g.end_time;
  switch (s) {
    case Statistic::MutationsOpen:
      return ts.M_open(end);
    case Statistic::MutationsClosed:
      return ts.M_closed(end);
    case Statistic::Blocks:
      return ts.N(end);
    case Statistic::BlocksOpen:
      return ts.N_open(end);
    case Statistic::TotalLength:
      return ts.L(end);
    case Statistic::SitesFamiliesOfSize: {
      const auto sc = spectrum_counts(g);
      auto it = sc.sites.find(spectrum_r);
      return it == sc.sites.end() ? 0.0 : it->second;
    }
    case Statistic::SupOpenFraction:
      return sup_open_fraction(ts);
    default:
      throw BadParameter("statistic is not scalar-valued");
  }
}

void check_spec(const ExperimentSpec& spec) {
  if (spec.replicates < 1) throw ZeroReplicates("experiment needs at least one replicate");
  if (spec.n_grid.empty()) throw BadParameter("n_grid must be nonempty");
  for (std::size_t i = 0; i + 1 < spec.n_grid.size(); ++i)
    if (spec.n_grid[i] >= spec.n_grid[i + 1])
      throw BadParameter("n_grid must be strictly increasing");
  if (spec.gamma < 0.0) throw BadGamma("gamma must be nonnegative");
}

}  // namespace

Statistic statistic_from_name(const std::string& name) {
  if (name == "tau") return Statistic::Tau;
  if (name == "tau_star") return Statistic::TauStar;
  if (name == "mutations_total") return Statistic::MutationsTotal;
  if (name == "mutations_open") return Statistic::MutationsOpen;
  if (name == "mutations_closed") return Statistic::MutationsClosed;
  if (name == "blocks") return Statistic::Blocks;
  if (name == "blocks_open") return Statistic::BlocksOpen;
  if (name == "total_length") return Statistic::TotalLength;
  if (name == "sites_families_of_size") return Statistic::SitesFamiliesOfSize;
  if (name == "sup_open_fraction") return Statistic::SupOpenFraction;
  if (name == "allele_partition_histogram") return Statistic::AllelePartitionHistogram;
  throw ConfigError("unknown statistic '" + name + "'");
}

std::string statistic_name(Statistic s) {
  switch (s) {
    case Statistic::Tau: return "tau";
    case Statistic::TauStar: return "tau_star";
    case Statistic::MutationsTotal: return "mutations_total";
    case Statistic::MutationsOpen: return "mutations_open";
    case Statistic::MutationsClosed: return "mutations_closed";
    case Statistic::Blocks: return "blocks";
    case Statistic::BlocksOpen: return "blocks_open";
    case Statistic::TotalLength: return "total_length";
    case Statistic::SitesFamiliesOfSize: return "sites_families_of_size";
    case Statistic::SupOpenFraction: return "sup_open_fraction";
    case Statistic::AllelePartitionHistogram: return "allele_partition_histogram";
  }
  return "?";
}

StopRule parse_stop(const std::string& text) {
  if (text == "tau") return StopRule::until_tau();
  if (text == "tau-star" || text == "tau_star") return StopRule::until_tau_star();
  if (text.rfind("time=", 0) == 0) return StopRule::until_time(std::stod(text.substr(5)));
  if (text.rfind("blocks=", 0) == 0) return StopRule::until_blocks(std::stoi(text.substr(7)));
  throw ConfigError("unknown stop rule '" + text + "'");
}

std::string stop_to_string(const StopRule& stop) {
  switch (stop.kind) {
    case StopRule::Kind::UntilTau: return "tau";
    case StopRule::Kind::UntilTauStar: return "tau-star";
    case StopRule::Kind::UntilTime: {
      std::ostringstream os;
      os << "time=" << stop.t;
      return os.str();
    }
    case StopRule::Kind::UntilBlocks: {
      std::ostringstream os;
      os << "blocks=" << stop.b;
      return os.str();
    }
  }
  return "?";
}

std::string configuration_key(const std::vector<int>& a) {
  std::ostringstream os;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) os << ',';
    os << a[i];
  }
  return os.str();
}

std::string allele_configuration_key(const MarkedGenealogy& g) {
  std::vector<int> a(static_cast<std::size_t>(g.n), 0);
  for (const auto& blk : alleles_partition(g))
    a[blk.leaves.size() - 1] += 1;  // ancestral block included: sizes still partition n
  return configuration_key(a);
}

ExperimentSpec experiment_spec_from_json(const nlohmann::json& j) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const char* allowed[] = {"measure",     "n_grid", "gamma",      "replicates",
                                    "master_seed", "statistic", "stop",    "spectrum_r",
                                    "times",       "tolerances", "threads"};
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown experiment key '" + it.key() + "'");
  }
  ExperimentSpec spec;
  spec.measure = validate_measure(j.at("measure"));
  spec.n_grid = j.at("n_grid").get<std::vector<int>>();
  spec.gamma = j.value("gamma", 1.0);
  spec.replicates = j.value("replicates", 1);
  spec.master_seed = j.value("master_seed", 0ull);
  if (j.contains("statistic")) spec.statistic = statistic_from_name(j.at("statistic"));
  if (j.contains("stop")) spec.stop = parse_stop(j.at("stop").get<std::string>());
  spec.spectrum_r = j.value("spectrum_r", 1);
  if (j.contains("times")) spec.times = j.at("times").get<std::vector<double>>();
  if (j.contains("tolerances"))
    spec.tolerances = j.at("tolerances").get<std::map<std::string, double>>();
  spec.threads = j.value("threads", 0);
  check_spec(spec);
  return spec;
}

nlohmann::json experiment_spec_to_json(const ExperimentSpec& spec) {
  nlohmann::json j;
  j["measure"] = measure_to_json(spec.measure);
  j["n_grid"] = spec.n_grid;
  j["gamma"] = spec.gamma;
  j["replicates"] = spec.replicates;
  j["master_seed"] = spec.master_seed;
  j["statistic"] = statistic_name(spec.statistic);
  j["stop"] = stop_to_string(spec.stop);
  j["spectrum_r"] = spec.spectrum_r;
  if (!spec.times.empty()) j["times"] = spec.times;
  if (!spec.tolerances.empty()) j["tolerances"] = spec.tolerances;
  return j;
}

ExperimentResult run_experiment_range(const ExperimentSpec& spec, int rep_begin, int rep_end) {
  check_spec(spec);
  if (rep_begin < 0 || rep_end > spec.replicates || rep_begin >= rep_end)
    throw BadParameter("replicate range must be a nonempty subrange of [0, replicates)");
  ExperimentResult result;
  result.spec = spec;
  const int count = rep_end - rep_begin;
  for (int n : spec.n_grid) {
    NResult nr;
    nr.n = n;
    std::shared_ptr<const BlockRateKernel> kernel;
    if (spec.measure.family != Family::XiAtoms)
      kernel = std::make_shared<const BlockRateKernel>(spec.measure, n);
    if (spec.statistic == Statistic::AllelePartitionHistogram) {
      std::mutex merge_mutex;
      parallel_for(rep_begin, rep_end, spec.threads, [&](int rep) {
        const auto g = simulate(spec.measure, n, spec.gamma,
                                derive_seed(spec.master_seed, static_cast<std::uint64_t>(n),
                                            static_cast<std::uint64_t>(rep)),
                                spec.stop, kernel);
        const std::string key = allele_configuration_key(g);
        std::lock_guard<std::mutex> lock(merge_mutex);
        nr.histogram[key] += 1;  // integer sums: order-independent
      });
      nr.summary.replicates = count;
    } else {
      std::vector<double> slots(static_cast<std::size_t>(count));
      parallel_for(rep_begin, rep_end, spec.threads, [&](int rep) {
        const auto g = simulate(spec.measure, n, spec.gamma,
                                derive_seed(spec.master_seed, static_cast<std::uint64_t>(n),
                                            static_cast<std::uint64_t>(rep)),
                                spec.stop, kernel);
        slots[static_cast<std::size_t>(rep - rep_begin)] =
            eval_statistic(g, spec.statistic, spec.spectrum_r);
      });
      nr.raw.reserve(static_cast<std::size_t>(count));
      for (int rep = rep_begin; rep < rep_end; ++rep)
        nr.raw.emplace_back(rep, slots[static_cast<std::size_t>(rep - rep_begin)]);
      nr.summary = summarize(nr.raw);
    }
    result.per_n.push_back(std::move(nr));
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  return run_experiment_range(spec, 0, spec.replicates);
}

ExperimentResult merge(const ExperimentResult& a, const ExperimentResult& b) {
  if (a.per_n.size() != b.per_n.size())
    throw BadParameter("cannot merge results with different n grids");
  ExperimentResult out;
  out.spec = a.spec;
  for (std::size_t i = 0; i < a.per_n.size(); ++i) {
    const NResult& x = a.per_n[i];
    const NResult& y = b.per_n[i];
    if (x.n != y.n) throw BadParameter("cannot merge results with different n grids");
    NResult nr;
    nr.n = x.n;
    nr.raw = x.raw;
    nr.raw.insert(nr.raw.end(), y.raw.begin(), y.raw.end());
    std::sort(nr.raw.begin(), nr.raw.end());
    for (std::size_t k = 0; k + 1 < nr.raw.size(); ++k)
      if (nr.raw[k].first == nr.raw[k + 1].first)
        throw BadParameter("replicate ranges to merge must be disjoint");
    nr.summary = summarize(nr.raw);
    nr.histogram = x.histogram;
    for (const auto& [key, cnt] : y.histogram) nr.histogram[key] += cnt;
    nr.summary.replicates = static_cast<int>(nr.raw.size());
    if (a.spec.statistic == Statistic::AllelePartitionHistogram) {
      std::int64_t total = 0;
      for (const auto& [key, cnt] : nr.histogram) total += cnt;
      nr.summary.replicates = static_cast<int>(total);
    }
    out.per_n.push_back(std::move(nr));
  }
  return out;
}

// ---------------------------------------------------------------------------
// theorem checks

namespace {

struct ReplicateRatios {
  std::vector<double> per_ell;       // M / (gamma * ell)
  std::vector<double> open_per_ell;  // M_open / (gamma * ell)
  std::vector<double> open_frac;     // M_open / M
};

ReplicateRatios ratio_replicates(const ExperimentSpec& spec, int n, double ell, StopRule stop) {
  ReplicateRatios r;
  r.per_ell.resize(static_cast<std::size_t>(spec.replicates));
  r.open_per_ell.resize(static_cast<std::size_t>(spec.replicates));
  r.open_frac.resize(static_cast<std::size_t>(spec.replicates));
  std::shared_ptr<const BlockRateKernel> kernel;
  if (spec.measure.family != Family::XiAtoms)
    kernel = std::make_shared<const BlockRateKernel>(spec.measure, n);
  const double denom = spec.gamma * ell;
  parallel_for(0, spec.replicates, spec.threads, [&](int rep) {
    const auto g = simulate(spec.measure, n, spec.gamma,
                            derive_seed(spec.master_seed, static_cast<std::uint64_t>(n),
                                        static_cast<std::uint64_t>(rep)),
                            stop, kernel);
    const auto ts = trajectories(g);
    const double m = ts.M(g.end_time);
    const double mo = ts.M_open(g.end_time);
    const std::size_t i = static_cast<std::size_t>(rep);
    r.per_ell[i] = m / denom;
    r.open_per_ell[i] = mo / denom;
    r.open_frac[i] = m > 0.0 ? mo / m : 1.0;
  });
  return r;
}

void push_item(TheoremVerdict& v, std::string name, double value, bool pass,
               std::string note = "") {
  v.items.push_back({std::move(name), value, pass, std::move(note)});
}

void finalize(TheoremVerdict& v) {
  v.pass = true;
  for (const auto& item : v.items) v.pass = v.pass && item.pass;
}

TheoremVerdict check_t1(const ExperimentSpec& spec) {
  TheoremVerdict v;
  v.which = "T1_closed_fraction";
  if (spec.gamma <= 0.0) {
    v.applicable = false;
    v.pass = true;
    v.details["note"] = "closed-mutation statistics are identically zero at gamma = 0";
    return v;
  }
  const int n = spec.n_grid.back();
  std::vector<double> times = spec.times.empty() ? std::vector<double>{1e-3, 1e-2, 1e-1}
                                                 : spec.times;
  std::sort(times.begin(), times.end());
  const double beta = tolerance(spec, "t1_beta", 0.25);  // tail exponent in (0, 1/3)
  std::shared_ptr<const BlockRateKernel> kernel;
  if (spec.measure.family != Family::XiAtoms)
    kernel = std::make_shared<const BlockRateKernel>(spec.measure, n);
  std::vector<double> mean_ratio(times.size()), tail_freq(times.size());
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    const double t = times[ti];
    std::vector<double> ratio(static_cast<std::size_t>(spec.replicates));
    std::vector<double> tail(static_cast<std::size_t>(spec.replicates));
    parallel_for(0, spec.replicates, spec.threads, [&](int rep) {
      const auto g = simulate(spec.measure, n, spec.gamma,
                              derive_seed(spec.master_seed, static_cast<std::uint64_t>(n),
                                          static_cast<std::uint64_t>(rep)),
                              StopRule::until_time(t), kernel);
      const auto ts = trajectories(g);
      const double mc = ts.M_closed(t);
      const double m = ts.M(t);
      const double len = ts.L(t);
      const std::size_t i = static_cast<std::size_t>(rep);
      ratio[i] = len > 0.0 ? mc / (spec.gamma * len) : 0.0;
      tail[i] = (m > 0.0 && mc / m >= std::pow(t, beta)) ? 1.0 : 0.0;
    });
    double rsum = 0.0, tsum = 0.0;
    for (std::size_t i = 0; i < ratio.size(); ++i) {
      rsum += ratio[i];
      tsum += tail[i];
    }
    mean_ratio[ti] = rsum / spec.replicates;
    tail_freq[ti] = tsum / spec.replicates;
  }
  const double slack = tolerance(spec, "t1_trend_slack", 0.0);
  bool ratio_monotone = true, tail_monotone = true;
  for (std::size_t ti = 0; ti + 1 < times.size(); ++ti) {
    ratio_monotone = ratio_monotone && mean_ratio[ti] <= mean_ratio[ti + 1] + slack;
    tail_monotone = tail_monotone && tail_freq[ti] <= tail_freq[ti + 1] + slack;
  }
  const double cap = tolerance(spec, "t1_max_at_min", 0.15);
  push_item(v, "mean_ratio_nonincreasing_as_t_decreases", ratio_monotone ? 1.0 : 0.0,
            ratio_monotone);
  push_item(v, "tail_freq_nonincreasing_as_t_decreases", tail_monotone ? 1.0 : 0.0,
            tail_monotone);
  push_item(v, "mean_ratio_at_smallest_t", mean_ratio.front(), mean_ratio.front() <= cap,
            "cap " + std::to_string(cap));
  v.details["n"] = n;
  v.details["times"] = times;
  v.details["mean_closed_over_gamma_length"] = mean_ratio;
  v.details["tail_exceedance_freq"] = tail_freq;
  v.details["tail_beta"] = beta;
  finalize(v);
  return v;
}

TheoremVerdict check_p2(const ExperimentSpec& spec) {
  TheoremVerdict v;
  v.which = "P2_speed_envelope";
  if (spec.gamma <= 0.0) {
    v.applicable = false;
    v.pass = true;
    v.details["note"] = "the open/total ratio is identically 1 at gamma = 0";
    return v;
  }
  const int n = spec.n_grid.back();
  std::vector<double> times = spec.times.empty() ? std::vector<double>{1e-4, 1e-3}
                                                 : spec.times;
  std::sort(times.begin(), times.end());
  std::shared_ptr<const BlockRateKernel> kernel;
  if (spec.measure.family != Family::XiAtoms)
    kernel = std::make_shared<const BlockRateKernel>(spec.measure, n);
  std::vector<double> freq(times.size());
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    const double s = times[ti];
    const double threshold = 8.0 * std::cbrt(s);
    std::vector<double> exceed(static_cast<std::size_t>(spec.replicates));
    parallel_for(0, spec.replicates, spec.threads, [&](int rep) {
      const auto g = simulate(spec.measure, n, spec.gamma,
                              derive_seed(spec.master_seed, static_cast<std::uint64_t>(n),
                                          static_cast<std::uint64_t>(rep)),
                              StopRule::until_time(s), kernel);
      exceed[static_cast<std::size_t>(rep)] =
          sup_open_fraction(trajectories(g)) > threshold ? 1.0 : 0.0;
    });
    double sum = 0.0;
    for (double e : exceed) sum += e;
    freq[ti] = sum / spec.replicates;
  }
  const double cap = tolerance(spec, "p2_max_freq", 0.1);
  bool monotone = true;
  for (std::size_t ti = 0; ti + 1 < times.size(); ++ti)
    monotone = monotone && freq[ti] <= freq[ti + 1] + tolerance(spec, "p2_trend_slack", 0.0);
  for (std::size_t ti = 0; ti < times.size(); ++ti)
    push_item(v, "exceedance_freq_at_s_" + std::to_string(times[ti]), freq[ti],
              freq[ti] <= cap, "cap " + std::to_string(cap));
  push_item(v, "exceedance_freq_nonincreasing_as_s_decreases", monotone ? 1.0 : 0.0, monotone);
  v.details["n"] = n;
  v.details["times"] = times;
  v.details["exceedance_freq"] = freq;
  finalize(v);
  return v;
}

TheoremVerdict ratio_check(const ExperimentSpec& spec, bool partial_time) {
  if (comes_down_check(spec.measure).cdi == Cdi::No)
    throw CDIRequired("this check requires a coalescent that comes down from infinity");
  if (spec.gamma <= 0.0) throw BadGamma("mutation-count ratios require gamma > 0");
  TheoremVerdict v;
  v.which = partial_time ? "T4_partial_time" : "T3_family_counts";
  if (partial_time && spec.times.size() != spec.n_grid.size())
    throw BadParameter("partial-time check needs one time per n_grid entry");
  auto psi = std::make_shared<const PsiEvaluator>(spec.measure);
  const std::string prefix = partial_time ? "t4_" : "t3_";
  std::vector<double> med_m, med_mo, med_frac, ells;
  auto grid = nlohmann::json::array();
  for (std::size_t ni = 0; ni < spec.n_grid.size(); ++ni) {
    const int n = spec.n_grid[ni];
    SpeedSolver solver(psi, n);
    StopRule stop = StopRule::until_tau();
    double ell;
    if (partial_time) {
      const double t_n = spec.times[ni];
      ell = solver.ell(t_n);
      if (ell < tolerance(spec, "t4_ell_floor", 10.0))
        throw BadParameter("partial-time length fails the divergence floor");
      stop = StopRule::until_time(t_n);
    } else {
      ell = solver.ell();
    }
    ells.push_back(ell);
    const auto r = ratio_replicates(spec, n, ell, stop);
    auto sorted_m = r.per_ell;
    std::sort(sorted_m.begin(), sorted_m.end());
    auto sorted_mo = r.open_per_ell;
    std::sort(sorted_mo.begin(), sorted_mo.end());
    med_m.push_back(quantile_sorted(sorted_m, 0.5));
    med_mo.push_back(quantile_sorted(sorted_mo, 0.5));
    med_frac.push_back(median_of(r.open_frac));
    nlohmann::json row;
    row["n"] = n;
    row["ell"] = ell;
    row["median_m_ratio"] = med_m.back();
    row["iqr_m_ratio"] = quantile_sorted(sorted_m, 0.75) - quantile_sorted(sorted_m, 0.25);
    row["median_mo_ratio"] = med_mo.back();
    row["iqr_mo_ratio"] = quantile_sorted(sorted_mo, 0.75) - quantile_sorted(sorted_mo, 0.25);
    row["median_open_frac"] = med_frac.back();
    row["mean_m_ratio"] = [&] {
      double s = 0.0;
      for (double x : r.per_ell) s += x;
      return s / spec.replicates;
    }();
    grid.push_back(std::move(row));
  }
  const double lo = tolerance(spec, prefix + "band_lo", 0.75);
  const double hi = tolerance(spec, prefix + "band_hi", 1.25);
  push_item(v, "median_m_ratio_at_largest_n", med_m.back(),
            med_m.back() >= lo && med_m.back() <= hi);
  push_item(v, "median_mo_ratio_at_largest_n", med_mo.back(),
            med_mo.back() >= lo && med_mo.back() <= hi);
  const double slack = tolerance(spec, prefix + "trend_slack", 0.0);
  bool m_trend = true, mo_trend = true;
  for (std::size_t i = 0; i + 1 < med_m.size(); ++i) {
    m_trend = m_trend && std::fabs(med_m[i + 1] - 1.0) <= std::fabs(med_m[i] - 1.0) + slack;
    mo_trend = mo_trend && std::fabs(med_mo[i + 1] - 1.0) <= std::fabs(med_mo[i] - 1.0) + slack;
  }
  push_item(v, "m_ratio_approaches_1_along_grid", m_trend ? 1.0 : 0.0, m_trend);
  push_item(v, "mo_ratio_approaches_1_along_grid", mo_trend ? 1.0 : 0.0, mo_trend);
  const double open_min = tolerance(spec, prefix + "open_frac_min", 0.9);
  push_item(v, "median_open_frac_at_largest_n", med_frac.back(), med_frac.back() >= open_min,
            "floor " + std::to_string(open_min));
  v.details["grid"] = std::move(grid);
  finalize(v);
  return v;
}

TheoremVerdict check_c7(const ExperimentSpec& spec) {
  if (comes_down_check(spec.measure).cdi == Cdi::No)
    throw CDIRequired("the spectrum check requires a coalescent that comes down from infinity");
  if (spec.gamma <= 0.0) throw BadGamma("the spectrum check requires gamma > 0");
  TheoremVerdict v;
  v.which = "C7_spectrum";
  const int n = spec.n_grid.back();
  auto psi = std::make_shared<const PsiEvaluator>(spec.measure);
  const double ell = SpeedSolver(psi, n).ell();
  const int r_max = static_cast<int>(tolerance(spec, "c7_r_max", 2.0));
  const auto beta_it = spec.tolerances.find("c7_beta");
  const double beta =
      beta_it != spec.tolerances.end() ? beta_it->second : std::log(ell) / std::log(n);
  std::shared_ptr<const BlockRateKernel> kernel;
  if (spec.measure.family != Family::XiAtoms)
    kernel = std::make_shared<const BlockRateKernel>(spec.measure, n);
  std::vector<std::vector<double>> counts(static_cast<std::size_t>(r_max));
  for (auto& c : counts) c.resize(static_cast<std::size_t>(spec.replicates));
  parallel_for(0, spec.replicates, spec.threads, [&](int rep) {
    const auto g = simulate(spec.measure, n, spec.gamma,
                            derive_seed(spec.master_seed, static_cast<std::uint64_t>(n),
                                        static_cast<std::uint64_t>(rep)),
                            StopRule::until_tau_star(), kernel);
    const auto sc = spectrum_counts(g);
    for (int r = 1; r <= r_max; ++r) {
      auto it = sc.sites.find(r);
      counts[static_cast<std::size_t>(r - 1)][static_cast<std::size_t>(rep)] =
          it == sc.sites.end() ? 0.0 : it->second;
    }
  });
  v.details["n"] = n;
  v.details["ell"] = ell;
  v.details["beta"] = beta;
  auto rows = nlohmann::json::array();
  for (int r = 1; r <= r_max; ++r) {
    double sum = 0.0;
    for (double c : counts[static_cast<std::size_t>(r - 1)]) sum += c;
    const double observed = sum / spec.replicates / ell;
    const double predicted = predicted_spectrum(beta, r, ell) / ell;
    const double band =
        tolerance(spec, "c7_band_r" + std::to_string(r),
                  std::min(0.5, 0.25 + 0.05 * (r - 1)));
    const bool ok = std::fabs(observed / predicted - 1.0) <= band;
    push_item(v, "spectrum_ratio_r" + std::to_string(r), observed / predicted, ok,
              "band ±" + std::to_string(band));
    nlohmann::json row;
    row["r"] = r;
    row["observed_per_ell"] = observed;
    row["predicted_per_ell"] = predicted;
    rows.push_back(std::move(row));
  }
  v.details["spectrum"] = std::move(rows);
  finalize(v);
  return v;
}

}  // namespace

TheoremCheck theorem_check_from_name(const std::string& name) {
  if (name == "T1_closed_fraction" || name == "t1") return TheoremCheck::T1_closed_fraction;
  if (name == "P2_speed_envelope" || name == "p2") return TheoremCheck::P2_speed_envelope;
  if (name == "T3_family_counts" || name == "t3") return TheoremCheck::T3_family_counts;
  if (name == "T4_partial_time" || name == "t4") return TheoremCheck::T4_partial_time;
  if (name == "C7_spectrum" || name == "c7") return TheoremCheck::C7_spectrum;
  throw ConfigError("unknown check '" + name + "'");
}

TheoremVerdict theorem_check(const ExperimentSpec& spec, TheoremCheck which) {
  check_spec(spec);
  switch (which) {
    case TheoremCheck::T1_closed_fraction: return check_t1(spec);
    case TheoremCheck::P2_speed_envelope: return check_p2(spec);
    case TheoremCheck::T3_family_counts: return ratio_check(spec, false);
    case TheoremCheck::T4_partial_time: return ratio_check(spec, true);
    case TheoremCheck::C7_spectrum: return check_c7(spec);
  }
  throw BadParameter("unknown check selector");
}

MartingaleResult martingale_diagnostic(const CoalescentMeasure& m, int n, double t,
                                       int replicates, std::uint64_t seed) {
  if (!m.is_lambda_type())
    throw BarUnsupported("the block-count martingale needs a Lambda-type measure");
  if (replicates < 1) throw ZeroReplicates("diagnostic needs at least one replicate");
  if (t < 0.0) throw BadParameter("time horizon must be nonnegative");
  auto psi = std::make_shared<const PsiEvaluator>(m);
  auto kernel = std::make_shared<const BlockRateKernel>(m, n);
  std::vector<double> values(static_cast<std::size_t>(replicates));
  parallel_for(0, replicates, 0, [&](int rep) {
    const auto g =
        simulate(m, n, 0.0, derive_seed(seed, static_cast<std::uint64_t>(n),
                                        static_cast<std::uint64_t>(rep)),
                 StopRule::until_time(t), kernel);
    // compensated block count N(t ^ tau) - n + int bar-psi(N(u)) du
    double acc = 0.0;
    double prev = 0.0;
    int b = n;
    for (const auto& ev : g.events) {
      acc += psi->psi(static_cast<double>(b), PsiVariant::Bar) * (ev.time - prev);
      prev = ev.time;
      b -= static_cast<int>(ev.merger().participants.size()) - 1;
      if (b == 1) break;
    }
    if (b > 1) acc += psi->psi(static_cast<double>(b), PsiVariant::Bar) * (t - prev);
    values[static_cast<std::size_t>(rep)] = acc + b - n;
  });
  MartingaleResult r;
  r.replicates = replicates;
  double sum = 0.0;
  for (double x : values) sum += x;
  r.mean = sum / replicates;
  double ss = 0.0;
  for (double x : values) ss += (x - r.mean) * (x - r.mean);
  if (replicates > 1) r.stderr_ = std::sqrt(ss / (replicates - 1) / replicates);
  return r;
}

}  // namespace coalsim
