#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "coalsim/errors.hpp"
#include "coalsim/ewens.hpp"
#include "coalsim/experiments.hpp"
#include "coalsim/measures.hpp"
#include "coalsim/simulator.hpp"
#include "coalsim/speed.hpp"
#include "coalsim/statistics.hpp"

namespace {

constexpr const char* kVersion = "coalsim 0.1.0";

using coalsim::CoalescentMeasure;

struct Output {
  std::ofstream file;
  std::ostream* os = &std::cout;

  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file.open(path);
      if (!file) throw coalsim::ConfigError("cannot open output file '" + path + "'");
      os = &file;
    }
  }
  std::ostream& stream() { return *os; }
};

// every text output starts with the artifact version and the resolved config
void write_header(std::ostream& os, const nlohmann::json& config) {
  os << "# " << kVersion << "\n";
  os << "# config: " << config.dump() << "\n";
}

CoalescentMeasure resolve_measure(const std::string& shorthand, const std::string& file) {
  if (!shorthand.empty() && !file.empty())
    throw coalsim::ConfigError("give either --measure or --measure-file, not both");
  if (!shorthand.empty()) return coalsim::parse_measure_string(shorthand);
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw coalsim::ConfigError("cannot open measure file '" + file + "'");
    nlohmann::json j;
    in >> j;
    return coalsim::validate_measure(j);
  }
  throw coalsim::ConfigError("a measure is required (--measure or --measure-file)");
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw coalsim::ConfigError("cannot open file '" + path + "'");
  nlohmann::json j;
  in >> j;
  return j;
}

void emit_families(std::ostream& os, const coalsim::MarkedGenealogy& g) {
  os << "kind,id,size,leaves\n";
  for (const auto& fam : coalsim::sites_families(g)) {
    os << "site," << fam.mutation_id << ',' << fam.leaves.size() << ",\"";
    for (std::size_t i = 0; i < fam.leaves.size(); ++i)
      os << (i ? " " : "") << fam.leaves[i];
    os << "\"\n";
  }
  for (const auto& blk : coalsim::alleles_partition(g)) {
    os << "allele," << blk.mutation_id << ',' << blk.leaves.size() << ",\"";
    for (std::size_t i = 0; i < blk.leaves.size(); ++i)
      os << (i ? " " : "") << blk.leaves[i];
    os << "\"\n";
  }
  const auto sc = coalsim::spectrum_counts(g);
  for (const auto& [r, c] : sc.sites) os << "spectrum_sites," << r << ',' << c << ",\n";
  for (const auto& [r, c] : sc.alleles) os << "spectrum_alleles," << r << ',' << c << ",\n";
}

int dispatch(int argc, char** argv) {
  CLI::App app{"coalescent genealogy simulator and asymptotics checker"};
  app.require_subcommand(1);

  std::string measure_str, measure_file, out_path, spec_file, import_path, export_path;
  std::string stop_str = "tau", which = "t3", mode = "speed";
  std::vector<double> qs;
  double gamma = 1.0, t_max = 1.0, q_single = 0.0;
  int n = 10, points = 20, replicates = 0;
  std::uint64_t seed = 0;
  bool bar = false;

  auto* psi_cmd = app.add_subcommand("psi", "evaluate the speed generator psi(q)");
  psi_cmd->add_option("--measure", measure_str, "measure shorthand");
  psi_cmd->add_option("--measure-file", measure_file, "measure description file (JSON)");
  psi_cmd->add_option("--q", qs, "evaluation points")->required();
  psi_cmd->add_flag("--bar", bar, "block-jump variant");
  psi_cmd->add_option("--out", out_path, "output file (default stdout)");

  auto* speed_cmd = app.add_subcommand("speed", "speed table v(t), lengths, CDI verdict");
  speed_cmd->add_option("--measure", measure_str);
  speed_cmd->add_option("--measure-file", measure_file);
  speed_cmd->add_option("--n", n, "sample size")->required();
  speed_cmd->add_option("--mode", mode, "speed | ell | cdi")->default_val("speed");
  speed_cmd->add_option("--t-max", t_max, "largest t in the v(t) table");
  speed_cmd->add_option("--points", points, "table rows");
  speed_cmd->add_option("--out", out_path);

  auto* sim_cmd = app.add_subcommand("simulate", "run one genealogy");
  sim_cmd->add_option("--measure", measure_str);
  sim_cmd->add_option("--measure-file", measure_file);
  sim_cmd->add_option("--n", n)->required();
  sim_cmd->add_option("--gamma", gamma);
  sim_cmd->add_option("--seed", seed);
  sim_cmd->add_option("--stop", stop_str, "tau | tau-star | time=T | blocks=B");
  sim_cmd->add_option("--export", export_path, "genealogy output file (JSON; default stdout)");

  auto* fam_cmd = app.add_subcommand("families", "family decomposition of a genealogy");
  fam_cmd->add_option("--import", import_path, "genealogy file (JSON)")->required();
  fam_cmd->add_option("--out", out_path);

  auto* ewens_cmd = app.add_subcommand("ewens", "exact sampling-formula table");
  ewens_cmd->add_option("--n", n)->required();
  ewens_cmd->add_option("--gamma", gamma)->required();
  ewens_cmd->add_option("--out", out_path);

  auto* exp_cmd = app.add_subcommand("experiment", "Monte Carlo experiment");
  exp_cmd->add_option("--spec-file", spec_file, "experiment spec (JSON)")->required();
  exp_cmd->add_option("--out", out_path, "summary CSV");
  std::string raw_out;
  exp_cmd->add_option("--raw-out", raw_out, "per-replicate CSV");

  auto* check_cmd = app.add_subcommand("check", "limit-theorem / martingale checks");
  check_cmd->add_option("--spec-file", spec_file)->required();
  check_cmd->add_option("--which", which, "t1 | p2 | t3 | t4 | c7 | martingale")->required();
  check_cmd->add_option("--out", out_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (psi_cmd->parsed()) {
    const auto m = resolve_measure(measure_str, measure_file);
    coalsim::PsiEvaluator psi(m);
    Output out(out_path);
    nlohmann::json cfg{{"subcommand", "psi"}, {"measure", measure_to_json(m)}, {"bar", bar}};
    write_header(out.stream(), cfg);
    out.stream() << "q,psi\n";
    const auto variant = bar ? coalsim::PsiVariant::Bar : coalsim::PsiVariant::Standard;
    out.stream().precision(15);
    for (double q : qs) out.stream() << q << ',' << psi.psi(q, variant) << "\n";
    return 0;
  }

  if (speed_cmd->parsed()) {
    const auto m = resolve_measure(measure_str, measure_file);
    auto psi = std::make_shared<const coalsim::PsiEvaluator>(m);
    Output out(out_path);
    nlohmann::json cfg{{"subcommand", "speed"}, {"measure", measure_to_json(m)},
                       {"n", n},                {"mode", mode}};
    write_header(out.stream(), cfg);
    out.stream().precision(15);
    if (mode == "cdi") {
      const auto r = coalsim::comes_down_check(m);
      out.stream() << "cdi,basis\n" << coalsim::cdi_name(r.cdi) << ',' << r.basis << "\n";
    } else if (mode == "ell") {
      coalsim::SpeedSolver solver(psi, n);
      out.stream() << "n,ell\n" << n << ',' << solver.ell() << "\n";
    } else if (mode == "speed") {
      coalsim::SpeedSolver solver(psi, n);
      out.stream() << "t,v\n";
      for (int i = 0; i < points; ++i) {
        const double t = t_max * i / (points - 1 > 0 ? points - 1 : 1);
        out.stream() << t << ',' << solver.v_of_t(t) << "\n";
      }
    } else {
      throw coalsim::ConfigError("unknown mode '" + mode + "'");
    }
    return 0;
  }

  if (sim_cmd->parsed()) {
    const auto m = resolve_measure(measure_str, measure_file);
    const auto g = coalsim::simulate(m, n, gamma, seed, coalsim::parse_stop(stop_str));
    nlohmann::json j = coalsim::genealogy_to_json(g);
    j["_meta"] = {{"version", kVersion},
                  {"subcommand", "simulate"},
                  {"measure", measure_to_json(m)},
                  {"stop", stop_str}};
    Output out(export_path);
    out.stream() << j.dump(2) << "\n";
    return 0;
  }

  if (fam_cmd->parsed()) {
    const auto g = coalsim::genealogy_from_json(load_json(import_path));
    Output out(out_path);
    nlohmann::json cfg{{"subcommand", "families"}, {"import", import_path}, {"n", g.n}};
    write_header(out.stream(), cfg);
    emit_families(out.stream(), g);
    return 0;
  }

  if (ewens_cmd->parsed()) {
    const auto d = coalsim::ewens_distribution(n, gamma);
    Output out(out_path);
    nlohmann::json cfg{{"subcommand", "ewens"}, {"n", n}, {"gamma", gamma}};
    write_header(out.stream(), cfg);
    out.stream().precision(15);
    out.stream() << "configuration,probability\n";
    for (const auto& [a, p] : d.pmf)
      out.stream() << '"' << coalsim::configuration_key(a) << "\"," << p << "\n";
    out.stream() << "k,probability\n";
    for (std::size_t k = 1; k <= d.k_marginal.size(); ++k)
      out.stream() << k << ',' << d.k_marginal[k - 1] << "\n";
    return 0;
  }

  if (exp_cmd->parsed()) {
    const auto spec = coalsim::experiment_spec_from_json(load_json(spec_file));
    const auto result = coalsim::run_experiment(spec);
    Output out(out_path);
    write_header(out.stream(), coalsim::experiment_spec_to_json(spec));
    out.stream().precision(15);
    out.stream() << "n,statistic,estimate,stderr,replicates\n";
    for (const auto& nr : result.per_n) {
      if (spec.statistic == coalsim::Statistic::AllelePartitionHistogram) {
        for (const auto& [key, count] : nr.histogram)
          out.stream() << nr.n << ",\"histogram:" << key << "\"," << count << ",0,"
                       << nr.summary.replicates << "\n";
      } else {
        out.stream() << nr.n << ',' << statistic_name(spec.statistic) << ','
                     << nr.summary.estimate << ',' << nr.summary.stderr_ << ','
                     << nr.summary.replicates << "\n";
      }
    }
    if (!raw_out.empty()) {
      Output raw(raw_out);
      write_header(raw.stream(), coalsim::experiment_spec_to_json(spec));
      raw.stream().precision(15);
      raw.stream() << "n,replicate,statistic,value\n";
      for (const auto& nr : result.per_n)
        for (const auto& [rep, value] : nr.raw)
          raw.stream() << nr.n << ',' << rep << ',' << statistic_name(spec.statistic) << ','
                       << value << "\n";
    }
    return 0;
  }

  if (check_cmd->parsed()) {
    const auto spec = coalsim::experiment_spec_from_json(load_json(spec_file));
    Output out(out_path);
    auto cfg = coalsim::experiment_spec_to_json(spec);
    cfg["which"] = which;
    write_header(out.stream(), cfg);
    out.stream().precision(15);
    if (which == "martingale") {
      const double t = spec.times.empty() ? 1.0 : spec.times.front();
      const auto r = coalsim::martingale_diagnostic(spec.measure, spec.n_grid.back(), t,
                                                    spec.replicates, spec.master_seed);
      out.stream() << "mean,stderr,replicates\n"
                   << r.mean << ',' << r.stderr_ << ',' << r.replicates << "\n";
      return 0;
    }
    const auto verdict = coalsim::theorem_check(spec, coalsim::theorem_check_from_name(which));
    out.stream() << "check,value,verdict,note\n";
    for (const auto& item : verdict.items)
      out.stream() << item.name << ',' << item.value << ','
                   << (item.pass ? "pass" : "fail") << ",\"" << item.note << "\"\n";
    out.stream() << "# applicable: " << (verdict.applicable ? "yes" : "no") << "\n";
    out.stream() << "# details: " << verdict.details.dump() << "\n";
    out.stream() << (verdict.pass ? "OVERALL,1,pass," : "OVERALL,0,fail,") << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const coalsim::UnsupportedMeasure& e) {
    std::cerr << "error: UnsupportedMeasure: " << e.what() << "\n";
    return 4;
  } catch (const coalsim::BarUnsupported& e) {
    std::cerr << "error: BarUnsupported: " << e.what() << "\n";
    return 4;
  } catch (const coalsim::QuadratureFailure& e) {
    std::cerr << "error: QuadratureFailure: " << e.what() << "\n";
    return 3;
  } catch (const coalsim::RateOverflow& e) {
    std::cerr << "error: RateOverflow: " << e.what() << "\n";
    return 3;
  } catch (const coalsim::HorizonExceeded& e) {
    std::cerr << "error: HorizonExceeded: " << e.what() << "\n";
    return 3;
  } catch (const coalsim::NonTermination& e) {
    std::cerr << "error: NonTermination: " << e.what() << "\n";
    return 3;
  } catch (const coalsim::Error& e) {
    std::cerr << "error: ConfigError: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: InternalError: " << e.what() << "\n";
    return 3;
  }
}
