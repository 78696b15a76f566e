#include "coalsim/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "coalsim/errors.hpp"
#include "coalsim/quadrature.hpp"

namespace coalsim {

namespace {

constexpr double kMassTol = 1e-12;
constexpr double kSeriesCut = 1e-3;  // use series for the integrand when q*x below this

double lbeta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// (e^{-qx} - 1 + qx), stable for small qx
double g_std(double q, double x) {
  const double z = q * x;
  if (z < kSeriesCut) return z * z * (0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0);
  return std::expm1(-z) + z;
}

// (e^{-qx} - 1 + qx) / x^2
double h_std(double q, double x) {
  const double z = q * x;
  if (z < kSeriesCut) {
    const double q2 = q * q;
    return q2 * (0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0);
  }
  return (std::expm1(-z) + z) / (x * x);
}

// ((1-x)^q - 1 + qx) / x^2
double h_bar(double q, double x) {
  if (q * x < kSeriesCut) {
    const double c2 = q * (q - 1) / 2.0;
    const double c3 = c2 * (q - 2) / 3.0;
    const double c4 = c3 * (q - 3) / 4.0;
    const double c5 = c4 * (q - 4) / 5.0;
    return c2 - c3 * x + c4 * x * x - c5 * x * x * x;
  }
  if (x >= 1.0) return q - 1.0;
  return (std::expm1(q * std::log1p(-x)) + q * x) / (x * x);
}

void check_simplex(const SimplexPoint& p) {
  double prev = 1.0;
  double sum = 0.0;
  for (double c : p.coords) {
    if (c < 0.0 || c > prev)
      throw SimplexViolation("coordinates must be nonincreasing and in [0,1]");
    prev = c;
    sum += c;
  }
  if (sum > 1.0 + kMassTol) throw SimplexViolation("coordinate sum exceeds 1");
}

void check_known_keys(const nlohmann::json& raw, std::initializer_list<const char*> allowed) {
  for (auto it = raw.begin(); it != raw.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw ConfigError("unknown measure key '" + it.key() + "'");
  }
}

}  // namespace

double SimplexPoint::sum() const {
  double s = 0.0;
  for (double c : coords) s += c;
  return s;
}

double SimplexPoint::sum_sq() const {
  double s = 0.0;
  for (double c : coords) s += c * c;
  return s;
}

bool SimplexPoint::is_origin() const {
  for (double c : coords)
    if (c > 0.0) return false;
  return true;
}

std::string CoalescentMeasure::family_name() const {
  switch (family) {
    case Family::Kingman: return "kingman";
    case Family::Beta: return "beta";
    case Family::BolthausenSznitman: return "bolthausen_sznitman";
    case Family::LambdaAtoms: return "lambda_atoms";
    case Family::LambdaDensity: return "lambda_density";
    case Family::XiAtoms: return "xi_atoms";
  }
  return "?";
}

CoalescentMeasure validate_measure(const nlohmann::json& raw) {
  if (!raw.is_object()) throw ConfigError("measure description must be an object");
  const std::string fam = raw.value("family", std::string("kingman"));
  CoalescentMeasure m;

  if (fam == "kingman") {
    check_known_keys(raw, {"family", "kingman_mass"});
    m.family = Family::Kingman;
    m.kingman_mass = raw.value("kingman_mass", 1.0);
    if (std::fabs(m.kingman_mass - 1.0) > kMassTol)
      throw MassViolation("pure Kingman measure requires kingman_mass = 1");
    m.kingman_mass = 1.0;
    return m;
  }

  m.kingman_mass = raw.value("kingman_mass", 0.0);
  if (m.kingman_mass < 0.0 || m.kingman_mass > 1.0)
    throw MassViolation("kingman_mass outside [0,1]");

  if (fam == "beta") {
    check_known_keys(raw, {"family", "kingman_mass", "alpha"});
    m.family = Family::Beta;
    if (!raw.contains("alpha")) throw BadParameter("beta family requires alpha");
    m.beta_alpha = raw.at("alpha").get<double>();
    if (!(m.beta_alpha > 1.0 && m.beta_alpha < 2.0))
      throw BadParameter("beta alpha must lie in (1,2)");
    if (m.kingman_mass >= 1.0) throw MassViolation("beta part has zero mass");
  } else if (fam == "bolthausen_sznitman") {
    check_known_keys(raw, {"family", "kingman_mass"});
    m.family = Family::BolthausenSznitman;
    if (m.kingman_mass >= 1.0) throw MassViolation("nontrivial part has zero mass");
  } else if (fam == "lambda_atoms") {
    check_known_keys(raw, {"family", "kingman_mass", "atoms"});
    m.family = Family::LambdaAtoms;
    if (!raw.contains("atoms") || raw.at("atoms").empty())
      throw BadParameter("lambda_atoms requires a nonempty atom list");
    double total = m.kingman_mass;
    for (const auto& a : raw.at("atoms")) {
      LambdaAtom atom{a.at("x").get<double>(), a.at("weight").get<double>()};
      if (!(atom.x > 0.0 && atom.x <= 1.0)) throw SimplexViolation("lambda atom x outside (0,1]");
      if (!(atom.weight > 0.0)) throw BadParameter("atom weights must be strictly positive");
      total += atom.weight;
      m.lambda_atoms.push_back(atom);
    }
    if (std::fabs(total - 1.0) > kMassTol) throw MassViolation("total mass differs from 1");
    std::sort(m.lambda_atoms.begin(), m.lambda_atoms.end(),
              [](const LambdaAtom& a, const LambdaAtom& b) { return a.x < b.x; });
    std::vector<LambdaAtom> merged;
    for (const auto& a : m.lambda_atoms) {
      if (!merged.empty() && merged.back().x == a.x)
        merged.back().weight += a.weight;
      else
        merged.push_back(a);
    }
    m.lambda_atoms = std::move(merged);
  } else if (fam == "xi_atoms") {
    check_known_keys(raw, {"family", "kingman_mass", "atoms"});
    m.family = Family::XiAtoms;
    if (!raw.contains("atoms") || raw.at("atoms").empty())
      throw BadParameter("xi_atoms requires a nonempty atom list");
    double total = m.kingman_mass;
    for (const auto& a : raw.at("atoms")) {
      XiAtom atom;
      atom.point.coords = a.at("point").get<std::vector<double>>();
      atom.weight = a.at("weight").get<double>();
      check_simplex(atom.point);
      if (atom.point.is_origin())
        throw SimplexViolation("xi atom at the origin: fold it into kingman_mass");
      if (!(atom.weight > 0.0)) throw BadParameter("atom weights must be strictly positive");
      total += atom.weight;
      m.xi_atoms.push_back(std::move(atom));
    }
    if (std::fabs(total - 1.0) > kMassTol) throw MassViolation("total mass differs from 1");
    std::sort(m.xi_atoms.begin(), m.xi_atoms.end(),
              [](const XiAtom& a, const XiAtom& b) { return a.point.coords > b.point.coords; });
    std::vector<XiAtom> merged;
    for (auto& a : m.xi_atoms) {
      if (!merged.empty() && merged.back().point.coords == a.point.coords)
        merged.back().weight += a.weight;
      else
        merged.push_back(std::move(a));
    }
    m.xi_atoms = std::move(merged);
  } else if (fam == "lambda_density") {
    check_known_keys(raw, {"family", "kingman_mass", "x", "density"});
    m.family = Family::LambdaDensity;
    m.density_x = raw.at("x").get<std::vector<double>>();
    m.density_f = raw.at("density").get<std::vector<double>>();
    if (m.density_x.size() != m.density_f.size() || m.density_x.size() < 2)
      throw BadParameter("density table needs matching x/density arrays of length >= 2");
    double prev = 0.0;
    for (double x : m.density_x) {
      if (x <= prev || x > 1.0) throw BadParameter("density x values must increase within (0,1]");
      prev = x;
    }
    double mass = 0.0;
    for (std::size_t i = 0; i + 1 < m.density_x.size(); ++i) {
      if (m.density_f[i] < 0.0) throw BadParameter("density values must be nonnegative");
      mass += 0.5 * (m.density_f[i] + m.density_f[i + 1]) * (m.density_x[i + 1] - m.density_x[i]);
    }
    if (m.density_f.back() < 0.0) throw BadParameter("density values must be nonnegative");
    if (!(mass > 0.0)) throw MassViolation("density table has zero mass");
    if (m.kingman_mass >= 1.0) throw MassViolation("nontrivial part has zero mass");
    const double scale = m.nontrivial_mass() / mass;
    for (double& f : m.density_f) f *= scale;
  } else {
    throw ConfigError("unknown measure family '" + fam + "'");
  }
  return m;
}

CoalescentMeasure parse_measure_string(const std::string& text) {
  nlohmann::json j;
  std::string body = text;
  const auto bar = text.find('|');
  if (bar != std::string::npos) {
    const std::string head = text.substr(0, bar);
    body = text.substr(bar + 1);
    const auto eq = head.find('=');
    const std::string key = eq == std::string::npos ? head : head.substr(0, eq);
    if (key != "km" && key != "kingman_mass")
      throw ConfigError("measure prefix must be kingman_mass=<mass>");
    j["kingman_mass"] = std::stod(head.substr(eq + 1));
  }
  const auto colon = body.find(':');
  const std::string fam = body.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : body.substr(colon + 1);
  if (fam == "kingman") {
    j["family"] = "kingman";
  } else if (fam == "bs" || fam == "bolthausen_sznitman") {
    j["family"] = "bolthausen_sznitman";
  } else if (fam == "beta") {
    j["family"] = "beta";
    if (args.empty()) throw ConfigError("beta measure needs an alpha, e.g. beta:1.5");
    j["alpha"] = std::stod(args);
  } else if (fam == "lambda_atoms") {
    j["family"] = "lambda_atoms";
    auto atoms = nlohmann::json::array();
    std::stringstream ss(args);
    std::string pair;
    while (std::getline(ss, pair, ';')) {
      const auto comma = pair.find(',');
      if (comma == std::string::npos) throw ConfigError("lambda_atoms expects x,w pairs");
      atoms.push_back({{"x", std::stod(pair.substr(0, comma))},
                       {"weight", std::stod(pair.substr(comma + 1))}});
    }
    j["atoms"] = atoms;
  } else {
    throw ConfigError("unknown measure shorthand '" + fam + "'");
  }
  return validate_measure(j);
}

nlohmann::json measure_to_json(const CoalescentMeasure& m) {
  nlohmann::json j;
  j["family"] = m.family_name();
  j["kingman_mass"] = m.kingman_mass;
  switch (m.family) {
    case Family::Beta:
      j["alpha"] = m.beta_alpha;
      break;
    case Family::LambdaAtoms: {
      auto atoms = nlohmann::json::array();
      for (const auto& a : m.lambda_atoms) atoms.push_back({{"x", a.x}, {"weight", a.weight}});
      j["atoms"] = atoms;
      break;
    }
    case Family::XiAtoms: {
      auto atoms = nlohmann::json::array();
      for (const auto& a : m.xi_atoms)
        atoms.push_back({{"point", a.point.coords}, {"weight", a.weight}});
      j["atoms"] = atoms;
      break;
    }
    case Family::LambdaDensity:
      j["x"] = m.density_x;
      j["density"] = m.density_f;
      break;
    default:
      break;
  }
  return j;
}

// ---------------------------------------------------------------------------
// PsiEvaluator

PsiEvaluator::PsiEvaluator(CoalescentMeasure m, double quadrature_rel_tol)
    : m_(std::move(m)), rel_tol_(quadrature_rel_tol) {}

double PsiEvaluator::psi(double q, PsiVariant variant) const {
  if (q < 0.0) throw BadParameter("psi requires q >= 0");
  if (variant == PsiVariant::Bar && !m_.is_lambda_type())
    throw BarUnsupported("bar variant is defined for Lambda-type measures only");
  if (q == 0.0) return 0.0;
  auto& cache = variant == PsiVariant::Standard ? cache_ : bar_cache_;
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto it = cache.find(q);
    if (it != cache.end()) return it->second;
  }
  const double value = evaluate(q, variant);
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    cache.emplace(q, value);
  }
  return value;
}

double PsiEvaluator::evaluate(double q, PsiVariant variant) const {
  const bool bar = variant == PsiVariant::Bar;
  // origin atom: analytic limit q^2/2, block-jump form q(q-1)/2
  double result = m_.kingman_mass * (bar ? q * (q - 1.0) / 2.0 : q * q / 2.0);
  const auto integrand = [&](double x) { return bar ? h_bar(q, x) : h_std(q, x); };

  switch (m_.family) {
    case Family::Kingman:
      break;
    case Family::LambdaAtoms:
      for (const auto& a : m_.lambda_atoms) result += a.weight * integrand(a.x);
      break;
    case Family::XiAtoms:
      for (const auto& a : m_.xi_atoms) {
        double num = 0.0;
        for (double x : a.point.coords) num += g_std(q, x);
        result += a.weight * num / a.point.sum_sq();
      }
      break;
    case Family::Beta: {
      const double alpha = m_.beta_alpha;
      const double norm = m_.nontrivial_mass() / std::exp(lbeta(2.0 - alpha, alpha));
      // left half, substitution u = x^{2-alpha}: weight (1-x)^{alpha-1} du
      {
        const double p = 2.0 - alpha;
        const double u_hi = std::pow(0.5, p);
        const double x_min = std::min(0.5, kSeriesCut / q);
        const double u_min = std::pow(x_min, p);
        auto f = [&](double u) {
          const double x = std::pow(u, 1.0 / p);
          return integrand(x) * std::pow(1.0 - x, alpha - 1.0);
        };
        std::vector<double> pts{0.0, std::min(u_min, u_hi)};
        if (u_min < u_hi) {
          auto geo = geometric_panels(u_min, u_hi, 8.0);
          pts.insert(pts.end(), geo.begin() + 1, geo.end());
        }
        result += norm / p * gk_panels(f, pts, rel_tol_);
      }
      // right half, substitution w = (1-x)^alpha: weight x^{1-alpha} dw
      {
        const double w_hi = std::pow(0.5, alpha);
        auto f = [&](double w) {
          const double x = 1.0 - std::pow(w, 1.0 / alpha);
          return integrand(x) * std::pow(x, 1.0 - alpha);
        };
        result += norm / alpha * gk_adaptive(f, 0.0, w_hi, rel_tol_);
      }
      break;
    }
    case Family::BolthausenSznitman:
    case Family::LambdaDensity: {
      std::function<double(double)> dens;
      double lo = 0.0, hi = 1.0;
      if (m_.family == Family::BolthausenSznitman) {
        const double mass = m_.nontrivial_mass();
        dens = [mass](double) { return mass; };
      } else {
        lo = m_.density_x.front();
        hi = m_.density_x.back();
        dens = [this](double x) {
          const auto& xs = m_.density_x;
          const auto& fs = m_.density_f;
          auto it = std::upper_bound(xs.begin(), xs.end(), x);
          if (it == xs.begin() || it == xs.end()) return it == xs.end() && x == xs.back() ? fs.back() : 0.0;
          const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
          const double t = (x - xs[i]) / (xs[i + 1] - xs[i]);
          return fs[i] + t * (fs[i + 1] - fs[i]);
        };
      }
      auto f = [&](double x) { return integrand(x) * dens(x); };
      const double x_min = std::min(hi, std::max(lo, kSeriesCut / q));
      std::vector<double> pts{lo};
      if (x_min > lo) pts.push_back(x_min);
      if (x_min < hi) {
        auto geo = geometric_panels(std::max(x_min, 1e-300), hi, 8.0);
        pts.insert(pts.end(), geo.begin() + 1, geo.end());
      }
      if (m_.family == Family::LambdaDensity) {
        pts.insert(pts.end(), m_.density_x.begin(), m_.density_x.end());
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
      }
      result += gk_panels(f, pts, rel_tol_);
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Regularity integral

RegularityResult regularity_integral(const CoalescentMeasure& m) {
  RegularityResult r;
  switch (m.family) {
    case Family::Kingman:
      r.value = 0.0;  // ratio interpreted as 0 at the origin
      break;
    case Family::XiAtoms:
      for (const auto& a : m.xi_atoms) {
        const double s = a.point.sum();
        r.value += a.weight * s * s / a.point.sum_sq();
      }
      if (!std::isfinite(r.value) || r.value > 1e300) r.finite = false;
      break;
    default:
      // one-coordinate points: ratio is identically 1 off the origin
      r.value = m.nontrivial_mass();
      break;
  }
  return r;
}

// ---------------------------------------------------------------------------
// BlockRateKernel

BlockRateKernel::BlockRateKernel(CoalescentMeasure m, int n_max)
    : m_(std::move(m)), n_max_(n_max) {
  if (!m_.is_lambda_type())
    throw UnsupportedMeasure("block rates are defined for Lambda-type measures only");
  if (n_max_ < 1) throw BadParameter("n_max must be positive");
  lgamma_.resize(static_cast<std::size_t>(n_max_) + 3);
  for (std::size_t i = 1; i < lgamma_.size(); ++i)
    lgamma_[i] = std::lgamma(static_cast<double>(i));
  total_cache_.assign(static_cast<std::size_t>(n_max_) + 1,
                      std::numeric_limits<double>::quiet_NaN());
}

template <typename Visit>
void BlockRateKernel::visit_terms(int b, Visit&& visit) const {
  const double bd = static_cast<double>(b);
  const double pairs = bd * (bd - 1.0) / 2.0;
  const double mass = m_.nontrivial_mass();
  auto lchoose = [&](int k) { return lgamma_[b + 1] - lgamma_[k + 1] - lgamma_[b - k + 1]; };

  switch (m_.family) {
    case Family::Kingman:
      visit(2, m_.kingman_mass * pairs);
      return;
    case Family::Beta: {
      const double alpha = m_.beta_alpha;
      const double lnorm = std::log(mass) - lbeta(2.0 - alpha, alpha);
      double term = std::exp(lnorm + lchoose(2) + lbeta(2.0 - alpha, bd - 2.0 + alpha));
      for (int k = 2; k <= b; ++k) {
        double t = term;
        if (k == 2) t += m_.kingman_mass * pairs;
        if (!visit(k, t)) return;
        if (k < b)
          term *= (bd - k) / (k + 1.0) * (k - alpha) / (bd - k - 1.0 + alpha);
      }
      return;
    }
    case Family::BolthausenSznitman: {
      for (int k = 2; k <= b; ++k) {
        double t = mass * bd / (static_cast<double>(k) * (k - 1.0));
        if (k == 2) t += m_.kingman_mass * pairs;
        if (!visit(k, t)) return;
      }
      return;
    }
    case Family::LambdaAtoms: {
      for (int k = 2; k <= b; ++k) {
        double t = 0.0;
        for (const auto& a : m_.lambda_atoms) {
          if (a.x >= 1.0) {
            if (k == b) t += a.weight;
            continue;
          }
          t += a.weight * std::exp(lchoose(k) + (k - 2.0) * std::log(a.x) +
                                   (bd - k) * std::log1p(-a.x));
        }
        if (k == 2) t += m_.kingman_mass * pairs;
        if (!visit(k, t)) return;
      }
      return;
    }
    case Family::LambdaDensity: {
      for (int k = 2; k <= b; ++k) {
        double t = std::exp(lchoose(k)) * lambda_bk(b, k);
        if (!visit(k, t)) return;
      }
      return;
    }
    default:
      return;
  }
}

double BlockRateKernel::total_rate(int b) const {
  if (b < 2) return 0.0;
  if (b > n_max_) throw BadParameter("block count exceeds kernel n_max");
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    const double c = total_cache_[static_cast<std::size_t>(b)];
    if (!std::isnan(c)) return c;
  }
  double total = 0.0;
  visit_terms(b, [&](int, double t) {
    total += t;
    return true;
  });
  if (!std::isfinite(total) || total > 1e290)
    throw RateOverflow("total merger rate exceeds representable range");
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    total_cache_[static_cast<std::size_t>(b)] = total;
  }
  return total;
}

int BlockRateKernel::sample_k(int b, double u) const {
  const double target = u * total_rate(b);
  double cum = 0.0;
  int chosen = b;
  visit_terms(b, [&](int k, double t) {
    cum += t;
    if (cum >= target) {
      chosen = k;
      return false;
    }
    return true;
  });
  return chosen;
}

double BlockRateKernel::lambda_bk(int b, int k) const {
  if (k < 2 || k > b) throw BadParameter("k must lie in [2, b]");
  const double bd = static_cast<double>(b);
  const double mass = m_.nontrivial_mass();
  double v = k == 2 ? m_.kingman_mass : 0.0;
  switch (m_.family) {
    case Family::Kingman:
      break;
    case Family::Beta: {
      const double alpha = m_.beta_alpha;
      v += mass * std::exp(lbeta(k - alpha, bd - k + alpha) - lbeta(2.0 - alpha, alpha));
      break;
    }
    case Family::BolthausenSznitman:
      v += mass * std::exp(lgamma_[k - 1] + lgamma_[b - k + 1] - lgamma_[b]);
      break;
    case Family::LambdaAtoms:
      for (const auto& a : m_.lambda_atoms) {
        if (a.x >= 1.0) {
          if (k == b) v += a.weight;
        } else {
          v += a.weight *
               std::exp((k - 2.0) * std::log(a.x) + (bd - k) * std::log1p(-a.x));
        }
      }
      break;
    case Family::LambdaDensity: {
      const auto& xs = m_.density_x;
      const auto& fs = m_.density_f;
      auto f = [&](double x) {
        auto it = std::upper_bound(xs.begin(), xs.end(), x);
        if (it == xs.begin() || it == xs.end()) return 0.0;
        const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
        const double t = (x - xs[i]) / (xs[i + 1] - xs[i]);
        const double dens = fs[i] + t * (fs[i + 1] - fs[i]);
        return std::exp((k - 2.0) * std::log(x) + (bd - k) * std::log1p(-std::min(x, 1.0 - 1e-16))) * dens;
      };
      std::vector<double> pts(xs.begin(), xs.end());
      v += gk_panels(f, pts, 1e-10);
      break;
    }
    default:
      throw UnsupportedMeasure("block rates are defined for Lambda-type measures only");
  }
  return v;
}

MergerRates merger_rates(const CoalescentMeasure& m, int b) {
  if (b < 2) throw BadParameter("merger rates need b >= 2");
  BlockRateKernel kernel(m, b);
  MergerRates r;
  r.b = b;
  r.lambda_bk.reserve(static_cast<std::size_t>(b) - 1);
  for (int k = 2; k <= b; ++k) r.lambda_bk.push_back(kernel.lambda_bk(b, k));
  r.total = kernel.total_rate(b);
  return r;
}

}  // namespace coalsim
