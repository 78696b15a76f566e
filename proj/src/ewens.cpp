#include "coalsim/ewens.hpp"

#include <cmath>

#include "coalsim/errors.hpp"

namespace coalsim {

namespace {

void partitions_rec(int remaining, int max_part, std::vector<int>& current,
                    std::vector<std::vector<int>>& out) {
  if (remaining == 0) {
    out.push_back(current);
    return;
  }
  for (int part = std::min(remaining, max_part); part >= 1; --part) {
    current.push_back(part);
    partitions_rec(remaining - part, part, current, out);
    current.pop_back();
  }
}

}  // namespace

std::vector<std::vector<int>> integer_partitions(int n) {
  if (n < 1) throw BadParameter("partitions require n >= 1");
  if (n > 30) throw TooLarge("partition enumeration is capped at n = 30");
  std::vector<std::vector<int>> out;
  std::vector<int> current;
  partitions_rec(n, n, current, out);
  return out;
}

AlleleConfiguration partition_to_configuration(const std::vector<int>& parts, int n) {
  AlleleConfiguration a(static_cast<std::size_t>(n), 0);
  for (int p : parts) {
    if (p < 1 || p > n) throw BadConfiguration("part size outside 1..n");
    a[static_cast<std::size_t>(p) - 1] += 1;
  }
  return a;
}

double ewens_pmf(int n, double gamma, const AlleleConfiguration& a) {
  if (n < 1) throw BadParameter("sample size must be at least 1");
  if (!(gamma > 0.0)) throw BadGamma("gamma must be strictly positive");
  if (static_cast<int>(a.size()) != n)
    throw BadConfiguration("configuration vector must have length n");
  long long total = 0;
  for (int i = 1; i <= n; ++i) {
    const int ai = a[static_cast<std::size_t>(i) - 1];
    if (ai < 0) throw BadConfiguration("family counts must be nonnegative");
    total += static_cast<long long>(i) * ai;
  }
  if (total != n) throw BadConfiguration("sum of i * a_i must equal n");

  const double theta = 2.0 * gamma;
  double log_p = std::lgamma(n + 1.0);
  for (int j = 0; j < n; ++j) log_p -= std::log(theta + j);  // rising factorial
  for (int i = 1; i <= n; ++i) {
    const int ai = a[static_cast<std::size_t>(i) - 1];
    if (ai == 0) continue;
    log_p += ai * (std::log(theta) - std::log(static_cast<double>(i)));
    log_p -= std::lgamma(ai + 1.0);
  }
  return std::exp(log_p);
}

EwensDistribution ewens_distribution(int n, double gamma) {
  if (n > 30) throw TooLarge("full distribution is capped at n = 30");
  if (!(gamma > 0.0)) throw BadGamma("gamma must be strictly positive");
  EwensDistribution d;
  d.k_marginal.assign(static_cast<std::size_t>(n), 0.0);
  for (const auto& parts : integer_partitions(n)) {
    AlleleConfiguration a = partition_to_configuration(parts, n);
    const double p = ewens_pmf(n, gamma, a);
    d.k_marginal[parts.size() - 1] += p;
    d.pmf.emplace_back(std::move(a), p);
  }
  return d;
}

}  // namespace coalsim
