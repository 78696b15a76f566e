#pragma once

#include <utility>
#include <vector>

namespace coalsim {

// Allele configuration of a sample of size n: a[i-1] is the number of
// allelic families with exactly i representatives; sum_i i*a_i = n.
using AlleleConfiguration = std::vector<int>;

// All integer partitions of n, emitted as nonincreasing part lists in
// lexicographically decreasing order (n first, all-ones last).
std::vector<std::vector<int>> integer_partitions(int n);

AlleleConfiguration partition_to_configuration(const std::vector<int>& parts, int n);

// Sampling-formula probability of configuration a under mutation rate gamma
// (theta = 2*gamma exactly), computed in log space.
double ewens_pmf(int n, double gamma, const AlleleConfiguration& a);

struct EwensDistribution {
  std::vector<std::pair<AlleleConfiguration, double>> pmf;  // partition enumeration order
  std::vector<double> k_marginal;                           // P(K = k) at index k-1
};

// Full distribution over allele configurations of n (enumeration cap n = 30).
EwensDistribution ewens_distribution(int n, double gamma);

}  // namespace coalsim
