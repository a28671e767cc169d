#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace swjd {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
};

struct EstimatorResult {
  double estimate = 0.0;
  double std_error = 0.0;
  Interval ci95;
  std::size_t n_paths = 0;
  std::size_t n_censored = 0;
};

/// Sample mean with a normal 95% interval. Summation is pairwise in index order.
EstimatorResult mean_estimate(std::span<const double> values, std::size_t n_censored = 0);

/// Success fraction with the two-sided 95% Clopper-Pearson interval.
EstimatorResult proportion_estimate(std::size_t successes, std::size_t n, std::size_t n_censored = 0);

/// Exact binomial bounds at confidence `level`.
Interval clopper_pearson(std::size_t successes, std::size_t n, double level = 0.95);
/// One-sided lower bound: P(p >= bound) = level.
double clopper_pearson_lower(std::size_t successes, std::size_t n, double level = 0.95);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int dof = 0;
};

/// Two-sample Kolmogorov-Smirnov with the asymptotic Kolmogorov distribution.
TestResult ks_two_sample(std::vector<double> a, std::vector<double> b);
/// Survival function of the Kolmogorov distribution, P(K > x).
double kolmogorov_sf(double x);

/// Chi-square homogeneity of two count vectors over the same categories.
/// Categories whose pooled expected count falls below `min_expected` are merged.
TestResult chi_square_homogeneity(const std::vector<double>& a, const std::vector<double>& b,
                                  double min_expected = 5.0);

/// Half the L1 distance between two histograms, each normalized to mass 1.
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace swjd
