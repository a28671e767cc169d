#include "swjd/stats.hpp"

#include "swjd/parallel.hpp"
#include "swjd/types.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>

namespace swjd {

EstimatorResult mean_estimate(std::span<const double> values, std::size_t n_censored) {
  const std::size_t n = values.size();
  if (n == 0) throw NumericError("no uncensored samples to average");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double mean = *lo == *hi ? *lo : pairwise_sum(values) / static_cast<double>(n);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (values[i] - mean) * (values[i] - mean);
  const double var = n > 1 ? pairwise_sum(sq) / static_cast<double>(n - 1) : 0.0;
  EstimatorResult r;
  r.estimate = mean;
  r.std_error = std::sqrt(var / static_cast<double>(n));
  r.ci95 = {mean - 1.96 * r.std_error, mean + 1.96 * r.std_error};
  r.n_paths = n + n_censored;
  r.n_censored = n_censored;
  return r;
}

EstimatorResult proportion_estimate(std::size_t successes, std::size_t n, std::size_t n_censored) {
  require(n > 0, "proportion of zero trials");
  require(successes <= n, "more successes than trials");
  EstimatorResult r;
  const double p = static_cast<double>(successes) / static_cast<double>(n);
  r.estimate = p;
  r.std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  r.ci95 = clopper_pearson(successes, n);
  r.n_paths = n;
  r.n_censored = n_censored;
  return r;
}

Interval clopper_pearson(std::size_t successes, std::size_t n, double level) {
  require(n > 0 && successes <= n, "invalid binomial counts");
  require(level > 0.0 && level < 1.0, "confidence level must be in (0, 1)");
  const double a = (1.0 - level) / 2.0;
  const double k = static_cast<double>(successes);
  const double nn = static_cast<double>(n);
  Interval iv;
  iv.lo = successes == 0 ? 0.0 : boost::math::ibeta_inv(k, nn - k + 1.0, a);
  iv.hi = successes == n ? 1.0 : boost::math::ibeta_inv(k + 1.0, nn - k, 1.0 - a);
  return iv;
}

double clopper_pearson_lower(std::size_t successes, std::size_t n, double level) {
  require(n > 0 && successes <= n, "invalid binomial counts");
  require(level > 0.0 && level < 1.0, "confidence level must be in (0, 1)");
  if (successes == 0) return 0.0;
  const double k = static_cast<double>(successes);
  return boost::math::ibeta_inv(k, static_cast<double>(n) - k + 1.0, 1.0 - level);
}

double kolmogorov_sf(double x) {
  if (x < 0.2) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * x * x);
    sum += (j % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), "KS test needs two nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  TestResult r;
  r.statistic = d;
  r.p_value = kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d);
  return r;
}

TestResult chi_square_homogeneity(const std::vector<double>& a, const std::vector<double>& b,
                                  double min_expected) {
  require(a.size() == b.size(), "count vectors differ in length");
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(a[i] >= 0.0 && b[i] >= 0.0, "negative count");
    na += a[i];
    nb += b[i];
  }
  require(na > 0.0 && nb > 0.0, "chi-square test needs nonempty samples");
  const double share = std::min(na, nb) / (na + nb);

  std::vector<std::pair<double, double>> cells;
  std::pair<double, double> pooled{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] + b[i]) * share >= min_expected) {
      cells.emplace_back(a[i], b[i]);
    } else {
      pooled.first += a[i];
      pooled.second += b[i];
    }
  }
  if (pooled.first + pooled.second > 0.0) {
    if ((pooled.first + pooled.second) * share >= min_expected || cells.empty()) {
      cells.push_back(pooled);
    } else {
      auto big = std::max_element(cells.begin(), cells.end(), [](const auto& x, const auto& y) {
        return x.first + x.second < y.first + y.second;
      });
      big->first += pooled.first;
      big->second += pooled.second;
    }
  }

  TestResult r;
  r.dof = static_cast<int>(cells.size()) - 1;
  if (r.dof < 1) return r;
  for (const auto& [ca, cb] : cells) {
    const double tot = ca + cb;
    const double ea = na * tot / (na + nb);
    const double eb = nb * tot / (na + nb);
    r.statistic += (ca - ea) * (ca - ea) / ea + (cb - eb) * (cb - eb) / eb;
  }
  r.p_value = boost::math::gamma_q(0.5 * r.dof, 0.5 * r.statistic);
  return r;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  require(p.size() == q.size(), "histograms differ in length");
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sp += p[i];
    sq += q[i];
  }
  require(sp > 0.0 && sq > 0.0, "empty histogram");
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] / sp - q[i] / sq);
  return 0.5 * tv;
}

}  // namespace swjd
