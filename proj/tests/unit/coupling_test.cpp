#include "swjd/coupling.hpp"
#include "swjd/examples.hpp"
#include "swjd/parallel.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace swjd;

namespace {

Vector v1(double a) { return make_vector({a}); }

CouplingConfig basic_config(double h = 1e-2, double t = 1.0) {
  CouplingConfig cfg;
  cfg.integrator.step = h;
  cfg.integrator.horizon = t;
  cfg.integrator.record_stride = 0;
  cfg.integrator.record_events = false;
  return cfg;
}

CouplingConfig reflection_config(double h = 1e-2, double t = 1.0) {
  CouplingConfig cfg = basic_config(h, t);
  cfg.kind = CouplingKind::reflection;
  return cfg;
}

ModelSpec constant_switching() {
  ModelSpec m = brownian_model(1);
  m.rates.rate = [](const Vector&, int k, int l) { return l == k ? 0.0 : std::pow(2.0, -l); };
  m.rates.tail_bound = [](int, int L) { return std::pow(2.0, -L); };
  m.rates.state_independent = true;
  return m;
}

}  // namespace

TEST(SqrtPsd, Identity) {
  const PsdSqrt r = sqrt_psd(Matrix::Identity(3, 3));
  EXPECT_LT((r.root - Matrix::Identity(3, 3)).norm(), 1e-15);
  EXPECT_FALSE(r.clamped);
}

TEST(SqrtPsd, Example51ReducedRoot) {
  const ModelSpec m = example51();
  const CoupledScheme cs(m, reflection_config());
  for (double x : {-3.0, -0.2, 0.0, 0.4, 8.0}) {
    const double ax = std::pow(std::abs(x), 2.0 / 3.0);
    EXPECT_NEAR(cs.reduced_root(v1(x), 1).root(0, 0), std::sqrt(ax * ax + 2.0 * ax), 1e-12);
  }
}

TEST(SqrtPsd, RandomPsdSquares) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 4;
    Matrix B(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) B(i, j) = rng.normal();
    const Matrix M = B * B.transpose();
    const Matrix S = sqrt_psd(M).root;
    EXPECT_LE((S * S - M).norm(), 1e-8 * (1.0 + M.norm()));
    EXPECT_LE((S - S.transpose()).norm(), 1e-14 * (1.0 + S.norm()));
  }
}

TEST(SqrtPsd, ClampsAndRejects) {
  Matrix a = Matrix::Identity(2, 2);
  a(1, 1) = -1e-8;
  const PsdSqrt r = sqrt_psd(a);
  EXPECT_TRUE(r.clamped);
  EXPECT_EQ(r.root(1, 1), 0.0);
  a(1, 1) = -1e-3;
  EXPECT_THROW(sqrt_psd(a), NumericError);
}

TEST(Reflection, MatrixIsOrthogonalInvolution) {
  Rng rng(8);
  for (int d = 1; d <= 5; ++d) {
    Vector u(d);
    for (int i = 0; i < d; ++i) u(i) = rng.normal();
    u /= u.norm();
    const Matrix P = reflection_matrix(u);
    EXPECT_LT((P - P.transpose()).norm(), 1e-15);
    EXPECT_LT((P * P - Matrix::Identity(d, d)).norm(), 1e-14);
  }
  EXPECT_EQ(reflection_matrix(v1(1.0))(0, 0), -1.0);
}

TEST(Reflection, LambdaAboveFloorRejected) {
  CouplingConfig cfg = reflection_config();
  cfg.lambda_R = 2.0;
  EXPECT_THROW(CoupledScheme(example51(), cfg), InvalidInput);
  EXPECT_THROW(CoupledScheme(zero_model(1), reflection_config()), InvalidInput);
}

TEST(Basic, IdenticalStartsStayTogether) {
  CouplingConfig cfg = basic_config();
  cfg.integrator.record_stride = 1;
  const CoupledPathRecord r = couple_basic(example51(), HybridState(v1(0.3), 1), HybridState(v1(0.3), 1), cfg, 4);
  for (double d : r.distance) EXPECT_EQ(d, 0.0);
  EXPECT_FALSE(r.marks.zeta);
  for (std::size_t i = 0; i < r.first.size(); ++i) EXPECT_EQ(r.first[i], r.second[i]);
}

TEST(Basic, StateIndependentRatesNeverSplit) {
  const ModelSpec m = constant_switching();
  const CoupledScheme cs(m, basic_config(1e-2, 5.0));
  const SwitchRates s = cs.switch_rates(v1(0.0), 1, v1(2.0), 1);
  EXPECT_EQ(s.first_only, 0.0);
  EXPECT_EQ(s.second_only, 0.0);
  EXPECT_GT(s.joint, 0.0);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    EXPECT_FALSE(couple(cs, HybridState(v1(0.0), 1), HybridState(v1(2.0), 1), seed).marks.zeta);
  }
}

TEST(Basic, StartRegimesMustAgree) {
  EXPECT_THROW(couple_basic(example51(), HybridState(v1(0.0), 1), HybridState(v1(0.0), 2), basic_config(), 1),
               InvalidInput);
}

TEST(Basic, SyncCouplingOfDriftlessBrownianKeepsGap) {
  const CoupledPathRecord r =
      couple_basic(brownian_model(2), HybridState(make_vector({0.0, 0.0}), 1), HybridState(make_vector({0.5, 0.0}), 1),
                   basic_config(), 9);
  EXPECT_NEAR(r.distance.back(), 0.5, 1e-12);
}

TEST(Reflection, IdenticalStartsCoalescedAtZero) {
  const CoupledPathRecord r =
      couple_reflection(example51(), HybridState(v1(0.2), 1), HybridState(v1(0.2), 1), reflection_config(), 2);
  EXPECT_TRUE(r.coalesced);
  EXPECT_EQ(*r.marks.T, 0.0);
  EXPECT_EQ(r.terminal_first, r.terminal_second);
}

TEST(Reflection, MergedPathsStayIdentical) {
  CouplingConfig cfg = reflection_config(1e-2, 2.0);
  cfg.integrator.record_stride = 1;
  const ModelSpec m = example51();
  int merged = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const CoupledPathRecord r = couple_reflection(m, HybridState(v1(0.0), 1), HybridState(v1(0.05), 1), cfg, seed);
    if (!r.marks.T_tilde) continue;
    ++merged;
    for (std::size_t i = 0; i < r.times.size(); ++i) {
      if (r.times[i] >= *r.marks.T_tilde) EXPECT_EQ(r.first[i], r.second[i]);
    }
  }
  EXPECT_GT(merged, 20);
}

TEST(Reflection, MirrorBrownianHittingTime) {
  // d = 1, sigma = 1, lambda = 1: X~ - X = 0.5 - 2W, so P(T > t) = 2 Phi(0.25 / sqrt t) - 1.
  const ModelSpec m = brownian_model(1);
  const CoupledScheme cs(m, reflection_config(1e-2, 1.0));
  const std::size_t n = 20000;
  const auto survived = parallel_map<double>(n, [&](std::size_t i) {
    const CoupledPathRecord r = couple(cs, HybridState(v1(0.0), 1), HybridState(v1(0.5), 1), derive_seed(21, i));
    return r.marks.T ? 0.0 : 1.0;
  });
  const double p = pairwise_sum(survived) / n;
  const double exact = std::erf(0.25 / std::sqrt(2.0));
  EXPECT_NEAR(p, exact, 4.0 * std::sqrt(exact * (1 - exact) / n));
}

TEST(Reflection, CrossCovarianceMatchesGHat) {
  const ModelSpec m = example52();
  const CoupledScheme cs(m, reflection_config());
  const Vector x = make_vector({0.5, -0.2});
  const Vector z = make_vector({0.8, 0.1});
  const double h = 1e-3;
  const Matrix g = cs.reflection_cross_covariance(x, 2, z, 2) * h;
  Rng rng(17);
  const int n = 40000;
  Matrix acc = Matrix::Zero(2, 2), acc2 = Matrix::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const auto [dx, dz] = reflection_noise_increment(cs, x, 2, z, 2, h, rng);
    const Matrix p = dx * dz.transpose();
    acc += p;
    acc2 += p.cwiseProduct(p);
  }
  const Matrix mean = acc / n;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double se = std::sqrt((acc2(a, b) / n - mean(a, b) * mean(a, b)) / n);
      EXPECT_LE(std::abs(mean(a, b) - g(a, b)), 4.0 * se) << a << "," << b;
    }
}

TEST(Basic, MarginalMeanMatchesSinglePath) {
  const ModelSpec m = example51();
  const CouplingConfig cfg = basic_config();
  const CoupledScheme cs(m, cfg);
  const EulerScheme single(m, cfg.integrator);
  const std::size_t n = 10000;
  const auto coupled = parallel_map<double>(n, [&](std::size_t i) {
    return couple(cs, HybridState(v1(0.0), 1), HybridState(v1(0.4), 1), derive_seed(1, i)).terminal_second.x(0);
  });
  const auto plain = parallel_map<double>(
      n, [&](std::size_t i) { return simulate_path(single, HybridState(v1(0.4), 1), derive_seed(2, i)).terminal.x(0); });
  auto stats = [](const std::vector<double>& v) {
    double s = 0, s2 = 0;
    for (double a : v) {
      s += a;
      s2 += a * a;
    }
    const double mean = s / v.size();
    return std::pair{mean, std::sqrt((s2 / v.size() - mean * mean) / v.size())};
  };
  const auto [m1, se1] = stats(coupled);
  const auto [m2, se2] = stats(plain);
  EXPECT_LE(std::abs(m1 - m2), 4.0 * std::hypot(se1, se2));
}
