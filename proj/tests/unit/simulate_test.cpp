#include "swjd/examples.hpp"
#include "swjd/parallel.hpp"
#include "swjd/simulate.hpp"

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

using namespace swjd;

namespace {

Vector v1(double a) { return make_vector({a}); }

ModelSpec constant_rate_model(double c0) {
  ModelSpec m = zero_model(1);
  m.name = "constant-rate";
  m.rates.rate = [c0](const Vector&, int k, int l) { return l == k + 1 ? c0 : 0.0; };
  m.rates.row_sum = [c0](const Vector&, int) { return c0; };
  m.rates.tail_bound = [c0](int k, int L) { return L < k + 1 ? c0 : 0.0; };
  m.rates.state_independent = true;
  return m;
}

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

template <class F>
Moments mc(std::size_t n, F&& sample) {
  const std::vector<double> v = parallel_map<double>(n, sample);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = v[i] * v[i];
  Moments m;
  m.mean = pairwise_sum(v) / n;
  const double var = pairwise_sum(sq) / n - m.mean * m.mean;
  m.se = std::sqrt(std::max(var, 0.0) / (n - 1));
  return m;
}

}  // namespace

TEST(Simulate, ZeroModelStaysPut) {
  IntegratorConfig cfg;
  cfg.step = 0.01;
  cfg.horizon = 1.0;
  const PathRecord p = simulate_path(zero_model(2), HybridState(make_vector({0.3, -1.0}), 4), cfg, 1);
  ASSERT_EQ(p.states.size(), 101u);
  for (const auto& s : p.states) EXPECT_EQ(s, HybridState(make_vector({0.3, -1.0}), 4));
  EXPECT_TRUE(p.switch_events.empty());
  EXPECT_FALSE(p.exited());
}

TEST(Simulate, PureDriftFollowsOde) {
  const ModelSpec m = restrict_model(example51(), {true, false, false, false}, "drift-only");
  IntegratorConfig cfg;
  cfg.step = 1e-4;
  const PathRecord p = simulate_path(m, HybridState(v1(1.0), 1), cfg, 3);
  // Euler weak error is O(h).
  EXPECT_NEAR(p.terminal.x(0), std::exp(-0.5), 1e-4);
}

TEST(Simulate, ShortLastStepLandsOnHorizon) {
  IntegratorConfig cfg;
  cfg.step = 0.3;
  cfg.horizon = 1.0;
  EXPECT_EQ(cfg.n_steps(), 4);
  EXPECT_NEAR(cfg.step_length(3), 0.1, 1e-15);
  const PathRecord p = simulate_path(zero_model(1), HybridState(v1(0.0), 1), cfg, 1);
  EXPECT_EQ(p.times.back(), 1.0);
}

TEST(Simulate, BitReproducible) {
  IntegratorConfig cfg;
  cfg.step = 1e-3;
  const ModelSpec m = example51();
  const PathRecord a = simulate_path(m, HybridState(v1(0.0), 1), cfg, 42);
  const PathRecord b = simulate_path(m, HybridState(v1(0.0), 1), cfg, 42);
  ASSERT_EQ(a.states.size(), b.states.size());
  for (std::size_t i = 0; i < a.states.size(); ++i) EXPECT_EQ(a.states[i], b.states[i]);
  EXPECT_EQ(a.jump_events.size(), b.jump_events.size());
  EXPECT_EQ(a.neglected_variance, b.neglected_variance);
  const PathRecord c = simulate_path(m, HybridState(v1(0.0), 1), cfg, 43);
  EXPECT_NE(a.terminal.x(0), c.terminal.x(0));
}

TEST(Simulate, SwitchEventsConsistentWithStates) {
  IntegratorConfig cfg;
  cfg.step = 1e-2;
  cfg.horizon = 50.0;
  const ModelSpec m = example52();
  const PathRecord p = simulate_path(m, HybridState(make_vector({0.5, 0.5}), 1), cfg, 8);
  ASSERT_FALSE(p.switch_events.empty());
  std::size_t e = 0;
  int k = p.states.front().k;
  for (std::size_t i = 1; i < p.states.size(); ++i) {
    while (e < p.switch_events.size() && p.switch_events[e].time <= p.times[i] + 1e-12) {
      EXPECT_EQ(p.switch_events[e].from, k);
      k = p.switch_events[e].to;
      ++e;
    }
    EXPECT_EQ(p.states[i].k, k);
  }
}

TEST(Simulate, RegimeMarginalMatchesCtmc) {
  // At x = 0 with all coefficients but Q removed, rates are 1.5 * 3^-l.
  const ModelSpec m = restrict_model(example52(), {false, false, false, true}, "ctmc");
  constexpr int N = 14;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(N, N);
  const Vector origin = make_vector({0.0, 0.0});
  for (int k = 1; k <= N; ++k) {
    for (int l = 1; l <= N; ++l) Q(k - 1, l - 1) = m.rates.rate(origin, k, l);
    Q(k - 1, k - 1) = -m.rates.row_sum(origin, k);
  }
  const double t = 1.5;
  const Eigen::MatrixXd P = (Q * t).exp();

  IntegratorConfig cfg;
  cfg.step = 1e-3;
  cfg.horizon = t;
  cfg.record_stride = 0;
  cfg.record_events = false;
  const EulerScheme scheme(m, cfg);
  const std::size_t n = 40000;
  const std::vector<int> finals = parallel_map<int>(
      n, [&](std::size_t i) { return simulate_path(scheme, HybridState(origin, 1), derive_seed(9, i)).terminal.k; });
  for (int l = 1; l <= 4; ++l) {
    double hits = 0;
    for (int k : finals) hits += (k == l);
    const double p_hat = hits / n;
    const double se = std::sqrt(P(0, l - 1) * (1 - P(0, l - 1)) / n);
    EXPECT_LE(std::abs(p_hat - P(0, l - 1)), 3.0 * se + 2e-3) << "regime " << l;
  }
}

TEST(Simulate, BrownianMartingaleMean) {
  IntegratorConfig cfg;
  cfg.step = 1e-2;
  cfg.record_stride = 0;
  cfg.record_events = false;
  const ModelSpec m = brownian_model(2);
  const EulerScheme scheme(m, cfg);
  const Moments mom = mc(20000, [&](std::size_t i) {
    return simulate_path(scheme, HybridState(make_vector({1.0, -2.0}), 1), derive_seed(4, i)).terminal.x(0);
  });
  EXPECT_LE(std::abs(mom.mean - 1.0), 3.0 * mom.se);
  EXPECT_NEAR(mom.se * std::sqrt(19999.0), 1.0, 0.03);
}

TEST(Simulate, CompensatedJumpsAreMartingale) {
  // Drift and diffusion removed: X is a pure compensated jump process with E X(t) = x.
  const ModelSpec m = restrict_model(example52(), {false, false, true, false}, "jumps-only");
  IntegratorConfig cfg;
  cfg.step = 1e-2;
  cfg.horizon = 0.5;
  cfg.record_stride = 0;
  cfg.record_events = false;
  const EulerScheme scheme(m, cfg);
  const Moments mom = mc(20000, [&](std::size_t i) {
    return simulate_path(scheme, HybridState(make_vector({1.0, 0.5}), 2), derive_seed(6, i)).terminal.x(0);
  });
  EXPECT_LE(std::abs(mom.mean - 1.0), 3.0 * mom.se);
}

TEST(Simulate, SecondMomentStableUnderHalving) {
  const ModelSpec m = example51();
  std::vector<Moments> est;
  for (int j = 6; j <= 8; ++j) {
    IntegratorConfig cfg;
    cfg.step = std::ldexp(1.0, -j);
    cfg.record_stride = 0;
    cfg.record_events = false;
    const EulerScheme scheme(m, cfg);
    est.push_back(mc(20000, [&](std::size_t i) {
      const double x = simulate_path(scheme, HybridState(v1(0.5), 1), derive_seed(100 + j, i)).terminal.x(0);
      return x * x;
    }));
  }
  for (std::size_t i = 0; i + 1 < est.size(); ++i) {
    EXPECT_TRUE(std::isfinite(est[i].mean));
    EXPECT_LE(std::abs(est[i].mean - est[i + 1].mean), 4.0 * std::hypot(est[i].se, est[i + 1].se));
  }
}

TEST(Simulate, WeakErrorShrinksUnderHalving) {
  // With sigma = c = 0 the scheme is deterministic and the weak error is the Euler error.
  const ModelSpec m = restrict_model(example51(), {true, false, false, false}, "drift-only");
  double previous = std::numeric_limits<double>::infinity();
  for (int j = 2; j <= 5; ++j) {
    IntegratorConfig cfg;
    cfg.step = std::ldexp(1.0, -j);
    const double err = std::abs(simulate_path(m, HybridState(v1(1.0), 1), cfg, 0).terminal.x(0) - std::exp(-0.5));
    EXPECT_LT(err, previous);
    previous = err;
  }
}

TEST(Simulate, ExitIsCensored) {
  IntegratorConfig cfg;
  cfg.step = 1e-2;
  cfg.exit_radius = 0.5;
  const PathRecord p = simulate_path(brownian_model(1), HybridState(v1(0.0), 1), cfg, 77);
  ASSERT_TRUE(p.exited());
  EXPECT_GT(std::abs(p.terminal.x(0)), 0.5);
  EXPECT_EQ(p.times.back(), *p.exit_time);
}

TEST(Simulate, GaussianPolicyMatchesSmallJumpVariance) {
  const ModelSpec m = restrict_model(example51(), {false, false, true, false}, "jumps-only");
  IntegratorConfig drop;
  drop.step = 1e-2;
  drop.horizon = 0.01;
  const PathRecord p = simulate_path(m, HybridState(v1(2.0), 1), drop, 1);
  // x^2 eps / k^2 over one step
  EXPECT_NEAR(p.neglected_variance, 4.0 * 0.05 * 0.01, 1e-15);
  IntegratorConfig gauss = drop;
  gauss.small_jumps = SmallJumpPolicy::gaussian;
  EXPECT_EQ(simulate_path(m, HybridState(v1(2.0), 1), gauss, 1).neglected_variance, 0.0);
}

TEST(Killed, ZeroRatesWeightOne) {
  IntegratorConfig cfg;
  cfg.step = 1e-2;
  EXPECT_EQ(simulate_killed_path(brownian_model(1), HybridState(v1(0.0), 1), cfg, 5).survival_weight, 1.0);
}

TEST(Killed, ConstantRateWeight) {
  IntegratorConfig cfg;
  cfg.step = 1e-2;
  cfg.horizon = 2.0;
  const KilledPath kp = simulate_killed_path(constant_rate_model(0.7), HybridState(v1(0.0), 3), cfg, 5);
  EXPECT_NEAR(kp.survival_weight, std::exp(-1.4), 1e-13);
  for (const auto& s : kp.path.states) EXPECT_EQ(s.k, 3);
}

TEST(Killed, Example51WeightAboveExpMinusM) {
  const ModelSpec m = example51();
  IntegratorConfig cfg;
  cfg.step = 1e-2;
  const double M = example51_max_row_sum(1);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const double w = simulate_killed_path(m, HybridState(v1(0.0), 1), cfg, s).survival_weight;
    EXPECT_GE(w, std::exp(-M) - 1e-15);
    EXPECT_LT(w, 1.0);
  }
}

TEST(Scheme, RejectsBadConfig) {
  IntegratorConfig cfg;
  cfg.step = -1.0;
  EXPECT_THROW(EulerScheme(example51(), cfg), InvalidInput);
  cfg.step = 2.0;
  cfg.horizon = 1.0;
  EXPECT_THROW(EulerScheme(example51(), cfg), InvalidInput);
  IntegratorConfig c2;
  c2.cutoff = 1.5;
  EXPECT_THROW(EulerScheme(example51(), c2), InvalidInput);
}

TEST(Scheme, SwitchTargetInverseCdf) {
  const ModelSpec m = example52();
  IntegratorConfig cfg;
  const EulerScheme scheme(m, cfg);
  const Vector x = make_vector({0.0, 0.0});
  const double q = scheme.exit_rate(x, 1);
  EXPECT_NEAR(q, 0.25, 1e-15);
  // q_12 / q_1 = (1/6) / (1/4)
  EXPECT_EQ(scheme.switch_target(x, 1, q, 0.66), 2);
  EXPECT_EQ(scheme.switch_target(x, 1, q, 0.67), 3);
  EXPECT_GE(scheme.switch_target(x, 1, q, 1.0 - 1e-16), 3);
}
