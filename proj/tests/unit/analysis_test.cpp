#include "swjd/analysis.hpp"
#include "swjd/examples.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace swjd;

namespace {

Vector v1(double a) { return make_vector({a}); }

IntegratorConfig quick(double h, double t) {
  IntegratorConfig c;
  c.step = h;
  c.horizon = t;
  return c;
}

CouplingConfig coupled(double h, double t) {
  CouplingConfig c;
  c.integrator = quick(h, t);
  return c;
}

TestFunction bounded(std::string name, std::function<double(const Vector&, int)> fn, double sup) {
  TestFunction f;
  f.name = std::move(name);
  f.value = std::move(fn);
  f.sup_norm = sup;
  return f;
}

}  // namespace

TEST(Semigroup, ConstantIsExact) {
  const ModelSpec m = example51();
  const EstimatorResult r =
      estimate_semigroup(m, constant_function(1.0, 1), HybridState(v1(0.0), 1), quick(1e-2, 1.0), {500, 3});
  EXPECT_EQ(r.estimate, 1.0);
  EXPECT_EQ(r.std_error, 0.0);
  EXPECT_EQ(r.n_paths, 500u);
}

TEST(Semigroup, ZeroModelKeepsState) {
  TestFunction f = coordinate_function(0, 1);
  f.sup_norm = 10.0;
  const EstimatorResult r = estimate_semigroup(zero_model(1), f, HybridState(v1(0.7), 2), quick(1e-2, 1.0), {50, 1});
  EXPECT_EQ(r.estimate, 0.7);
}

TEST(Semigroup, UnboundedRejected) {
  EXPECT_THROW(estimate_semigroup(zero_model(1), coordinate_function(0, 1), HybridState(v1(0.0), 1),
                                  quick(1e-2, 1.0), {10, 1}),
               InvalidInput);
}

TEST(Semigroup, Example51StaysInRegimeOne) {
  const double t = 0.5;
  const TestFunction f = bounded("1{k=1}", [](const Vector&, int k) { return k == 1 ? 1.0 : 0.0; }, 1.0);
  const EstimatorResult r =
      estimate_semigroup(example51(), f, HybridState(v1(0.0), 1), quick(1e-2, t), {20000, 11});
  EXPECT_GT(r.estimate, std::exp(-t * example51_max_row_sum(1)));
  EXPECT_LE(r.estimate, 1.0);
}

TEST(Semigroup, AllCensoredIsAnError) {
  IntegratorConfig c = quick(1e-2, 1.0);
  c.exit_radius = 1.0;
  const TestFunction f = bounded("one", [](const Vector&, int) { return 1.0; }, 1.0);
  EXPECT_THROW(estimate_semigroup(zero_model(1), f, HybridState(v1(2.0), 1), c, {5, 1}), NumericError);
  RunOptions run{5, 1, CensorPolicy::sup_bound};
  EXPECT_EQ(estimate_semigroup(zero_model(1), f, HybridState(v1(2.0), 1), c, run).n_censored, 5u);
}

TEST(Modulus, IdenticalStartsGiveZero) {
  const ModelSpec m = example51();
  const TestFunction f = bounded("tanh/(1+k)", [](const Vector& x, int k) { return std::tanh(x(0)) / (1 + k); }, 0.5);
  const auto basic = feller_modulus(m, f, v1(0.0), {v1(0.0)}, 1, coupled(1e-2, 1.0), {200, 4});
  EXPECT_EQ(basic[0].modulus.estimate, 0.0);
  const auto refl = strong_feller_modulus(m, f, v1(0.0), {v1(0.0)}, 1, coupled(1e-2, 1.0), {200, 4});
  EXPECT_EQ(refl[0].modulus.estimate, 0.0);
  EXPECT_EQ(refl[0].unmet_prob.estimate, 0.0);
}

TEST(Modulus, ConstantFunctionHasZeroModulus) {
  const TestFunction one = bounded("one", [](const Vector&, int) { return 1.0; }, 1.0);
  const auto refl = strong_feller_modulus(example51(), one, v1(0.0), {v1(0.2)}, 1, coupled(1e-2, 1.0), {300, 2});
  EXPECT_EQ(refl[0].modulus.estimate, 0.0);
  EXPECT_GE(refl[0].bound, 0.0);
  EXPECT_TRUE(refl[0].bound_holds);
}

TEST(Modulus, LipschitzBoundOnPureDiffusion) {
  const ModelSpec m = restrict_model(example51(), {true, true, false, false}, "diffusion51");
  const TestFunction f = bounded("tanh", [](const Vector& x, int) { return std::tanh(x(0)); }, 1.0);
  const auto pts = feller_modulus(m, f, v1(0.0), {v1(0.2), v1(0.1)}, 1, coupled(1e-2, 1.0), {2000, 5});
  for (const auto& p : pts) {
    EXPECT_EQ(p.zeta_prob.estimate, 0.0);
    EXPECT_LE(p.modulus.estimate, p.distance.estimate + 1e-15);
    EXPECT_TRUE(p.bound_holds);
  }
}

TEST(Modulus, TrendCheck) {
  auto er = [](double e, double s) {
    EstimatorResult r;
    r.estimate = e;
    r.std_error = s;
    return r;
  };
  EXPECT_TRUE(check_trend({er(0.2, 0.01), er(0.1, 0.01), er(0.11, 0.01), er(0.04, 0.01)}, 0.05).holds());
  EXPECT_FALSE(check_trend({er(0.2, 0.01), er(0.3, 0.01)}, 0.5).nonincreasing);
  EXPECT_FALSE(check_trend({er(0.2, 0.01), er(0.1, 0.01)}, 0.05).final_below);
}

TEST(Transition, NoSwitchingMeansZero) {
  const TargetSet target{v1(0.0), 10.0, 2};
  const TransitionEstimate e =
      estimate_transition(brownian_model(1), HybridState(v1(0.0), 1), target, quick(1e-2, 1.0), {500, 1});
  EXPECT_EQ(e.hits, 0u);
  EXPECT_EQ(e.lower_bound, 0.0);
}

TEST(Transition, ShortTimeStaysNearStart) {
  const double h = 1e-3;
  const TargetSet target{v1(0.0), 0.5, 1};
  const TransitionEstimate e =
      estimate_transition(example51(), HybridState(v1(0.0), 1), target, quick(h, h), {2000, 1});
  EXPECT_GT(e.result.estimate, 0.99);
}

TEST(Transition, AdaptiveReusesPaths) {
  const ModelSpec m = example51();
  const TargetSet target{v1(1.0), 0.5, 3};
  const IntegratorConfig c = quick(1e-2, 2.0);
  const TransitionEstimate a = estimate_transition_adaptive(m, HybridState(v1(0.0), 1), target, c, {250, 9}, 4000);
  const TransitionEstimate b =
      estimate_transition(m, HybridState(v1(0.0), 1), target, c, {a.result.n_paths, 9});
  EXPECT_EQ(a.hits, b.hits);
  EXPECT_EQ(a.lower_bound, b.lower_bound);
  EXPECT_GT(a.lower_bound, 0.0);
}

TEST(Killed, ZeroRatesMatchFrozenTransition) {
  const ModelSpec m = brownian_model(1);
  const TargetSet target{v1(0.5), 0.5, 1};
  const IntegratorConfig c = quick(1e-2, 1.0);
  const KilledEstimate k = estimate_killed_subtransition(m, HybridState(v1(0.0), 1), target, c, {3000, 6});
  const TransitionEstimate t = estimate_transition(m, HybridState(v1(0.0), 1), target, c, {3000, 6});
  EXPECT_EQ(k.killed.estimate, k.frozen.estimate);
  EXPECT_EQ(k.survival.estimate, 1.0);
  EXPECT_NEAR(k.frozen.estimate, t.result.estimate, 1e-15);
}

TEST(Killed, WeightBoundsOnExample51) {
  const ModelSpec m = example51();
  const TargetSet target{v1(0.0), 1.0, 1};
  const double t = 1.0;
  const KilledEstimate k = estimate_killed_subtransition(m, HybridState(v1(0.0), 1), target, quick(1e-2, t), {4000, 6});
  const double M = example51_max_row_sum(1);
  EXPECT_GE(k.killed.estimate, std::exp(-M * t) * k.frozen.estimate);
  EXPECT_LE(k.killed.estimate, k.frozen.estimate);
}

TEST(Invariant, PartitionIndexing) {
  Partition p{make_vector({-1.0, -1.0}), make_vector({1.0, 1.0}), {2, 4}, 3};
  p.validate(2);
  EXPECT_EQ(p.size(), 2u * 4u * 3u + 1u);
  EXPECT_EQ(p.index(HybridState(make_vector({-0.9, -0.9}), 1)), 0u);
  EXPECT_EQ(p.index(HybridState(make_vector({0.9, 0.9}), 3)), 2u * 8u + 7u);
  EXPECT_EQ(p.index(HybridState(make_vector({0.0, 1.0}), 1)), p.size() - 1);
  EXPECT_EQ(p.index(HybridState(make_vector({0.0, 0.0}), 4)), p.size() - 1);
}

TEST(Invariant, ZeroModelIsDegenerate) {
  Partition p{v1(-2.0), v1(2.0), {4}, 2};
  InvariantOptions o;
  o.t_burn = 0.5;
  o.t_end = 1.0;
  o.paths_per_start = 3;
  const InvariantReport r =
      estimate_invariant(zero_model(1), {HybridState(v1(-1.5), 1), HybridState(v1(1.5), 1)}, p, quick(1e-2, 1.0), o);
  EXPECT_DOUBLE_EQ(r.tv[0][1], 1.0);
  EXPECT_DOUBLE_EQ(r.histograms[0][p.index(HybridState(v1(-1.5), 1))], 1.0);
  EXPECT_DOUBLE_EQ(r.window_tv[0], 0.0);
}

TEST(CouplingDrift, BrownianOracle) {
  const GFunction G = build_G(1.0, 1.0, [](double) { return 0.0; }, 10);
  const double h = 1e-3;
  CouplingConfig cfg;
  const auto res = verify_coupling_drift(brownian_model(2), G, {{make_vector({0.0, 0.0}), make_vector({0.5, 0.0}), 1}},
                                         h, cfg, {100000, 3});
  ASSERT_EQ(res.size(), 1u);
  EXPECT_TRUE(res[0].holds);
  // |Delta| moves as a Brownian motion with variance 4: E G(|Delta_h|) - G(|Delta_0|) = 2 G'' h = -2 h.
  EXPECT_NEAR(res[0].drift.estimate, -2.0, 4.0 * (res[0].drift.std_error + res[0].bias_allowance));
}

TEST(CouplingDrift, PreconditionEnforced) {
  const GFunction G = build_G(1.0, 1.0, [](double) { return 0.0; }, 6);
  CouplingConfig cfg;
  EXPECT_THROW(verify_coupling_drift(brownian_model(1), G, {{v1(0.0), v1(0.0), 1}}, 1e-3, cfg, {10, 1}),
               InvalidInput);
  EXPECT_THROW(verify_coupling_drift(brownian_model(1), G, {{v1(0.0), v1(3.0), 1}}, 1e-3, cfg, {10, 1}),
               InvalidInput);
}

TEST(Dynkin, ZeroModel) {
  const TestFunction f = bounded("sin", [](const Vector& x, int) { return std::sin(x(0)); }, 1.0);
  TestFunction g = f;
  g.gradient = [](const Vector& x, int) { return make_vector({std::cos(x(0))}); };
  const DynkinResult r = dynkin_check(zero_model(1), g, HybridState(v1(0.3), 1), quick(1e-2, 0.1), {100, 1});
  EXPECT_EQ(r.lhs.estimate, 0.0);
  EXPECT_EQ(r.rhs.value, 0.0);
  EXPECT_EQ(r.z_score, 0.0);
}

TEST(Dynkin, Example51GaussianBump) {
  TestFunction f = bounded("x exp(-x^2)", [](const Vector& x, int) { return x(0) * std::exp(-x(0) * x(0)); },
                           1.0 / std::sqrt(2.0 * std::exp(1.0)));
  f.regime_independent = true;
  IntegratorConfig c = quick(std::ldexp(1.0, -12), std::ldexp(1.0, -8));
  c.small_jumps = SmallJumpPolicy::gaussian;
  const DynkinResult r = dynkin_check(example51(), f, HybridState(v1(0.5), 1), c, {100000, 8});
  EXPECT_LE(r.z_score, 4.0) << r.lhs.estimate << " vs " << r.rhs.value;
}

TEST(Dynkin, SwitchingIndicatorRate) {
  const TestFunction f = bounded("1{k=2}", [](const Vector&, int k) { return k == 2 ? 1.0 : 0.0; }, 1.0);
  const ModelSpec m = switching_model();
  const DynkinResult r = dynkin_check(m, f, HybridState(v1(0.3), 1), quick(1e-3, 1.0 / 16), {100000, 2});
  const double q12 = std::pow(3.0, -3.0) / (1 + 2 * 0.09);
  EXPECT_NEAR(r.rhs.value, q12, 1e-12);
  EXPECT_LE(r.z_score, 4.0) << r.lhs.estimate << " vs " << q12;
}
