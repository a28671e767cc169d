#include "swjd/examples.hpp"
#include "swjd/generator.hpp"
#include "swjd/model.hpp"
#include "swjd/quadrature.hpp"
#include "swjd/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace swjd;

namespace {

Vector v1(double a) { return make_vector({a}); }

}  // namespace

TEST(Types, RegimeIndexRejectsZero) {
  EXPECT_THROW(RegimeIndex(0), InvalidInput);
  EXPECT_EQ(RegimeIndex(3).value(), 3);
  EXPECT_THROW(HybridState(v1(0.0), 0), InvalidInput);
}

TEST(RowTruncation, Example51AtOriginIsOneEighteenth) {
  const ModelSpec m = example51();
  const RowTruncation row = q_row_truncated(m.rates, v1(0.0), 1, 1e-12);
  // (1/3) sum_{l >= 2} 3^-l = 1/18
  EXPECT_NEAR(row.partial_sum + row.certified_tail, 1.0 / 18.0, 1e-15);
  EXPECT_LE(row.certified_tail, 1e-12 * (row.partial_sum + row.certified_tail));
  EXPECT_EQ(row.rates.front().first, 2);
  EXPECT_EQ(static_cast<int>(row.rates.size()), row.level - 1);
}

TEST(RowTruncation, Example52AtOriginIsOneQuarter) {
  const ModelSpec m = example52();
  const RowTruncation row = q_row_truncated(m.rates, make_vector({0.0, 0.0}), 1, 1e-12);
  EXPECT_NEAR(row.partial_sum, 0.25, 1e-12);
  EXPECT_NEAR(m.rates.rate(make_vector({0.0, 0.0}), 1, 2), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(m.rates.row_sum(make_vector({0.0, 0.0}), 1), 0.25, 1e-15);
}

TEST(RowTruncation, ZeroRatesGiveEmptyRow) {
  const RowTruncation row = q_row_truncated(zero_model(1).rates, v1(3.0), 2, 1e-12);
  EXPECT_TRUE(row.rates.empty());
  EXPECT_EQ(row.certified_tail, 0.0);
}

TEST(RowTruncation, PartialSumsMonotoneAndBounded) {
  const ModelSpec m = example51();
  for (double x : {-4.0, -0.3, 0.0, 1.7, 9.0}) {
    for (int k = 1; k <= 6; ++k) {
      const RowTruncation row = q_row_truncated(m.rates, v1(x), k, 1e-12);
      const double exact = m.rates.row_sum(v1(x), k);
      double partial = 0.0;
      for (const auto& [l, q] : row.rates) {
        EXPECT_GE(q, 0.0);
        partial += q;
        EXPECT_LE(partial, exact * (1 + 1e-14));
      }
      EXPECT_LE(exact, row.partial_sum + row.certified_tail + 1e-16);
    }
  }
}

TEST(RowTruncation, FailsWithoutAnyTailInformation) {
  ModelSpec m = example51();
  m.rates.tail_bound = nullptr;
  m.rates.uniform_bound.reset();
  m.rates.row_sum = nullptr;
  EXPECT_THROW(q_row_truncated(m.rates, v1(0.0), 1, 1e-12), TruncationError);
}

TEST(RowTruncation, RowSumFallbackTruncates) {
  ModelSpec m = example52();
  m.rates.tail_bound = nullptr;
  m.rates.uniform_bound.reset();
  const RowTruncation row = q_row_truncated(m.rates, make_vector({0.4, -1.0}), 3, 1e-10);
  EXPECT_NEAR(row.partial_sum, m.rates.row_sum(make_vector({0.4, -1.0}), 3), 1e-10);
}

TEST(RowTruncation, FiniteSupportAloneSumsWholeRow) {
  RateMatrixSpec spec;
  spec.rate = [](const Vector& x, int, int l) { return 1.0 + 0.5 * std::tanh(x(0)) + l; };
  spec.max_regime = 3;
  const RowTruncation row = q_row_truncated(spec, v1(-2.0), 1, 1e-12);
  const double q = 1.0 + 0.5 * std::tanh(-2.0);
  EXPECT_NEAR(row.partial_sum, 2 * q + 5.0, 1e-14);
  EXPECT_EQ(row.certified_tail, 0.0);
  EXPECT_EQ(row.level, 3);
}

TEST(RowTruncation, KappaZeroTailMatchesClosedForm) {
  RateMatrixSpec spec;
  spec.rate = [](const Vector&, int, int) { return 0.0; };
  spec.uniform_bound = 1.0;
  // sum_{l > 3} l 3^-l by direct summation
  double direct = 0.0;
  for (int l = 4; l < 200; ++l) direct += l * std::pow(3.0, -l);
  EXPECT_NEAR(*rate_tail_bound(spec, 1, 3), direct, 1e-15);
}

TEST(Examples, Example51Coefficients) {
  const ModelSpec m = example51();
  for (int k = 1; k <= 5; ++k) {
    EXPECT_NEAR(m.diffusion(v1(8.0), k)(0, 0), 5.0, 1e-14);
    EXPECT_NEAR(m.diffusion(v1(-8.0), k)(0, 0), 5.0, 1e-14);
    EXPECT_EQ(m.drift(v1(0.0), k)(0), 0.0);
  }
}

TEST(Examples, Example51SecondMomentMatchesQuadrature) {
  ModelSpec m = example51();
  EXPECT_DOUBLE_EQ(jump_second_moment(m, v1(2.0), 1), 4.0);
  m.jumps.second_moment = nullptr;
  // 2 int_0^1 (u 2/sqrt2)^2 u^-2 du = 4
  EXPECT_NEAR(jump_second_moment(m, v1(2.0), 1), 4.0, 1e-8);
  EXPECT_NEAR(jump_second_moment(m, v1(-3.0), 2), 9.0 / 4.0, 1e-8);
}

TEST(Examples, Example51ClosedFormsMatchQuadrature) {
  ModelSpec m = example51();
  ModelSpec bare = m;
  bare.jumps.compensator = nullptr;
  bare.jumps.small_jump_cov = nullptr;
  for (double x : {-2.0, 0.5, 3.0}) {
    EXPECT_NEAR(jump_compensator(bare, v1(x), 2, 0.05)(0), 0.0, 1e-12);
    EXPECT_NEAR(small_jump_covariance(bare, v1(x), 2, 0.05)(0, 0), small_jump_covariance(m, v1(x), 2, 0.05)(0, 0),
                1e-9);
  }
  EXPECT_NEAR(m.jumps.large_jump_rate(), 2.0 * (1.0 / 0.05 - 1.0), 1e-12);
}

TEST(Examples, Example52GammaNormalisation) {
  for (double delta : {0.3, 1.0, 1.7}) {
    const double gamma = example52_gamma(delta);
    // 2 pi int_0^1 r^(1-delta) dr
    const double polar = 2.0 * std::numbers::pi *
                         integrate_from_zero([delta](double r) { return std::pow(r, 1.0 - delta); }, 1.0, 1e-12).value;
    EXPECT_NEAR(gamma * gamma * polar, 1.0, 1e-9);
  }
  EXPECT_NEAR(std::pow(example52_gamma(1.0), 2), 1.0 / (2.0 * std::numbers::pi), 1e-15);
  EXPECT_THROW(example52(0.0), InvalidInput);
  EXPECT_THROW(example52(2.0), InvalidInput);
}

TEST(Examples, Example52DriftLimit) {
  const ModelSpec m = example52();
  const Vector x = make_vector({1.5, -2.0});
  EXPECT_LE((m.drift(x, 1000000) + x).norm(), 1e-6 * x.norm());
}

TEST(Examples, Example52ClosedFormsMatchQuadrature) {
  for (double delta : {0.5, 1.0, 1.5}) {
    ModelSpec m = example52(delta);
    ModelSpec bare = m;
    bare.jumps.compensator = nullptr;
    bare.jumps.small_jump_cov = nullptr;
    bare.jumps.second_moment = nullptr;
    const Vector x = make_vector({0.7, -1.2});
    EXPECT_LT((jump_compensator(bare, x, 3, 0.1) - jump_compensator(m, x, 3, 0.1)).norm(), 1e-7);
    EXPECT_LT((small_jump_covariance(bare, x, 3, 0.1) - small_jump_covariance(m, x, 3, 0.1)).norm(), 1e-8);
    EXPECT_NEAR(jump_second_moment(bare, x, 3), jump_second_moment(m, x, 3), 1e-7);
  }
}

TEST(Examples, Example51RateLipschitzThreeQuarters) {
  const ModelSpec m = example51();
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const Vector x = v1(-10.0 + 20.0 * rng.uniform());
    const Vector y = v1(-10.0 + 20.0 * rng.uniform());
    const int k = 1 + static_cast<int>(rng.uniform() * 8);
    const RateDifference d = rate_difference_sum(m.rates, x, y, k, 1e-12);
    EXPECT_LE(d.truncated, 0.75 * std::abs(x(0) - y(0)) + 1e-10);
  }
}

TEST(Examples, BuiltinLookup) {
  EXPECT_EQ(builtin_model("example52:0.5").dim, 2);
  EXPECT_EQ(builtin_model("zero:3").dim, 3);
  EXPECT_EQ(builtin_model("example52").name, "example52:1");
  EXPECT_THROW(builtin_model("example53"), InvalidInput);
  EXPECT_THROW(builtin_model("example52:x"), InvalidInput);
}

TEST(Validation, Example51Margins) {
  const ModelSpec m = example51();
  const auto report = validate_model(m, grid_probes(1, -10.0, 10.0, 41, 20), default_directions(1));
  EXPECT_FALSE(report.any_violation());
  const AssumptionCheck* ellip = report.find("ellipticity");
  ASSERT_NE(ellip, nullptr);
  EXPECT_GE(ellip->worst_value, 1.0);
  EXPECT_GE(report.find("growth_diffusion_jump")->margin, 0.0);
  EXPECT_GE(report.find("growth_drift")->margin, 0.0);
}

TEST(Validation, Example52HasNoViolation) {
  const auto report =
      validate_model(example52(), grid_probes(2, -5.0, 5.0, 9, 6), default_directions(2));
  for (const auto& c : report.checks) EXPECT_FALSE(c.violated) << c.name << ": " << c.message;
}

TEST(Validation, ZeroModelTriviallySatisfied) {
  ModelSpec m = zero_model(2);
  m.growth = 0.5;
  const auto report = validate_model(m, grid_probes(2, -3.0, 3.0, 5, 2), default_directions(2));
  EXPECT_FALSE(report.any_violation());
  EXPECT_GT(report.find("growth_drift")->margin, 0.0);
}

TEST(Validation, DetectsDeclaredEllipticityViolation) {
  ModelSpec m = example51();
  m.ellipticity = 2.0;
  const auto report = validate_model(m, grid_probes(1, -1.0, 1.0, 5, 1), default_directions(1));
  const AssumptionCheck* ellip = report.find("ellipticity");
  EXPECT_TRUE(ellip->violated);
  ASSERT_TRUE(ellip->worst_point.has_value());
  EXPECT_EQ(ellip->worst_point->x(0), 0.0);
}

TEST(Validation, NonFiniteCoefficientIsViolation) {
  ModelSpec m = example51();
  m.drift = [](const Vector& x, int) -> Vector { return Vector::Constant(1, 1.0 / x(0)); };
  const auto report = validate_model(m, grid_probes(1, -1.0, 1.0, 3, 1), default_directions(1));
  EXPECT_TRUE(report.find("coefficients_finite")->violated);
}

TEST(Validation, IsPure) {
  const auto probes = grid_probes(1, -2.0, 2.0, 7, 3);
  const auto a = validate_model(example51(), probes, default_directions(1));
  const auto b = validate_model(example51(), probes, default_directions(1));
  ASSERT_EQ(a.checks.size(), b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i) {
    EXPECT_EQ(a.checks[i].margin, b.checks[i].margin);
    EXPECT_EQ(a.checks[i].message, b.checks[i].message);
  }
}

TEST(Validation, DimensionMismatchRejected) {
  EXPECT_THROW(validate_model(example51(), grid_probes(2, 0, 1, 2, 1), default_directions(1)), InvalidInput);
}
