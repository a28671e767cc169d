#include "swjd/config.hpp"
#include "swjd/examples.hpp"
#include "swjd/expression.hpp"
#include "swjd/generator.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace swjd;

namespace {

double ev(const std::string& text, std::vector<double> vals = {}) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < vals.size(); ++i) names.push_back("v" + std::to_string(i + 1));
  return Expression::parse(text, names).eval(vals.data());
}

}  // namespace

TEST(Expression, Precedence) {
  EXPECT_EQ(ev("1 + 2 * 3"), 7.0);
  EXPECT_EQ(ev("-v1^2", {3}), -9.0);
  EXPECT_EQ(ev("2^3^2"), 512.0);
  EXPECT_EQ(ev("2^-1"), 0.5);
  EXPECT_EQ(ev("(1 + 2) * 3"), 9.0);
  EXPECT_EQ(ev("8 / 4 / 2"), 1.0);
  EXPECT_EQ(ev("1 - 2 - 3"), -4.0);
  EXPECT_EQ(ev("1.5e2 + .5"), 150.5);
}

TEST(Expression, FunctionsAndComparisons) {
  EXPECT_EQ(ev("(v1 >= 0) * (v2 == 1)", {0.0, 1.0}), 1.0);
  EXPECT_EQ(ev("(v1 >= 0) * (v2 == 1)", {-0.1, 1.0}), 0.0);
  EXPECT_EQ(ev("if(v1 < 1, 10, 20)", {2}), 20.0);
  EXPECT_EQ(ev("min(3, max(1, 2))"), 2.0);
  EXPECT_DOUBLE_EQ(ev("pow(2, 0.5)"), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(ev("tanh(v1) + abs(-v1) + sign(-v1)", {0.3}), std::tanh(0.3) + 0.3 - 1.0);
  EXPECT_DOUBLE_EQ(ev("pi"), std::acos(-1.0));
  EXPECT_DOUBLE_EQ(ev("log(e)"), 1.0);
}

TEST(Expression, Errors) {
  EXPECT_THROW(ev("1 +"), InvalidInput);
  EXPECT_THROW(ev("(1"), InvalidInput);
  EXPECT_THROW(ev("q + 1"), InvalidInput);
  EXPECT_THROW(ev("foo(1)"), InvalidInput);
  EXPECT_THROW(ev("pow(1)"), InvalidInput);
  EXPECT_THROW(ev("1 2"), InvalidInput);
  try {
    ev("1 + zz");
    FAIL();
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("position 5"), std::string::npos) << e.what();
  }
}

TEST(Expression, UsesTracksVariables) {
  const Expression e = Expression::parse("x1 * 2", {"x1", "k"});
  EXPECT_TRUE(e.uses("x1"));
  EXPECT_FALSE(e.uses("k"));
}

TEST(Config, Example51FileMatchesBuiltin) {
  const LoadedModel lm = load_model(std::string(SWJD_SOURCE_DIR) + "/configs/example51.json");
  const ModelSpec b = example51();
  const ModelSpec& c = lm.spec;
  ASSERT_EQ(c.dim, 1);
  EXPECT_EQ(lm.regime_rel_tol, 1e-12);
  for (double x : {-2.0, -0.3, 0.0, 0.7, 4.0}) {
    for (int k : {1, 2, 5}) {
      const Vector v = make_vector({x});
      EXPECT_NEAR(c.drift(v, k)(0), b.drift(v, k)(0), 1e-15);
      EXPECT_NEAR(c.diffusion(v, k)(0, 0), b.diffusion(v, k)(0, 0), 1e-14);
      EXPECT_NEAR(c.jump(v, k, make_vector({-0.4}))(0), b.jump(v, k, make_vector({-0.4}))(0), 1e-15);
      for (int l : {1, 2, 3, 9}) EXPECT_NEAR(c.rates.rate(v, k, l), b.rates.rate(v, k, l), 1e-17);
      GeneratorOptions opts;
      TestFunction f = constant_function(0.0, 1);
      f.value = [](const Vector& y, int kk) { return std::sin(y(0)) / (1 + kk); };
      f.sup_norm = 0.5;
      const double gb = apply_generator(b, f, v, k, opts).value;
      const double gc = apply_generator(c, f, v, k, opts).value;
      EXPECT_NEAR(gc, gb, 1e-7 * (1 + std::abs(gb)));
    }
  }
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_model_config("{", "t"), InvalidInput);
  EXPECT_THROW(parse_model_config(R"({"dimension": 0})", "t"), InvalidInput);
  EXPECT_THROW(parse_model_config(R"({"dimension": 1, "drfit": "x"})", "t"), InvalidInput);
  EXPECT_THROW(parse_model_config(R"({"dimension": 2, "drift": ["x1"]})", "t"), InvalidInput);
  EXPECT_THROW(parse_model_config(R"({"dimension": 1, "drift": "y"})", "t"), InvalidInput);
  EXPECT_THROW(parse_model_config(R"({"dimension": 1, "jumps": {"mark_dim": 3, "exponent": 2, "coefficient": "u"}})", "t"),
               InvalidInput);
  EXPECT_THROW(
      parse_model_config(R"({"dimension": 1, "switching": {"rate": "x", "state_independent": true}})", "t"),
      InvalidInput);
  EXPECT_THROW(load_model("no-such-model"), InvalidInput);
}

TEST(Config, MinimalModelDefaults) {
  const LoadedModel lm = parse_model_config(R"({"dimension": 2, "diffusion": "1"})", "t");
  EXPECT_EQ(lm.spec.covariance(make_vector({1, 2}), 1), Matrix::Identity(2, 2));
  EXPECT_FALSE(lm.spec.has_jumps());
  EXPECT_FALSE(lm.spec.rates.switching());
  const LoadedModel sw = parse_model_config(R"({"dimension": 1, "switching": {"rate": "2^-l", "max_regime": 3}})", "t");
  EXPECT_TRUE(sw.spec.rates.state_independent);
  EXPECT_EQ(sw.spec.rates.rate(make_vector({0}), 1, 1), 0.0);
}

TEST(Config, ExpressionFunction) {
  const TestFunction f = expression_function("tanh(x) / (1 + k)", 1, 0.5);
  EXPECT_DOUBLE_EQ(f(make_vector({0.4}), 2), std::tanh(0.4) / 3);
  EXPECT_FALSE(f.regime_independent);
  EXPECT_TRUE(expression_function("x1 * x2", 2).regime_independent);
  EXPECT_DOUBLE_EQ(expression_of_r("r^(-1/3)")(8.0), 0.5);
}
