#pragma once

#include "swjd/model.hpp"
#include "swjd/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace swjd {

struct TestFunction {
  std::string name;
  std::function<double(const Vector&, int)> value;
  std::function<Vector(const Vector&, int)> gradient;  // optional, central differences otherwise
  std::function<Matrix(const Vector&, int)> hessian;   // optional, central differences otherwise
  /// sup |f|, set when f is bounded.
  std::optional<double> sup_norm;
  /// f(x, k) does not depend on k.
  bool regime_independent = false;
  /// (x, k, L) -> bound on sum_{l > L, l != k} q_kl(x) |f(x,l) - f(x,k)| for unbounded f.
  std::function<double(const Vector&, int, int)> regime_tail;
  /// Relative finite-difference step for the gradient; the Hessian uses 10x.
  double fd_step = 1e-5;

  double operator()(const Vector& x, int k) const { return value(x, k); }
  Vector grad(const Vector& x, int k) const;
  Matrix hess(const Vector& x, int k) const;
};

TestFunction constant_function(double c, int dim);
/// f(x, k) = x_i (0-based index).
TestFunction coordinate_function(int i, int dim);
/// f(x, k) = 1 when k == l.
TestFunction regime_indicator(int l, int dim);
/// sum_j w_j f_j.
TestFunction linear_combination(const std::vector<std::pair<double, TestFunction>>& terms);

struct GeneratorOptions {
  double quad_tol = 1e-9;
  /// Absolute target for the certified regime-sum tail.
  double regime_abs_tol = 1e-12;
  /// Fixed truncation level; adaptive when unset.
  std::optional<int> max_level;
  /// Small-jump split; the model's cutoff when unset.
  std::optional<double> cutoff;
  /// Points sampled on each jump segment when bounding the Hessian variation.
  int bracket_samples = 16;
};

/// Af(x,k) with its parts. `bracket` bounds |Af - value| coming from the
/// small-jump Taylor remainder, the regime tail, and the quadrature error.
struct GeneratorValue {
  double value = 0.0;
  double bracket = 0.0;
  double diffusion_term = 0.0;
  double drift_term = 0.0;
  double jump_term = 0.0;
  double switching_term = 0.0;
  double small_jump_bracket = 0.0;
  double regime_tail = 0.0;
  double quadrature_error = 0.0;
  int regime_level = 0;
};

GeneratorValue apply_generator(const ModelSpec& spec, const TestFunction& f, const Vector& x, int k,
                               const GeneratorOptions& opts = {});

/// Largest relative mismatch between analytic and finite-difference derivatives over the probes.
struct DerivativeCheck {
  double gradient_error = 0.0;
  double hessian_error = 0.0;
  bool ok = true;
};
DerivativeCheck check_derivatives(const TestFunction& f, const std::vector<HybridState>& probes, double tol = 1e-5);

// ---------------------------------------------------------------------------
// Lyapunov drift

/// A V(x,k) <= -alpha f(x,k) + beta 1_{C x N}(x,k) with C an axis box and N = [n_lo, n_hi].
struct LyapunovCertificate {
  TestFunction V;
  double alpha = 0.0;
  double beta = 0.0;
  TestFunction rate;  // f >= 1
  Vector box_lo;      // empty box: C x N is the whole grid
  Vector box_hi;
  int n_lo = 1;
  int n_hi = 0;
  bool whole_space = true;

  bool in_set(const HybridState& s) const;
};

struct DriftPoint {
  HybridState state;
  double generator = 0.0;
  double bracket = 0.0;
  double margin = 0.0;  // AV + alpha f - beta 1_{CxN}
  std::string error;
};

struct DriftReport {
  std::vector<DriftPoint> points;
  double max_margin = 0.0;
  double max_bracket = 0.0;
  std::optional<HybridState> worst_point;
  std::size_t n_failed = 0;

  bool holds(double tol) const;
};

DriftReport check_lyapunov(const ModelSpec& spec, const LyapunovCertificate& cert,
                           const std::vector<HybridState>& grid, const GeneratorOptions& opts = {});

}  // namespace swjd
