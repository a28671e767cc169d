#pragma once

#include "swjd/jump_measure.hpp"
#include "swjd/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace swjd {

struct TestFunction;

/// The Levy part of the model: the measure nu, the cutoff eps that splits it
/// into a compound-Poisson part and a small-jump remainder, and optional
/// closed forms of the c-weighted integrals (quadrature is used otherwise).
struct JumpMeasureSpec {
  std::shared_ptr<const JumpMeasure> measure;  // null: no jumps
  double cutoff = 0.05;

  /// (x, k, eps) -> integral of c(x,k,u) over {|u| > eps}.
  std::function<Vector(const Vector&, int, double)> compensator;
  /// (x, k, eps) -> integral of c c^T over {|u| <= eps}.
  std::function<Matrix(const Vector&, int, double)> small_jump_cov;
  /// (x, k) -> integral of |c|^2 over U.
  std::function<double(const Vector&, int)> second_moment;

  double large_jump_rate() const { return measure ? measure->mass_outside(cutoff) : 0.0; }
};

/// State-dependent rates q_kl(x), l != k, over the countable regime space.
struct RateMatrixSpec {
  std::function<double(const Vector&, int, int)> rate;  // null: no switching
  /// Exact q_k(x) when available.
  std::function<double(const Vector&, int)> row_sum;
  /// (k, L) -> bound on sum_{l > L, l != k} q_kl(x), uniform in x.
  std::function<double(int, int)> tail_bound;
  /// kappa_0 with q_kl(x) <= kappa_0 l 3^-l; yields a tail bound when none is given.
  std::optional<double> uniform_bound;
  /// Finite regime support {1..N}; rates beyond N are zero.
  std::optional<int> max_regime;
  /// Rates do not depend on x.
  bool state_independent = false;
  int max_terms = 100000;

  bool switching() const { return static_cast<bool>(rate); }
};

struct ModelSpec {
  std::string name;
  int dim = 1;
  std::function<Vector(const Vector&, int)> drift;
  std::function<Matrix(const Vector&, int)> diffusion;
  /// c(x, k, u); null when the model has no jumps.
  std::function<Vector(const Vector&, int, const Vector&)> jump;
  JumpMeasureSpec jumps;
  RateMatrixSpec rates;
  std::optional<double> ellipticity;  // lambda
  std::optional<double> growth;       // kappa
  std::shared_ptr<const TestFunction> lyapunov;

  bool has_jumps() const { return jump && jumps.measure; }

  Matrix covariance(const Vector& x, int k) const {
    const Matrix s = diffusion(x, k);
    return s * s.transpose();
  }
};

/// Throws InvalidInput unless the model is internally consistent.
void check_model(const ModelSpec& spec);

// ---------------------------------------------------------------------------
// Countable regime sums

struct RowTruncation {
  std::vector<std::pair<int, double>> rates;  // (l, q_kl(x)) for all l <= level, l != k
  double partial_sum = 0.0;
  double certified_tail = 0.0;
  int level = 0;
};

/// Bound on sum_{l > L, l != k} q_kl(x) uniform in x, from the model's tail
/// bound, kappa_0, or finite support; nullopt when none is available.
std::optional<double> rate_tail_bound(const RateMatrixSpec& spec, int k, int L);

/// Truncates the row at the smallest L with certified_tail <= rel_tol * (partial + tail).
RowTruncation q_row_truncated(const RateMatrixSpec& spec, const Vector& x, int k, double rel_tol);

/// Same, reusing the storage of `out`.
void q_row_truncated_into(const RateMatrixSpec& spec, const Vector& x, int k, double rel_tol, RowTruncation& out);

/// Truncated sum_{l != k} |q_kl(x) - q_kl(y)| through level L, and the
/// certified bound 2 * tail on what was left out.
struct RateDifference {
  double truncated = 0.0;
  double tail = 0.0;
  int level = 0;
};
RateDifference rate_difference_sum(const RateMatrixSpec& spec, const Vector& x, const Vector& y, int k,
                                   double abs_tol);

// ---------------------------------------------------------------------------
// Jump integrals (closed form when supplied, quadrature otherwise)

Vector jump_compensator(const ModelSpec& spec, const Vector& x, int k, double eps, double rel_tol = 1e-8);
Matrix small_jump_covariance(const ModelSpec& spec, const Vector& x, int k, double eps, double rel_tol = 1e-8);
double jump_second_moment(const ModelSpec& spec, const Vector& x, int k, double rel_tol = 1e-8);

// ---------------------------------------------------------------------------
// Assumption spot checks

struct AssumptionCheck {
  std::string name;
  std::string description;
  bool applicable = true;
  /// Extreme observed value of the checked quantity (e.g. min eigenvalue of a).
  double worst_value = 0.0;
  /// Slack of the inequality at the worst probe; negative means violated.
  double margin = 0.0;
  std::optional<HybridState> worst_point;
  bool violated = false;
  std::string message;
};

struct ValidationReport {
  std::string model;
  std::size_t n_points = 0;
  std::vector<AssumptionCheck> checks;

  bool any_violation() const;
  const AssumptionCheck* find(const std::string& name) const;
};

struct ValidationOptions {
  double regime_rel_tol = 1e-12;
  int mark_samples = 8;
  double quad_rel_tol = 1e-8;
};

ValidationReport validate_model(const ModelSpec& spec, const std::vector<HybridState>& probes,
                                const std::vector<Vector>& directions, const ValidationOptions& opts = {});

/// Probe points on a regular grid of [lo, hi]^d (n per axis) times regimes 1..kmax.
std::vector<HybridState> grid_probes(int dim, double lo, double hi, int n, int kmax);

/// Coordinate axes and, for d >= 2, normalized diagonals.
std::vector<Vector> default_directions(int dim);

}  // namespace swjd
