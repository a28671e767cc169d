#pragma once

#include "swjd/coupling.hpp"
#include "swjd/generator.hpp"
#include "swjd/model.hpp"
#include "swjd/simulate.hpp"
#include "swjd/special.hpp"
#include "swjd/stats.hpp"

#include <cstdint>
#include <vector>

namespace swjd {

/// How exited paths enter an expectation: dropped from the average, or
/// counted at +sup|f| so the estimate becomes an upper bound.
enum class CensorPolicy { condition, sup_bound };

const char* to_string(CensorPolicy p);
CensorPolicy parse_censor_policy(const std::string& s);

struct RunOptions {
  std::size_t n_paths = 10000;
  std::uint64_t seed = 1;
  CensorPolicy censoring = CensorPolicy::condition;
};

/// P_t f(x,k) with t = cfg.horizon.
EstimatorResult estimate_semigroup(const ModelSpec& spec, const TestFunction& f, const HybridState& start,
                                   const IntegratorConfig& cfg, const RunOptions& run);

// ---------------------------------------------------------------------------
// Continuity moduli

struct ModulusPoint {
  Vector x_tilde;
  /// Mean of f(X~(t), L~(t)) - f(X(t), L(t)) over coupled pairs.
  EstimatorResult difference;
  /// |difference|, the estimate of |P_t f(x~,k) - P_t f(x,k)|.
  EstimatorResult modulus;
  /// P(zeta <= t); exited pairs count as events.
  EstimatorResult zeta_prob;
  /// E |f(X~,L~) - f(X,L)| 1{t < zeta}.
  EstimatorResult gap_before_zeta;
  /// P(t < T); exited pairs count as events. Reflection coupling only.
  EstimatorResult unmet_prob;
  /// E |X~(t) - X(t)|.
  EstimatorResult distance;
  /// Decomposition bound: 2|f| P(zeta <= t) + gap (basic), 4|f| P(t < T) + 2|f| P(zeta <= t) (reflection).
  double bound = 0.0;
  /// modulus <= bound + 3 stderr.
  bool bound_holds = true;
};

/// Basic coupling from (x,k) and (x~,k) for each x~ in the sequence; common random numbers across points.
std::vector<ModulusPoint> feller_modulus(const ModelSpec& spec, const TestFunction& f, const Vector& x,
                                         const std::vector<Vector>& x_tilde, int k, const CouplingConfig& cfg,
                                         const RunOptions& run);
/// Reflection coupling; f may be any bounded measurable function.
std::vector<ModulusPoint> strong_feller_modulus(const ModelSpec& spec, const TestFunction& f, const Vector& x,
                                                const std::vector<Vector>& x_tilde, int k,
                                                const CouplingConfig& cfg, const RunOptions& run);

struct TrendCheck {
  bool nonincreasing = true;  // est[i+1] <= est[i] + tol * sqrt(se[i]^2 + se[i+1]^2)
  bool final_below = true;    // est.back() <= threshold
  bool holds() const { return nonincreasing && final_below; }
};
TrendCheck check_trend(const std::vector<EstimatorResult>& estimates, double threshold, double tol = 2.0);

// ---------------------------------------------------------------------------
// Transition probabilities

struct TargetSet {
  Vector center;
  double radius = 0.0;
  int regime = 1;
};

struct TransitionEstimate {
  EstimatorResult result;
  std::size_t hits = 0;
  /// One-sided 95% Clopper-Pearson lower bound.
  double lower_bound = 0.0;
  int rounds = 1;
};

/// P(t,(x,k), B(a,r) x {l}) with t = cfg.horizon; exited paths count as misses.
TransitionEstimate estimate_transition(const ModelSpec& spec, const HybridState& start, const TargetSet& target,
                                       const IntegratorConfig& cfg, const RunOptions& run);
/// Doubles the path count from run.n_paths until the lower bound is positive or n_max is reached.
/// Paths already simulated are reused, so the result matches a single run at the final count.
TransitionEstimate estimate_transition_adaptive(const ModelSpec& spec, const HybridState& start,
                                                const TargetSet& target, const IntegratorConfig& cfg,
                                                const RunOptions& run, std::size_t n_max);

struct KilledEstimate {
  /// E[1_B(X^(k)(t)) exp(-int q_k)], the killed sub-transition.
  EstimatorResult killed;
  /// E[1_B(X^(k)(t))] for the frozen-regime diffusion.
  EstimatorResult frozen;
  /// E[exp(-int q_k)].
  EstimatorResult survival;
};

/// The regime of `start` is frozen; the target regime is ignored.
KilledEstimate estimate_killed_subtransition(const ModelSpec& spec, const HybridState& start, const TargetSet& target,
                                             const IntegratorConfig& cfg, const RunOptions& run);

// ---------------------------------------------------------------------------
// Occupation measures

/// Uniform cells on an axis box times regimes 1..k_max, plus one overflow cell (last index).
struct Partition {
  Vector lo;
  Vector hi;
  std::vector<int> cells;
  int k_max = 1;

  void validate(int dim) const;
  std::size_t size() const;
  std::size_t index(const HybridState& s) const;
};

struct InvariantOptions {
  double t_burn = 20.0;
  double t_end = 200.0;
  std::size_t paths_per_start = 64;
  std::uint64_t seed = 1;
};

struct InvariantReport {
  /// Time-averaged occupation per start over [t_burn, t_end], normalized to 1.
  std::vector<std::vector<double>> histograms;
  /// tv[i][j] between starts i and j.
  std::vector<std::vector<double>> tv;
  /// Per start, TV between the first and second halves of the window.
  std::vector<double> window_tv;
  std::vector<std::size_t> n_censored;
};

InvariantReport estimate_invariant(const ModelSpec& spec, const std::vector<HybridState>& starts,
                                   const Partition& partition, const IntegratorConfig& cfg,
                                   const InvariantOptions& opts);

// ---------------------------------------------------------------------------
// Generator checks

struct CouplingDriftPair {
  Vector x;
  Vector x_tilde;
  int k = 1;
};

struct CouplingDriftResult {
  CouplingDriftPair pair;
  /// (E G(|Delta_h|) - G(|Delta_0|)) / h.
  EstimatorResult drift;
  /// Same at h / 2.
  EstimatorResult drift_half;
  double bias_allowance = 0.0;
  double beta = 0.0;  // 2 lambda_R
  /// drift <= -beta + 4 (stderr + bias_allowance).
  bool holds = false;
};

/// Reflection coupling with lambda_R taken from G. Pairs must satisfy |x| v |x~| <= R and
/// 0 < |x - x~| <= alpha ^ delta0 (alpha replaced by 1 when G flags it degenerate).
std::vector<CouplingDriftResult> verify_coupling_drift(const ModelSpec& spec, const GFunction& G,
                                                       const std::vector<CouplingDriftPair>& pairs, double h,
                                                       const CouplingConfig& cfg, const RunOptions& run);

struct DynkinResult {
  /// (E f(X_t, L_t) - f(x,k)) / t.
  EstimatorResult lhs;
  /// Same at t / 2 on the same seeds.
  EstimatorResult lhs_half;
  GeneratorValue rhs;
  /// 2 |lhs(t) - lhs(t/2)| + generator bracket.
  double bias_allowance = 0.0;
  /// |lhs - rhs| / (stderr + bias_allowance).
  double z_score = 0.0;
};

/// t = cfg.horizon.
DynkinResult dynkin_check(const ModelSpec& spec, const TestFunction& f, const HybridState& start,
                          const IntegratorConfig& cfg, const RunOptions& run, const GeneratorOptions& gen = {});

}  // namespace swjd
