#pragma once

#include "swjd/linalg.hpp"
#include "swjd/model.hpp"
#include "swjd/rng.hpp"
#include "swjd/simulate.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace swjd {

enum class CouplingKind { basic, reflection };

const char* to_string(CouplingKind k);
CouplingKind parse_coupling_kind(const std::string& s);

struct CouplingConfig {
  CouplingKind kind = CouplingKind::basic;
  IntegratorConfig integrator;
  /// Reflection strength; the model's ellipticity floor when unset.
  std::optional<double> lambda_R;
  /// Radius R of the ball defining tau_R.
  double ball_radius = 10.0;
  double delta0 = 1.0;
  /// Coalescence threshold; 1e-6 (1 + |x|) when unset.
  std::optional<double> eta;
  /// Detect meetings between grid points with the Brownian-bridge crossing probability.
  bool bridge_test = true;

  void validate(const ModelSpec& spec) const;
};

struct CouplingMarks {
  std::optional<double> tau_R;     // first |X| v |X~| > R
  std::optional<double> S_delta0;  // first |X~ - X| > delta0
  std::optional<double> zeta;      // first time the regimes differ
  std::optional<double> T;         // first meeting of the analog components
  std::optional<double> T_tilde;   // first meeting with equal regimes; paths are merged from here on
};

struct CoupledPathRecord {
  std::vector<double> times;
  std::vector<HybridState> first;
  std::vector<HybridState> second;
  std::vector<double> distance;
  CouplingMarks marks;
  bool coalesced = false;
  std::uint64_t seed = 0;
  std::optional<double> exit_time;
  /// Steps at which a slightly negative eigenvalue of a - lambda_R I was clamped.
  long clamp_warnings = 0;
  HybridState terminal_first;
  HybridState terminal_second;

  bool exited() const { return exit_time.has_value(); }
};

/// Basic coupling of two rate rows: joint moves at min(r1, r2), residual moves
/// for one component only. Rows are indexed by target regime.
struct SwitchRates {
  double joint = 0.0;
  double first_only = 0.0;
  double second_only = 0.0;
  double total() const { return joint + first_only + second_only; }
};

class CoupledScheme {
 public:
  CoupledScheme(const ModelSpec& spec, const CouplingConfig& cfg);

  const EulerScheme& marginal() const { return scheme_; }
  const CouplingConfig& config() const { return cfg_; }
  double lambda_R() const { return lambda_; }

  /// sigma_{lambda_R}(x,k) = (a(x,k) - lambda_R I)^(1/2).
  PsdSqrt reduced_root(const Vector& x, int k) const;
  /// Cross-covariance g^ of the reflection noise.
  Matrix reflection_cross_covariance(const Vector& x, int i, const Vector& z, int j) const;

  /// Regime pair after one step of the basic switching coupling.
  std::pair<int, int> sample_switch(const Vector& x, int i, const Vector& z, int j, double dt, Rng& rng) const;
  SwitchRates switch_rates(const Vector& x, int i, const Vector& z, int j) const;

 private:
  const ModelSpec& spec_;
  CouplingConfig cfg_;
  EulerScheme scheme_;
  double lambda_ = 0.0;
};

/// Synchronous Brownian and jump noise; regimes by the basic coupling.
CoupledPathRecord couple_basic(const ModelSpec& spec, const HybridState& start, const HybridState& start2,
                               const CouplingConfig& cfg, std::uint64_t seed);
/// Reflection of the lambda_R-part of the Brownian noise across the hyperplane orthogonal to X~ - X.
CoupledPathRecord couple_reflection(const ModelSpec& spec, const HybridState& start, const HybridState& start2,
                                    const CouplingConfig& cfg, std::uint64_t seed);
/// Dispatches on cfg.kind with a prebuilt scheme.
CoupledPathRecord couple(const CoupledScheme& scheme, const HybridState& start, const HybridState& start2,
                         std::uint64_t seed);

/// Brownian parts (dX, dX~) of one reflection-coupled step from frozen states.
std::pair<Vector, Vector> reflection_noise_increment(const CoupledScheme& scheme, const Vector& x, int i,
                                                     const Vector& z, int j, double dt, Rng& rng);

}  // namespace swjd
