#pragma once

#include "swjd/model.hpp"
#include "swjd/rng.hpp"
#include "swjd/types.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <vector>

namespace swjd {

enum class SmallJumpPolicy { drop, gaussian };

const char* to_string(SmallJumpPolicy p);
SmallJumpPolicy parse_small_jump_policy(const std::string& s);

struct IntegratorConfig {
  double step = 1e-3;
  double horizon = 1.0;
  SmallJumpPolicy small_jumps = SmallJumpPolicy::drop;
  std::optional<double> cutoff;  // model's cutoff when unset
  double regime_rel_tol = 1e-12;
  double exit_radius = 1e6;
  /// Grid points kept: every `record_stride` steps plus the terminal point; 0 keeps only the ends.
  int record_stride = 1;
  bool record_events = true;
  /// Cell width of the cache for quadrature-evaluated jump integrals.
  double cache_cell = 1e-2;

  void validate(const ModelSpec& spec) const;
  /// Number of steps; the last step is shortened to land on the horizon.
  long n_steps() const;
  double step_length(long n) const;
};

struct SwitchEvent {
  double time = 0.0;
  int from = 0;
  int to = 0;
};

struct JumpEvent {
  double time = 0.0;
  Vector mark;
  Vector displacement;
};

struct PathRecord {
  std::vector<double> times;
  std::vector<HybridState> states;
  std::vector<SwitchEvent> switch_events;
  std::vector<JumpEvent> jump_events;
  std::uint64_t seed = 0;
  std::optional<double> exit_time;
  /// Integrated variance of the dropped small-jump part, int_0^T tr Sigma_eps(X) dt.
  double neglected_variance = 0.0;
  /// State at the horizon, or at exit.
  HybridState terminal;

  bool exited() const { return exit_time.has_value(); }
};

/// One Euler-Maruyama step split into pieces so couplings can share noise.
/// Thread safe: the only mutable state is a cell cache behind a lock.
class EulerScheme {
 public:
  EulerScheme(const ModelSpec& spec, const IntegratorConfig& cfg);

  const ModelSpec& spec() const { return spec_; }
  const IntegratorConfig& config() const { return cfg_; }
  int dim() const { return spec_.dim; }
  double cutoff() const { return eps_; }
  double large_jump_rate() const { return large_rate_; }

  /// (b(x,k) - int_{|u|>eps} c nu) dt.
  Vector drift_increment(const Vector& x, int k, double dt) const;
  /// sigma(x,k) dW.
  Vector diffusion_increment(const Vector& x, int k, const Vector& dW) const;
  /// Gaussian stand-in for the small jumps, (Sigma_eps dt)^(1/2) z; zero under the drop policy.
  Vector small_jump_increment(const Vector& x, int k, const Vector& z, double dt) const;
  /// sum c(x,k,u_i) over the marks drawn for this step.
  Vector jump_displacement(const Vector& x, int k, const Vector& u) const;
  double small_jump_variance(const Vector& x, int k) const;

  void draw_marks(Rng& rng, double dt, std::vector<Vector>& marks) const;

  /// q_k(x), exact when the model supplies it, certified truncation otherwise.
  double exit_rate(const Vector& x, int k) const;
  /// Target regime for a switch out of k drawn by inverse CDF with the given uniform.
  int switch_target(const Vector& x, int k, double total, double uniform) const;
  /// k, or the new regime when a switch occurs within dt.
  int sample_switch(const Vector& x, int k, double dt, Rng& rng) const;

 private:
  struct CellKey {
    int k;
    std::array<long, kMaxDim> cell;
    bool operator<(const CellKey& o) const { return k != o.k ? k < o.k : cell < o.cell; }
  };
  struct CellValue {
    Vector compensator;
    Matrix cov;
    Matrix cov_root;
  };
  const CellValue& cached(const Vector& x, int k) const;

  const ModelSpec& spec_;
  IntegratorConfig cfg_;
  double eps_ = 0.0;
  double large_rate_ = 0.0;
  bool closed_compensator_ = false;
  bool closed_cov_ = false;
  mutable std::shared_mutex cache_mutex_;
  mutable std::map<CellKey, std::unique_ptr<CellValue>> cache_;
};

PathRecord simulate_path(const ModelSpec& spec, const HybridState& start, const IntegratorConfig& cfg,
                         std::uint64_t seed);
PathRecord simulate_path(const EulerScheme& scheme, const HybridState& start, std::uint64_t seed);

struct KilledPath {
  PathRecord path;
  double survival_weight = 1.0;  // exp(-int_0^T q_k(X(s)) ds), trapezoid rule
};

/// Regime frozen at start.k; the exit rate q_k enters only through the weight.
KilledPath simulate_killed_path(const ModelSpec& spec, const HybridState& start, const IntegratorConfig& cfg,
                                std::uint64_t seed);
KilledPath simulate_killed_path(const EulerScheme& scheme, const HybridState& start, std::uint64_t seed);

}  // namespace swjd
