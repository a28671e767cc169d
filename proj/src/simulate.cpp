#include "swjd/simulate.hpp"

#include "swjd/linalg.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace swjd {

const char* to_string(SmallJumpPolicy p) { return p == SmallJumpPolicy::drop ? "drop" : "gaussian"; }

SmallJumpPolicy parse_small_jump_policy(const std::string& s) {
  if (s == "drop" || s == "drop-compensated") return SmallJumpPolicy::drop;
  if (s == "gaussian" || s == "gaussian-substitute") return SmallJumpPolicy::gaussian;
  throw InvalidInput("unknown small-jump policy '" + s + "' (expected drop or gaussian)");
}

void IntegratorConfig::validate(const ModelSpec& spec) const {
  require(std::isfinite(step) && step > 0.0, "step must be positive");
  require(std::isfinite(horizon) && horizon > 0.0, "horizon must be positive");
  require(step <= horizon * (1.0 + 1e-12), "step must not exceed the horizon");
  require(horizon / step < 1e9, "too many steps");
  require(regime_rel_tol > 0.0 && regime_rel_tol < 1.0, "regime truncation tolerance must lie in (0, 1)");
  require(exit_radius > 0.0, "exit radius must be positive");
  require(record_stride >= 0, "record stride must be >= 0");
  require(cache_cell > 0.0, "cache cell width must be positive");
  if (cutoff && spec.jumps.measure) {
    require(*cutoff > 0.0 && *cutoff < spec.jumps.measure->outer_radius(),
            "jump cutoff must lie inside the mark domain");
  }
}

long IntegratorConfig::n_steps() const {
  const double r = horizon / step;
  const long n = std::lround(r);
  if (std::abs(r - static_cast<double>(n)) <= 1e-9 * r) return std::max(1L, n);
  return static_cast<long>(std::ceil(r));
}

double IntegratorConfig::step_length(long n) const {
  const long N = n_steps();
  if (n + 1 < N) return step;
  return horizon - step * static_cast<double>(N - 1);
}

// ---------------------------------------------------------------------------

EulerScheme::EulerScheme(const ModelSpec& spec, const IntegratorConfig& cfg) : spec_(spec), cfg_(cfg) {
  check_model(spec);
  cfg.validate(spec);
  if (spec.has_jumps()) {
    eps_ = cfg.cutoff.value_or(spec.jumps.cutoff);
    large_rate_ = spec.jumps.measure->mass_outside(eps_);
    closed_compensator_ = static_cast<bool>(spec.jumps.compensator);
    closed_cov_ = static_cast<bool>(spec.jumps.small_jump_cov);
  }
}

const EulerScheme::CellValue& EulerScheme::cached(const Vector& x, int k) const {
  CellKey key{k, {}};
  key.cell.fill(0);
  Vector center(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    key.cell[i] = static_cast<long>(std::floor(x(i) / cfg_.cache_cell));
    center(i) = (static_cast<double>(key.cell[i]) + 0.5) * cfg_.cache_cell;
  }
  {
    std::shared_lock lock(cache_mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return *it->second;
  }
  auto value = std::make_unique<CellValue>();
  if (!closed_compensator_) value->compensator = jump_compensator(spec_, center, k, eps_);
  if (!closed_cov_) {
    value->cov = small_jump_covariance(spec_, center, k, eps_);
    value->cov_root = sqrt_psd(value->cov, 1e-9 * (1.0 + value->cov.norm())).root;
  }
  std::unique_lock lock(cache_mutex_);
  auto [it, inserted] = cache_.emplace(key, std::move(value));
  return *it->second;
}

Vector EulerScheme::drift_increment(const Vector& x, int k, double dt) const {
  Vector b = spec_.drift(x, k);
  if (spec_.has_jumps()) {
    if (closed_compensator_) b -= spec_.jumps.compensator(x, k, eps_);
    else b -= cached(x, k).compensator;
  }
  return b * dt;
}

Vector EulerScheme::diffusion_increment(const Vector& x, int k, const Vector& dW) const {
  return spec_.diffusion(x, k) * dW;
}

Vector EulerScheme::small_jump_increment(const Vector& x, int k, const Vector& z, double dt) const {
  if (!spec_.has_jumps() || cfg_.small_jumps == SmallJumpPolicy::drop) return Vector::Zero(spec_.dim);
  const double s = std::sqrt(dt);
  if (!closed_cov_) return s * (cached(x, k).cov_root * z);
  const Matrix cov = spec_.jumps.small_jump_cov(x, k, eps_);
  if (spec_.dim == 1) return Vector::Constant(1, s * std::sqrt(std::max(0.0, cov(0, 0))) * z(0));
  return s * (sqrt_psd(cov, 1e-9 * (1.0 + cov.norm())).root * z);
}

double EulerScheme::small_jump_variance(const Vector& x, int k) const {
  if (!spec_.has_jumps()) return 0.0;
  if (closed_cov_) return spec_.jumps.small_jump_cov(x, k, eps_).trace();
  return cached(x, k).cov.trace();
}

Vector EulerScheme::jump_displacement(const Vector& x, int k, const Vector& u) const { return spec_.jump(x, k, u); }

void EulerScheme::draw_marks(Rng& rng, double dt, std::vector<Vector>& marks) const {
  marks.clear();
  if (!spec_.has_jumps()) return;
  const double mean = large_rate_ * dt;
  long count = 0;
  if (mean < 30.0) {
    // Inversion by products of uniforms.
    const double limit = std::exp(-mean);
    double prod = rng.uniform();
    while (prod > limit) {
      ++count;
      prod *= rng.uniform();
    }
  } else {
    std::poisson_distribution<long> poisson(mean);
    count = poisson(rng);
  }
  for (long i = 0; i < count; ++i) marks.push_back(spec_.jumps.measure->sample_outside(eps_, rng));
}

double EulerScheme::exit_rate(const Vector& x, int k) const {
  if (!spec_.rates.switching()) return 0.0;
  if (spec_.rates.row_sum) return spec_.rates.row_sum(x, k);
  thread_local RowTruncation row;
  q_row_truncated_into(spec_.rates, x, k, cfg_.regime_rel_tol, row);
  return row.partial_sum;
}

int EulerScheme::switch_target(const Vector& x, int k, double total, double uniform) const {
  const double target = uniform * total;
  const int cap = spec_.rates.max_regime ? std::min(spec_.rates.max_terms, *spec_.rates.max_regime)
                                         : spec_.rates.max_terms;
  double cumulative = 0.0;
  int last_positive = k;
  for (int l = 1; l <= cap; ++l) {
    if (l == k) continue;
    const double q = spec_.rates.rate(x, k, l);
    if (q > 0.0) last_positive = l;
    cumulative += q;
    if (cumulative > target) return l;
    // Remaining mass below rounding: the walk has covered the row.
    if (total - cumulative <= 1e-14 * total) return last_positive;
  }
  return last_positive;
}

int EulerScheme::sample_switch(const Vector& x, int k, double dt, Rng& rng) const {
  if (!spec_.rates.switching()) return k;
  const double q = exit_rate(x, k);
  if (!(q > 0.0)) return k;
  if (rng.uniform() >= -std::expm1(-q * dt)) return k;
  return switch_target(x, k, q, rng.uniform());
}

// ---------------------------------------------------------------------------

namespace {

void standard_normals(Rng& rng, Vector& z) {
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
}

bool escaped(const Vector& x, double radius) { return !x.allFinite() || x.norm() > radius; }

}  // namespace

PathRecord simulate_path(const ModelSpec& spec, const HybridState& start, const IntegratorConfig& cfg,
                         std::uint64_t seed) {
  const EulerScheme scheme(spec, cfg);
  return simulate_path(scheme, start, seed);
}

PathRecord simulate_path(const EulerScheme& scheme, const HybridState& start, std::uint64_t seed) {
  const ModelSpec& spec = scheme.spec();
  const IntegratorConfig& cfg = scheme.config();
  require_state(start, spec.dim);
  PathRecord rec;
  rec.seed = seed;
  Rng rng(seed);
  Vector x = start.x;
  int k = start.k;
  rec.times.push_back(0.0);
  rec.states.push_back(start);

  const long N = cfg.n_steps();
  const int d = spec.dim;
  Vector dW(d), z(d);
  std::vector<Vector> marks;
  for (long n = 0; n < N; ++n) {
    const double dt = cfg.step_length(n);
    const double t = n + 1 == N ? cfg.horizon : cfg.step * static_cast<double>(n + 1);
    standard_normals(rng, dW);
    dW *= std::sqrt(dt);
    Vector dx = scheme.drift_increment(x, k, dt) + scheme.diffusion_increment(x, k, dW);
    if (spec.has_jumps()) {
      if (cfg.small_jumps == SmallJumpPolicy::gaussian) {
        standard_normals(rng, z);
        dx += scheme.small_jump_increment(x, k, z, dt);
      } else {
        rec.neglected_variance += scheme.small_jump_variance(x, k) * dt;
      }
      scheme.draw_marks(rng, dt, marks);
      for (const Vector& u : marks) {
        const Vector c = scheme.jump_displacement(x, k, u);
        dx += c;
        if (cfg.record_events) rec.jump_events.push_back({t, u, c});
      }
    }
    const int l = scheme.sample_switch(x, k, dt, rng);
    x += dx;
    if (l != k) {
      if (cfg.record_events) rec.switch_events.push_back({t, k, l});
      k = l;
    }
    const bool out = escaped(x, cfg.exit_radius);
    if (out) rec.exit_time = t;
    const bool last = out || n + 1 == N;
    if (last || (cfg.record_stride > 0 && (n + 1) % cfg.record_stride == 0)) {
      rec.times.push_back(t);
      rec.states.emplace_back(x, k);
    }
    if (out) break;
  }
  rec.terminal = rec.states.back();
  return rec;
}

KilledPath simulate_killed_path(const ModelSpec& spec, const HybridState& start, const IntegratorConfig& cfg,
                                std::uint64_t seed) {
  const EulerScheme scheme(spec, cfg);
  return simulate_killed_path(scheme, start, seed);
}

KilledPath simulate_killed_path(const EulerScheme& scheme, const HybridState& start, std::uint64_t seed) {
  const ModelSpec& spec = scheme.spec();
  const IntegratorConfig& cfg = scheme.config();
  require_state(start, spec.dim);
  KilledPath out;
  PathRecord& rec = out.path;
  rec.seed = seed;
  Rng rng(seed);
  Vector x = start.x;
  const int k = start.k;
  rec.times.push_back(0.0);
  rec.states.push_back(start);

  const long N = cfg.n_steps();
  const int d = spec.dim;
  Vector dW(d), z(d);
  std::vector<Vector> marks;
  double q_prev = scheme.exit_rate(x, k);
  double integral = 0.0;
  for (long n = 0; n < N; ++n) {
    const double dt = cfg.step_length(n);
    const double t = n + 1 == N ? cfg.horizon : cfg.step * static_cast<double>(n + 1);
    standard_normals(rng, dW);
    dW *= std::sqrt(dt);
    Vector dx = scheme.drift_increment(x, k, dt) + scheme.diffusion_increment(x, k, dW);
    if (spec.has_jumps()) {
      if (cfg.small_jumps == SmallJumpPolicy::gaussian) {
        standard_normals(rng, z);
        dx += scheme.small_jump_increment(x, k, z, dt);
      } else {
        rec.neglected_variance += scheme.small_jump_variance(x, k) * dt;
      }
      scheme.draw_marks(rng, dt, marks);
      for (const Vector& u : marks) {
        const Vector c = scheme.jump_displacement(x, k, u);
        dx += c;
        if (cfg.record_events) rec.jump_events.push_back({t, u, c});
      }
    }
    x += dx;
    const bool out_of_range = escaped(x, cfg.exit_radius);
    if (out_of_range) {
      rec.exit_time = t;
    } else {
      const double q = scheme.exit_rate(x, k);
      integral += 0.5 * (q_prev + q) * dt;
      q_prev = q;
    }
    const bool last = out_of_range || n + 1 == N;
    if (last || (cfg.record_stride > 0 && (n + 1) % cfg.record_stride == 0)) {
      rec.times.push_back(t);
      rec.states.emplace_back(x, k);
    }
    if (out_of_range) break;
  }
  rec.terminal = rec.states.back();
  out.survival_weight = std::exp(-integral);
  return out;
}

}  // namespace swjd
