#include "swjd/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace swjd {

const char* to_string(CouplingKind k) { return k == CouplingKind::basic ? "basic" : "reflection"; }

CouplingKind parse_coupling_kind(const std::string& s) {
  if (s == "basic" || s == "basic-synchronous" || s == "synchronous") return CouplingKind::basic;
  if (s == "reflection") return CouplingKind::reflection;
  throw InvalidInput("unknown coupling '" + s + "' (expected basic or reflection)");
}

void CouplingConfig::validate(const ModelSpec& spec) const {
  integrator.validate(spec);
  require(ball_radius > 0.0, "ball radius R must be positive");
  require(delta0 > 0.0, "delta0 must be positive");
  if (eta) require(*eta > 0.0, "coalescence threshold eta must be positive");
  if (kind == CouplingKind::reflection) {
    const std::optional<double> lambda = lambda_R ? lambda_R : spec.ellipticity;
    require(lambda.has_value(), "reflection coupling needs lambda_R (the model declares no ellipticity floor)");
    require(*lambda > 0.0, "lambda_R must be positive");
    if (spec.ellipticity) {
      require(*lambda <= *spec.ellipticity * (1.0 + 1e-12), "lambda_R exceeds the model's ellipticity floor");
    }
  }
}

// ---------------------------------------------------------------------------

CoupledScheme::CoupledScheme(const ModelSpec& spec, const CouplingConfig& cfg)
    : spec_(spec), cfg_(cfg), scheme_(spec, cfg.integrator) {
  cfg.validate(spec);
  if (cfg.kind == CouplingKind::reflection) lambda_ = cfg.lambda_R ? *cfg.lambda_R : *spec.ellipticity;
}

PsdSqrt CoupledScheme::reduced_root(const Vector& x, int k) const {
  const Matrix a = spec_.covariance(x, k);
  if (a.rows() == 1) {
    PsdSqrt out;
    const double v = a(0, 0) - lambda_;
    out.min_eigenvalue = v;
    if (v < -1e-6) {
      std::ostringstream msg;
      msg << "a - lambda_R I is not positive semidefinite at x = " << x(0) << ": " << v;
      throw NumericError(msg.str());
    }
    out.clamped = v < 0.0;
    out.root = Matrix::Constant(1, 1, std::sqrt(std::max(v, 0.0)));
    return out;
  }
  return sqrt_psd(a - lambda_ * Matrix::Identity(a.rows(), a.cols()), 1e-6);
}

Matrix CoupledScheme::reflection_cross_covariance(const Vector& x, int i, const Vector& z, int j) const {
  const Vector delta = z - x;
  require(delta.norm() > 0.0, "reflection direction is undefined for equal points");
  const Vector u = delta / delta.norm();
  return lambda_ * reflection_matrix(u) + reduced_root(x, i).root * reduced_root(z, j).root.transpose();
}

namespace {

struct DenseRows {
  std::vector<double> r1;  // index l - 1
  std::vector<double> r2;
};

}  // namespace

SwitchRates CoupledScheme::switch_rates(const Vector& x, int i, const Vector& z, int j) const {
  thread_local RowTruncation a, b;
  SwitchRates out;
  if (!spec_.rates.switching()) return out;
  const double tol = cfg_.integrator.regime_rel_tol;
  q_row_truncated_into(spec_.rates, x, i, tol, a);
  q_row_truncated_into(spec_.rates, z, j, tol, b);
  const int L = std::max({a.level, b.level, i, j});
  for (int l = 1; l <= L; ++l) {
    const double r1 = l == i ? 0.0 : spec_.rates.rate(x, i, l);
    const double r2 = l == j ? 0.0 : spec_.rates.rate(z, j, l);
    out.joint += std::min(r1, r2);
    out.first_only += std::max(r1 - r2, 0.0);
    out.second_only += std::max(r2 - r1, 0.0);
  }
  return out;
}

std::pair<int, int> CoupledScheme::sample_switch(const Vector& x, int i, const Vector& z, int j, double dt,
                                                 Rng& rng) const {
  if (!spec_.rates.switching()) return {i, j};
  // q_i(x) + q_j(z) dominates the coupled rate, so most steps stop here.
  const double dominating = scheme_.exit_rate(x, i) + scheme_.exit_rate(z, j);
  const double u = rng.uniform();
  if (!(dominating > 0.0) || u >= -std::expm1(-dominating * dt)) return {i, j};

  thread_local RowTruncation a, b;
  const double tol = cfg_.integrator.regime_rel_tol;
  q_row_truncated_into(spec_.rates, x, i, tol, a);
  q_row_truncated_into(spec_.rates, z, j, tol, b);
  const int L = std::max({a.level, b.level, i, j});
  thread_local DenseRows rows;
  rows.r1.assign(L, 0.0);
  rows.r2.assign(L, 0.0);
  double joint = 0.0, first = 0.0, second = 0.0;
  for (int l = 1; l <= L; ++l) {
    const double r1 = l == i ? 0.0 : spec_.rates.rate(x, i, l);
    const double r2 = l == j ? 0.0 : spec_.rates.rate(z, j, l);
    rows.r1[l - 1] = r1;
    rows.r2[l - 1] = r2;
    joint += std::min(r1, r2);
    first += std::max(r1 - r2, 0.0);
    second += std::max(r2 - r1, 0.0);
  }
  const double total = joint + first + second;
  if (!(total > 0.0) || u >= -std::expm1(-total * dt)) return {i, j};

  double v = rng.uniform() * total;
  auto pick = [&](auto weight) {
    double cumulative = 0.0;
    int last = 0;
    for (int l = 1; l <= L; ++l) {
      const double w = weight(rows.r1[l - 1], rows.r2[l - 1]);
      if (w > 0.0) last = l;
      cumulative += w;
      if (cumulative > v) return l;
    }
    return last;
  };
  if (v < joint) {
    const int l = pick([](double p, double q) { return std::min(p, q); });
    return {l, l};
  }
  v -= joint;
  if (v < first) return {pick([](double p, double q) { return std::max(p - q, 0.0); }), j};
  v -= first;
  return {i, pick([](double p, double q) { return std::max(q - p, 0.0); })};
}

// ---------------------------------------------------------------------------

namespace {

void standard_normals(Rng& rng, Vector& z) {
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
}

}  // namespace

std::pair<Vector, Vector> reflection_noise_increment(const CoupledScheme& scheme, const Vector& x, int i,
                                                     const Vector& z, int j, double dt, Rng& rng) {
  const Eigen::Index d = x.size();
  Vector dW1(d), dW2(d);
  standard_normals(rng, dW1);
  standard_normals(rng, dW2);
  dW1 *= std::sqrt(dt);
  dW2 *= std::sqrt(dt);
  const Vector delta = z - x;
  require(delta.norm() > 0.0, "reflection direction is undefined for equal points");
  const Vector u = delta / delta.norm();
  const double s = std::sqrt(scheme.lambda_R());
  Vector dx = scheme.reduced_root(x, i).root * dW1 + s * dW2;
  Vector dz = scheme.reduced_root(z, j).root * dW1 + s * (dW2 - 2.0 * u * u.dot(dW2));
  return {dx, dz};
}

CoupledPathRecord couple(const CoupledScheme& cs, const HybridState& start, const HybridState& start2,
                         std::uint64_t seed) {
  const EulerScheme& scheme = cs.marginal();
  const ModelSpec& spec = scheme.spec();
  const CouplingConfig& cfg = cs.config();
  const IntegratorConfig& icfg = cfg.integrator;
  require_state(start, spec.dim);
  require_state(start2, spec.dim);
  require(start.k == start2.k, "coupled starts must share the regime");
  const bool reflect = cfg.kind == CouplingKind::reflection;

  CoupledPathRecord rec;
  rec.seed = seed;
  Rng rng(seed);
  Vector x = start.x, z = start2.x;
  int k = start.k, j = start2.k;
  const double eta = cfg.eta.value_or(1e-6 * (1.0 + start.x.norm()));

  auto update_marks = [&](double t) {
    if (!rec.marks.tau_R && std::max(x.norm(), z.norm()) > cfg.ball_radius) rec.marks.tau_R = t;
    if (!rec.marks.S_delta0 && (z - x).norm() > cfg.delta0) rec.marks.S_delta0 = t;
    if (!rec.marks.zeta && k != j) rec.marks.zeta = t;
  };
  auto record = [&](double t) {
    rec.times.push_back(t);
    rec.first.emplace_back(x, k);
    rec.second.emplace_back(z, j);
    rec.distance.push_back((z - x).norm());
  };

  if (x == z) {
    rec.coalesced = true;
    rec.marks.T = 0.0;
    rec.marks.T_tilde = 0.0;
  }
  update_marks(0.0);
  record(0.0);

  const long N = icfg.n_steps();
  const int d = spec.dim;
  const double sqrt_lambda = std::sqrt(cs.lambda_R());
  Vector dW1(d), dW2(d), gz(d);
  std::vector<Vector> marks;
  for (long n = 0; n < N; ++n) {
    const double dt = icfg.step_length(n);
    const double t = n + 1 == N ? icfg.horizon : icfg.step * static_cast<double>(n + 1);
    standard_normals(rng, dW1);
    dW1 *= std::sqrt(dt);

    Vector dx = scheme.drift_increment(x, k, dt);
    Vector dz = rec.coalesced ? dx : scheme.drift_increment(z, j, dt);
    Vector u_dir;
    PsdSqrt root_x, root_z;
    if (rec.coalesced) {
      dx += scheme.diffusion_increment(x, k, dW1);
    } else if (reflect) {
      standard_normals(rng, dW2);
      dW2 *= std::sqrt(dt);
      const Vector delta = z - x;
      u_dir = delta / delta.norm();
      root_x = cs.reduced_root(x, k);
      root_z = cs.reduced_root(z, j);
      rec.clamp_warnings += root_x.clamped + root_z.clamped;
      dx += root_x.root * dW1 + sqrt_lambda * dW2;
      dz += root_z.root * dW1 + sqrt_lambda * (dW2 - 2.0 * u_dir * u_dir.dot(dW2));
    } else {
      dx += scheme.diffusion_increment(x, k, dW1);
      dz += scheme.diffusion_increment(z, j, dW1);
    }

    if (spec.has_jumps()) {
      if (icfg.small_jumps == SmallJumpPolicy::gaussian) {
        standard_normals(rng, gz);
        dx += scheme.small_jump_increment(x, k, gz, dt);
        if (!rec.coalesced) dz += scheme.small_jump_increment(z, j, gz, dt);
      }
      scheme.draw_marks(rng, dt, marks);
      for (const Vector& u : marks) {
        dx += scheme.jump_displacement(x, k, u);
        if (!rec.coalesced) dz += scheme.jump_displacement(z, j, u);
      }
    }

    int k_next = k, j_next = j;
    if (rec.coalesced) {
      k_next = j_next = scheme.sample_switch(x, k, dt, rng);
    } else {
      std::tie(k_next, j_next) = cs.sample_switch(x, k, z, j, dt, rng);
    }

    if (rec.coalesced) {
      x += dx;
      z = x;
    } else {
      const Vector delta_old = z - x;
      x += dx;
      z += dz;
      bool met = false;
      if (reflect) {
        const double p0 = delta_old.norm();
        const Vector delta_new = z - x;
        const double p1 = delta_new.dot(u_dir);
        met = p1 <= 0.0 || delta_new.norm() < eta;
        if (!met && cfg.bridge_test) {
          // Variance rate of <X~ - X, u> is |(S_z - S_x)^T u|^2 + 4 lambda_R.
          const Vector w = (root_z.root - root_x.root).transpose() * u_dir;
          const double rate = w.squaredNorm() + 4.0 * cs.lambda_R();
          met = rng.uniform() < std::exp(-2.0 * p0 * p1 / (rate * dt));
        }
      } else {
        met = (z.array() == x.array()).all();
      }
      if (met) {
        if (!rec.marks.T) rec.marks.T = t;
        if (k_next == j_next) {
          z = x;
          rec.coalesced = true;
          rec.marks.T_tilde = t;
        }
      }
    }
    k = k_next;
    j = j_next;
    update_marks(t);

    const bool out = !x.allFinite() || !z.allFinite() || x.norm() > icfg.exit_radius || z.norm() > icfg.exit_radius;
    if (out) rec.exit_time = t;
    const bool last = out || n + 1 == N;
    if (last || (icfg.record_stride > 0 && (n + 1) % icfg.record_stride == 0)) record(t);
    if (out) break;
  }
  rec.terminal_first = rec.first.back();
  rec.terminal_second = rec.second.back();
  return rec;
}

CoupledPathRecord couple_basic(const ModelSpec& spec, const HybridState& start, const HybridState& start2,
                               const CouplingConfig& cfg, std::uint64_t seed) {
  CouplingConfig c = cfg;
  c.kind = CouplingKind::basic;
  const CoupledScheme scheme(spec, c);
  return couple(scheme, start, start2, seed);
}

CoupledPathRecord couple_reflection(const ModelSpec& spec, const HybridState& start, const HybridState& start2,
                                    const CouplingConfig& cfg, std::uint64_t seed) {
  CouplingConfig c = cfg;
  c.kind = CouplingKind::reflection;
  const CoupledScheme scheme(spec, c);
  return couple(scheme, start, start2, seed);
}

}  // namespace swjd
