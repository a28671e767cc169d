#include "swjd/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace swjd {

void check_model(const ModelSpec& spec) {
  require(spec.dim >= 1 && spec.dim <= kMaxDim, "model dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  require(static_cast<bool>(spec.drift), "model '" + spec.name + "' has no drift");
  require(static_cast<bool>(spec.diffusion), "model '" + spec.name + "' has no diffusion coefficient");
  if (spec.jump) require(spec.jumps.measure != nullptr, "jump coefficient given without a jump measure");
  if (spec.jumps.measure) {
    require(spec.jumps.cutoff > 0.0 && spec.jumps.cutoff < spec.jumps.measure->outer_radius(),
            "jump cutoff must lie inside the mark domain");
    require(std::isfinite(spec.jumps.large_jump_rate()), "large-jump rate must be finite");
  }
  if (spec.ellipticity) require(*spec.ellipticity > 0.0, "declared ellipticity floor must be positive");
  if (spec.growth) require(*spec.growth > 0.0, "declared growth constant must be positive");
}

// ---------------------------------------------------------------------------

std::optional<double> rate_tail_bound(const RateMatrixSpec& spec, int k, int L) {
  if (!spec.switching()) return 0.0;
  if (spec.max_regime && L >= *spec.max_regime) return 0.0;
  std::optional<double> best;
  if (spec.tail_bound) best = spec.tail_bound(k, L);
  if (spec.uniform_bound) {
    // sum_{l > L} kappa_0 l 3^-l = kappa_0 3^-L (2L + 3) / 4
    const double b = *spec.uniform_bound * std::pow(3.0, -L) * (2.0 * L + 3.0) / 4.0;
    best = best ? std::min(*best, b) : b;
  }
  return best;
}

void q_row_truncated_into(const RateMatrixSpec& spec, const Vector& x, int k, double rel_tol, RowTruncation& out) {
  require(rel_tol > 0.0, "truncation tolerance must be positive");
  out.rates.clear();
  out.partial_sum = 0.0;
  out.certified_tail = 0.0;
  out.level = 0;
  if (!spec.switching()) return;

  const bool have_bound = rate_tail_bound(spec, k, 0).has_value();
  if (!have_bound && !spec.row_sum && !spec.max_regime) {
    throw TruncationError("rate row cannot be truncated: no tail bound, kappa_0, finite support or row sum");
  }
  const double exact_row = (!have_bound && spec.row_sum) ? spec.row_sum(x, k) : 0.0;

  auto tail_at = [&](int L) {
    if (spec.max_regime && L >= *spec.max_regime) return 0.0;
    if (have_bound) return *rate_tail_bound(spec, k, L);
    if (spec.row_sum) return std::max(0.0, exact_row - out.partial_sum);
    return std::numeric_limits<double>::infinity();
  };

  const int cap = spec.max_regime ? std::min(spec.max_terms, *spec.max_regime) : spec.max_terms;
  for (int L = 0;; ++L) {
    if (L > 0 && L != k) {
      const double q = spec.rate(x, k, L);
      if (!(q >= 0.0) || !std::isfinite(q)) {
        std::ostringstream msg;
        msg << "rate q_" << k << "," << L << " is negative or non-finite (" << q << ")";
        throw NumericError(msg.str());
      }
      out.rates.emplace_back(L, q);
      out.partial_sum += q;
    }
    const double tail = tail_at(L);
    if (std::isfinite(tail) && tail <= rel_tol * (out.partial_sum + tail)) {
      out.certified_tail = tail;
      out.level = L;
      return;
    }
    if (L >= cap) break;
  }
  std::ostringstream msg;
  msg << "rate row k=" << k << " not truncated to relative tolerance " << rel_tol << " within " << cap
      << " terms";
  throw TruncationError(msg.str());
}

RowTruncation q_row_truncated(const RateMatrixSpec& spec, const Vector& x, int k, double rel_tol) {
  RowTruncation out;
  q_row_truncated_into(spec, x, k, rel_tol, out);
  return out;
}

RateDifference rate_difference_sum(const RateMatrixSpec& spec, const Vector& x, const Vector& y, int k,
                                   double abs_tol) {
  RateDifference out;
  if (!spec.switching()) return out;
  const int cap = spec.max_regime ? std::min(spec.max_terms, *spec.max_regime) : spec.max_terms;
  for (int L = 0;; ++L) {
    if (L > 0 && L != k) out.truncated += std::abs(spec.rate(x, k, L) - spec.rate(y, k, L));
    const auto tail = rate_tail_bound(spec, k, L);
    if (!tail) throw TruncationError("rate difference sum needs a uniform tail bound");
    if (2.0 * *tail <= abs_tol) {
      out.tail = 2.0 * *tail;
      out.level = L;
      return out;
    }
    if (L >= cap) throw TruncationError("rate difference sum not truncated within the term cap");
  }
}

// ---------------------------------------------------------------------------

Vector jump_compensator(const ModelSpec& spec, const Vector& x, int k, double eps, double rel_tol) {
  if (!spec.has_jumps()) return Vector::Zero(spec.dim);
  if (spec.jumps.compensator) return spec.jumps.compensator(x, k, eps);
  const JumpMeasure& nu = *spec.jumps.measure;
  Vector out(spec.dim);
  const double floor = 1e-13 * (1.0 + x.norm()) * nu.mass_outside(eps);
  for (int i = 0; i < spec.dim; ++i) {
    out(i) = nu.integrate([&](const Vector& u) { return spec.jump(x, k, u)(i); }, eps, nu.outer_radius(), rel_tol,
                          floor);
  }
  return out;
}

Matrix small_jump_covariance(const ModelSpec& spec, const Vector& x, int k, double eps, double rel_tol) {
  if (!spec.has_jumps()) return Matrix::Zero(spec.dim, spec.dim);
  if (spec.jumps.small_jump_cov) return spec.jumps.small_jump_cov(x, k, eps);
  const JumpMeasure& nu = *spec.jumps.measure;
  Matrix out(spec.dim, spec.dim);
  for (int i = 0; i < spec.dim; ++i) {
    for (int j = i; j < spec.dim; ++j) {
      out(i, j) = nu.integrate(
          [&](const Vector& u) {
            const Vector c = spec.jump(x, k, u);
            return c(i) * c(j);
          },
          0.0, eps, rel_tol, 1e-15 * (1.0 + x.squaredNorm()));
      out(j, i) = out(i, j);
    }
  }
  return out;
}

double jump_second_moment(const ModelSpec& spec, const Vector& x, int k, double rel_tol) {
  if (!spec.has_jumps()) return 0.0;
  if (spec.jumps.second_moment) return spec.jumps.second_moment(x, k);
  const JumpMeasure& nu = *spec.jumps.measure;
  return nu.integrate([&](const Vector& u) { return spec.jump(x, k, u).squaredNorm(); }, 0.0, nu.outer_radius(),
                      rel_tol, 0.0);
}

// ---------------------------------------------------------------------------

bool ValidationReport::any_violation() const {
  return std::any_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.violated; });
}

const AssumptionCheck* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

std::string point_string(const HybridState& s) {
  std::ostringstream o;
  o << "(";
  for (int i = 0; i < s.dim(); ++i) o << (i ? "," : "") << s.x(i);
  o << "; k=" << s.k << ")";
  return o.str();
}

/// Tracks the minimum slack of an inequality over probes.
class SlackTracker {
 public:
  SlackTracker(std::string name, std::string description, double tol = 0.0)
      : tol_(tol) {
    check_.name = std::move(name);
    check_.description = std::move(description);
    check_.margin = std::numeric_limits<double>::infinity();
    check_.worst_value = std::numeric_limits<double>::quiet_NaN();
  }

  void observe(const HybridState& at, double value, double slack) {
    ++count_;
    if (!std::isfinite(slack)) {
      if (!non_finite_) {
        non_finite_ = true;
        check_.worst_point = at;
        check_.worst_value = value;
        check_.margin = -std::numeric_limits<double>::infinity();
      }
      return;
    }
    if (!non_finite_ && slack < check_.margin) {
      check_.margin = slack;
      check_.worst_value = value;
      check_.worst_point = at;
    }
  }

  AssumptionCheck finish() {
    if (count_ == 0) {
      check_.applicable = false;
      check_.margin = 0.0;
      check_.message = "not applicable";
      return check_;
    }
    check_.violated = non_finite_ || check_.margin < -tol_;
    std::ostringstream msg;
    if (non_finite_) {
      msg << "non-finite value at " << point_string(*check_.worst_point);
    } else if (check_.violated) {
      msg << "violation at " << point_string(*check_.worst_point) << ": slack " << check_.margin;
    } else {
      msg << "no violation found at " << count_ << " probes (worst slack " << check_.margin << ")";
    }
    check_.message = msg.str();
    return check_;
  }

 private:
  AssumptionCheck check_;
  double tol_;
  std::size_t count_ = 0;
  bool non_finite_ = false;
};

AssumptionCheck not_declared(std::string name, std::string description) {
  AssumptionCheck c;
  c.name = std::move(name);
  c.description = std::move(description);
  c.applicable = false;
  c.message = "constant not declared by the model";
  return c;
}

}  // namespace

ValidationReport validate_model(const ModelSpec& spec, const std::vector<HybridState>& probes,
                                const std::vector<Vector>& directions, const ValidationOptions& opts) {
  require(!probes.empty(), "validate_model needs at least one probe point");
  for (const auto& p : probes) require_state(p, spec.dim);
  for (const auto& xi : directions) require(xi.size() == spec.dim, "direction dimension does not match the model");

  ValidationReport report;
  report.model = spec.name;
  report.n_points = probes.size();

  SlackTracker finite("coefficients_finite", "b, sigma, c and q_kl are finite at probes");
  SlackTracker psd("diffusion_psd", "a = sigma sigma^T is positive semidefinite (min eigenvalue)", 1e-12);
  SlackTracker ellip("ellipticity", "<xi, a xi> >= lambda |xi|^2 (worst value: min Rayleigh quotient)");
  SlackTracker drift_growth("growth_drift", "2<x, b> <= kappa (|x|^2 + 1)");
  SlackTracker noise_growth("growth_diffusion_jump", "|sigma|^2 + int |c|^2 nu <= kappa (|x|^2 + 1)");
  SlackTracker moment("jump_second_moment", "closed-form int |c|^2 nu agrees with quadrature (relative error)");
  SlackTracker nonneg("rates_nonnegative", "q_kl(x) >= 0 for l != k");
  SlackTracker rowsum("row_sum_consistency", "partial row sums <= q_k(x) <= partial + certified tail", 1e-12);
  SlackTracker kappa0("rate_uniform_bound", "q_kl(x) <= kappa_0 l 3^-l");
  SlackTracker tail_decay("tail_bound_decay", "regime tail bound decays to 0", 0.0);

  Rng rng(0x5eedULL);
  for (const auto& p : probes) {
    const Vector& x = p.x;
    const int k = p.k;
    const Vector b = spec.drift(x, k);
    const Matrix s = spec.diffusion(x, k);
    bool ok = b.allFinite() && s.allFinite();
    if (spec.has_jumps()) {
      const double eps = spec.jumps.cutoff;
      for (int j = 0; j < opts.mark_samples; ++j) {
        ok = ok && spec.jump(x, k, spec.jumps.measure->sample_outside(eps, rng)).allFinite();
      }
    }
    RowTruncation row;
    bool row_ok = true;
    try {
      q_row_truncated_into(spec.rates, x, k, opts.regime_rel_tol, row);
    } catch (const Error&) {
      row_ok = false;
    }
    ok = ok && row_ok;
    finite.observe(p, ok ? 1.0 : 0.0, ok ? 0.0 : std::numeric_limits<double>::quiet_NaN());
    if (!b.allFinite() || !s.allFinite()) continue;

    const Matrix a = s * s.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
    const double min_eig = eig.eigenvalues().minCoeff();
    psd.observe(p, min_eig, min_eig / std::max(1.0, a.norm()));

    if (spec.ellipticity) {
      double worst = min_eig;
      for (const auto& xi : directions) {
        const double n2 = xi.squaredNorm();
        if (n2 > 0) worst = std::min(worst, xi.dot(a * xi) / n2);
      }
      ellip.observe(p, worst, worst - *spec.ellipticity);
    }

    double second = 0.0;
    bool second_ok = true;
    try {
      second = jump_second_moment(spec, x, k, opts.quad_rel_tol);
    } catch (const Error&) {
      second_ok = false;
    }
    if (spec.has_jumps() && spec.jumps.second_moment) {
      ModelSpec bare = spec;
      bare.jumps.second_moment = nullptr;
      try {
        const double quad = jump_second_moment(bare, x, k, opts.quad_rel_tol);
        const double rel = std::abs(quad - second) / (1.0 + std::abs(quad));
        moment.observe(p, rel, 1e-6 - rel);
      } catch (const InvalidInput&) {
        // mark space not supported by quadrature; closed form is taken as given
      } catch (const Error&) {
        moment.observe(p, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN());
      }
    }

    if (spec.growth) {
      const double bound = *spec.growth * (x.squaredNorm() + 1.0);
      const double lhs_drift = 2.0 * x.dot(b);
      drift_growth.observe(p, lhs_drift, bound - lhs_drift);
      const double lhs_noise = s.squaredNorm() + second;
      noise_growth.observe(p, lhs_noise, second_ok ? bound - lhs_noise : std::numeric_limits<double>::quiet_NaN());
    }

    if (spec.rates.switching() && row_ok) {
      double min_rate = std::numeric_limits<double>::infinity();
      double worst_k0 = std::numeric_limits<double>::infinity();
      double worst_k0_value = 0.0;
      for (const auto& [l, q] : row.rates) {
        min_rate = std::min(min_rate, q);
        if (spec.rates.uniform_bound) {
          const double cap = *spec.rates.uniform_bound * l * std::pow(3.0, -l);
          if (cap - q < worst_k0) {
            worst_k0 = cap - q;
            worst_k0_value = q;
          }
        }
      }
      if (!row.rates.empty()) nonneg.observe(p, min_rate, min_rate);
      if (spec.rates.uniform_bound && !row.rates.empty()) kappa0.observe(p, worst_k0_value, worst_k0);
      if (spec.rates.row_sum) {
        const double exact = spec.rates.row_sum(x, k);
        const double scale = std::max(1e-300, exact);
        const double slack = std::min(exact - row.partial_sum, row.partial_sum + row.certified_tail - exact) / scale;
        rowsum.observe(p, exact, slack);
      }
    }
  }

  if (spec.rates.switching()) {
    int kmax = 1;
    for (const auto& p : probes) kmax = std::max(kmax, p.k);
    for (int k = 1; k <= kmax; ++k) {
      const auto t0 = rate_tail_bound(spec.rates, k, 0);
      const auto tL = rate_tail_bound(spec.rates, k, 400);
      if (!t0 || !tL) continue;
      HybridState at(Vector::Zero(spec.dim), k);
      const double target = 1e-12 * std::max(*t0, 1e-300);
      tail_decay.observe(at, *tL, *tL <= target ? 0.0 : target - *tL);
    }
  }

  report.checks.push_back(finite.finish());
  report.checks.push_back(psd.finish());
  report.checks.push_back(spec.ellipticity ? ellip.finish()
                                           : not_declared("ellipticity", "<xi, a xi> >= lambda |xi|^2"));
  report.checks.push_back(spec.growth ? drift_growth.finish()
                                      : not_declared("growth_drift", "2<x, b> <= kappa (|x|^2 + 1)"));
  report.checks.push_back(spec.growth ? noise_growth.finish()
                                      : not_declared("growth_diffusion_jump",
                                                     "|sigma|^2 + int |c|^2 nu <= kappa (|x|^2 + 1)"));
  report.checks.push_back(moment.finish());
  report.checks.push_back(nonneg.finish());
  report.checks.push_back(rowsum.finish());
  report.checks.push_back(spec.rates.uniform_bound
                              ? kappa0.finish()
                              : not_declared("rate_uniform_bound", "q_kl(x) <= kappa_0 l 3^-l"));
  report.checks.push_back(tail_decay.finish());
  return report;
}

std::vector<HybridState> grid_probes(int dim, double lo, double hi, int n, int kmax) {
  require(dim >= 1 && dim <= kMaxDim, "grid dimension out of range");
  require(n >= 1 && kmax >= 1, "grid needs n >= 1 and kmax >= 1");
  std::size_t total = 1;
  for (int i = 0; i < dim; ++i) total *= static_cast<std::size_t>(n);
  std::vector<HybridState> out;
  out.reserve(total * static_cast<std::size_t>(kmax));
  const double step = n > 1 ? (hi - lo) / (n - 1) : 0.0;
  for (int k = 1; k <= kmax; ++k) {
    for (std::size_t idx = 0; idx < total; ++idx) {
      Vector x(dim);
      std::size_t rem = idx;
      for (int i = 0; i < dim; ++i) {
        x(i) = lo + step * static_cast<double>(rem % n);
        rem /= n;
      }
      out.emplace_back(x, k);
    }
  }
  return out;
}

std::vector<Vector> default_directions(int dim) {
  std::vector<Vector> out;
  for (int i = 0; i < dim; ++i) {
    Vector e = Vector::Zero(dim);
    e(i) = 1.0;
    out.push_back(e);
  }
  if (dim >= 2) {
    out.push_back(Vector::Ones(dim) / std::sqrt(static_cast<double>(dim)));
    Vector alt(dim);
    for (int i = 0; i < dim; ++i) alt(i) = (i % 2 == 0) ? 1.0 : -1.0;
    out.push_back(alt / alt.norm());
  }
  return out;
}

}  // namespace swjd
