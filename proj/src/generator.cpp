#include "swjd/generator.hpp"

#include "swjd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace swjd {

Vector TestFunction::grad(const Vector& x, int k) const {
  if (gradient) return gradient(x, k);
  const double h = fd_step * (1.0 + x.norm());
  Vector g(x.size());
  Vector y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y(i) = x(i) + h;
    const double fp = value(y, k);
    y(i) = x(i) - h;
    const double fm = value(y, k);
    y(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Matrix TestFunction::hess(const Vector& x, int k) const {
  if (hessian) return hessian(x, k);
  const double h = 10.0 * fd_step * (1.0 + x.norm());
  const Eigen::Index d = x.size();
  Matrix H(d, d);
  const double f0 = value(x, k);
  Vector y = x;
  for (Eigen::Index i = 0; i < d; ++i) {
    y(i) = x(i) + h;
    const double fp = value(y, k);
    y(i) = x(i) - h;
    const double fm = value(y, k);
    y(i) = x(i);
    H(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
    for (Eigen::Index j = 0; j < i; ++j) {
      double s = 0.0;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          y(i) = x(i) + si * h;
          y(j) = x(j) + sj * h;
          s += si * sj * value(y, k);
        }
      }
      y(i) = x(i);
      y(j) = x(j);
      H(i, j) = H(j, i) = s / (4.0 * h * h);
    }
  }
  return H;
}

TestFunction constant_function(double c, int dim) {
  TestFunction f;
  f.name = "constant";
  f.value = [c](const Vector&, int) { return c; };
  f.gradient = [dim](const Vector&, int) { return Vector::Zero(dim).eval(); };
  f.hessian = [dim](const Vector&, int) { return Matrix::Zero(dim, dim).eval(); };
  f.sup_norm = std::abs(c);
  f.regime_independent = true;
  return f;
}

TestFunction coordinate_function(int i, int dim) {
  require(i >= 0 && i < dim, "coordinate index out of range");
  TestFunction f;
  f.name = "x" + std::to_string(i + 1);
  f.value = [i](const Vector& x, int) { return x(i); };
  f.gradient = [i, dim](const Vector&, int) {
    Vector g = Vector::Zero(dim);
    g(i) = 1.0;
    return g;
  };
  f.hessian = [dim](const Vector&, int) { return Matrix::Zero(dim, dim).eval(); };
  f.regime_independent = true;
  return f;
}

TestFunction regime_indicator(int l, int dim) {
  require(l >= 1, "regime index must be >= 1");
  TestFunction f;
  f.name = "1{k=" + std::to_string(l) + "}";
  f.value = [l](const Vector&, int k) { return k == l ? 1.0 : 0.0; };
  f.gradient = [dim](const Vector&, int) { return Vector::Zero(dim).eval(); };
  f.hessian = [dim](const Vector&, int) { return Matrix::Zero(dim, dim).eval(); };
  f.sup_norm = 1.0;
  return f;
}

TestFunction linear_combination(const std::vector<std::pair<double, TestFunction>>& terms) {
  require(!terms.empty(), "linear combination needs at least one term");
  TestFunction f;
  f.name = "combination";
  f.value = [terms](const Vector& x, int k) {
    double s = 0.0;
    for (const auto& [w, g] : terms) s += w * g.value(x, k);
    return s;
  };
  f.gradient = [terms](const Vector& x, int k) {
    Vector s = Vector::Zero(x.size());
    for (const auto& [w, g] : terms) s += w * g.grad(x, k);
    return s;
  };
  f.hessian = [terms](const Vector& x, int k) {
    Matrix s = Matrix::Zero(x.size(), x.size());
    for (const auto& [w, g] : terms) s += w * g.hess(x, k);
    return s;
  };
  bool bounded = true;
  double sup = 0.0;
  bool independent = true;
  bool tails = true;
  for (const auto& [w, g] : terms) {
    if (g.sup_norm) sup += std::abs(w) * *g.sup_norm;
    else bounded = false;
    independent = independent && g.regime_independent;
    tails = tails && (g.regime_independent || g.regime_tail);
  }
  if (bounded) f.sup_norm = sup;
  f.regime_independent = independent;
  if (!bounded && !independent && tails) {
    f.regime_tail = [terms](const Vector& x, int k, int L) {
      double s = 0.0;
      for (const auto& [w, g] : terms)
        if (!g.regime_independent) s += std::abs(w) * g.regime_tail(x, k, L);
      return s;
    };
  }
  return f;
}

// ---------------------------------------------------------------------------

namespace {

double trace_product(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

std::vector<Vector> bracket_marks(int m, double eps, int samples) {
  // Radii eps * j / n along the coordinate axes (both signs) of the mark space.
  std::vector<Vector> marks;
  const int radii = std::max(1, samples / std::max(1, 2 * m));
  for (int j = 1; j <= radii; ++j) {
    const double r = eps * j / radii;
    for (int i = 0; i < m; ++i) {
      for (double s : {1.0, -1.0}) {
        Vector u = Vector::Zero(m);
        u(i) = s * r;
        marks.push_back(u);
      }
    }
  }
  return marks;
}

}  // namespace

GeneratorValue apply_generator(const ModelSpec& spec, const TestFunction& f, const Vector& x, int k,
                               const GeneratorOptions& opts) {
  require(static_cast<bool>(f.value), "test function has no value");
  require(x.size() == spec.dim, "point dimension does not match the model");
  require(k >= 1, "regime index must be >= 1");
  const bool switching = spec.rates.switching() && !f.regime_independent;
  if (switching) {
    require(f.sup_norm || f.regime_tail,
            "regime sum of an unbounded test function needs a tail bound on q_kl |f(x,l) - f(x,k)|");
  }
  GeneratorValue out;

  const Vector g = f.grad(x, k);
  const Matrix H = f.hess(x, k);
  const Matrix a = spec.covariance(x, k);
  out.diffusion_term = 0.5 * trace_product(a, H);
  out.drift_term = spec.drift(x, k).dot(g);

  if (spec.has_jumps()) {
    const JumpMeasure& nu = *spec.jumps.measure;
    const double eps = opts.cutoff.value_or(spec.jumps.cutoff);
    require(eps > 0.0 && eps < nu.outer_radius(), "generator cutoff must lie inside the mark domain");
    const double f0 = f.value(x, k);
    auto integrand = [&](const Vector& u) {
      const Vector c = spec.jump(x, k, u);
      return f.value(x + c, k) - f0 - g.dot(c);
    };
    const double floor = 1e-13 * (1.0 + std::abs(f0) + g.norm() * (1.0 + x.norm())) * nu.mass_outside(eps);
    const double outer = nu.integrate(integrand, eps, nu.outer_radius(), opts.quad_tol, floor);
    const Matrix sigma_eps = small_jump_covariance(spec, x, k, eps, opts.quad_tol);
    const double inner = 0.5 * trace_product(H, sigma_eps);
    out.jump_term = outer + inner;
    out.quadrature_error = opts.quad_tol * std::abs(outer) + floor;

    // Remainder of the second-order Taylor expansion over |u| <= eps.
    double variation = 0.0;
    for (const Vector& u : bracket_marks(nu.mark_dim(), eps, opts.bracket_samples)) {
      const Vector c = spec.jump(x, k, u);
      for (double t : {0.5, 1.0}) variation = std::max(variation, (f.hess(x + t * c, k) - H).norm());
    }
    out.small_jump_bracket = 0.5 * variation * sigma_eps.trace();
  }

  if (switching) {
    const double fk = f.value(x, k);
    const int cap = spec.rates.max_regime ? std::min(spec.rates.max_terms, *spec.rates.max_regime)
                                          : spec.rates.max_terms;
    const bool has_row = static_cast<bool>(spec.rates.row_sum);
    const double row_exact = has_row ? spec.rates.row_sum(x, k) : 0.0;
    double partial_rates = 0.0;
    for (int L = 0;; ++L) {
      if (L > 0 && L != k) {
        const double q = spec.rates.rate(x, k, L);
        out.switching_term += q * (f.value(x, L) - fk);
        partial_rates += q;
      }
      double tail;
      if (spec.rates.max_regime && L >= *spec.rates.max_regime) {
        tail = 0.0;
      } else if (f.regime_tail) {
        tail = f.regime_tail(x, k, L);
      } else {
        if (!f.sup_norm) throw TruncationError("unbounded test function needs a regime tail bound");
        auto rt = rate_tail_bound(spec.rates, k, L);
        if (!rt && has_row) rt = std::max(0.0, row_exact - partial_rates);
        if (!rt) throw TruncationError("regime sum needs a rate tail bound or an exact row sum");
        tail = 2.0 * *f.sup_norm * *rt;
      }
      const bool fixed_stop = opts.max_level && L >= *opts.max_level;
      if (tail <= opts.regime_abs_tol || fixed_stop) {
        out.regime_tail = tail;
        out.regime_level = L;
        break;
      }
      if (L >= cap) {
        std::ostringstream msg;
        msg << "regime sum not truncated to " << opts.regime_abs_tol << " within " << cap << " terms";
        throw TruncationError(msg.str());
      }
    }
  }

  out.value = out.diffusion_term + out.drift_term + out.jump_term + out.switching_term;
  out.bracket = out.small_jump_bracket + out.regime_tail + out.quadrature_error;
  if (!std::isfinite(out.value)) throw NumericError("generator value is not finite");
  return out;
}

DerivativeCheck check_derivatives(const TestFunction& f, const std::vector<HybridState>& probes, double tol) {
  DerivativeCheck out;
  TestFunction fd = f;
  fd.gradient = nullptr;
  fd.hessian = nullptr;
  for (const auto& p : probes) {
    if (f.gradient) {
      const Vector a = f.gradient(p.x, p.k);
      const Vector n = fd.grad(p.x, p.k);
      out.gradient_error = std::max(out.gradient_error, (a - n).norm() / std::max(1.0, a.norm()));
    }
    if (f.hessian) {
      const Matrix a = f.hessian(p.x, p.k);
      const Matrix n = fd.hess(p.x, p.k);
      out.hessian_error = std::max(out.hessian_error, (a - n).norm() / std::max(1.0, a.norm()));
    }
  }
  out.ok = out.gradient_error <= tol && out.hessian_error <= 1e3 * tol;
  return out;
}

// ---------------------------------------------------------------------------

bool LyapunovCertificate::in_set(const HybridState& s) const {
  if (whole_space) return true;
  if (s.k < n_lo || s.k > n_hi) return false;
  for (Eigen::Index i = 0; i < s.x.size(); ++i) {
    if (s.x(i) < box_lo(i) || s.x(i) > box_hi(i)) return false;
  }
  return true;
}

bool DriftReport::holds(double tol) const {
  if (n_failed > 0) return false;
  return std::all_of(points.begin(), points.end(),
                     [tol](const DriftPoint& p) { return p.margin <= tol + p.bracket; });
}

DriftReport check_lyapunov(const ModelSpec& spec, const LyapunovCertificate& cert,
                           const std::vector<HybridState>& grid, const GeneratorOptions& opts) {
  require(!grid.empty(), "lyapunov grid is empty");
  require(cert.alpha >= 0.0 && cert.beta >= 0.0, "alpha and beta must be nonnegative");
  require(static_cast<bool>(cert.V.value) && static_cast<bool>(cert.rate.value),
          "certificate needs V and a rate function");
  if (!cert.whole_space) {
    require(cert.box_lo.size() == spec.dim && cert.box_hi.size() == spec.dim, "box dimension mismatch");
  }
  for (const auto& p : grid) require_state(p, spec.dim);

  DriftReport report;
  report.points = parallel_map<DriftPoint>(grid.size(), [&](std::size_t i) {
    DriftPoint pt;
    pt.state = grid[i];
    try {
      const GeneratorValue gv = apply_generator(spec, cert.V, pt.state.x, pt.state.k, opts);
      pt.generator = gv.value;
      pt.bracket = gv.bracket;
      pt.margin = gv.value + cert.alpha * cert.rate.value(pt.state.x, pt.state.k) -
                  (cert.in_set(pt.state) ? cert.beta : 0.0);
    } catch (const Error& e) {
      pt.error = e.what();
      pt.margin = std::numeric_limits<double>::quiet_NaN();
    }
    return pt;
  });

  report.max_margin = -std::numeric_limits<double>::infinity();
  for (const auto& p : report.points) {
    if (!p.error.empty()) {
      ++report.n_failed;
      continue;
    }
    report.max_bracket = std::max(report.max_bracket, p.bracket);
    if (p.margin > report.max_margin) {
      report.max_margin = p.margin;
      report.worst_point = p.state;
    }
  }
  return report;
}

}  // namespace swjd
