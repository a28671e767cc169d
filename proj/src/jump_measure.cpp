#include "swjd/jump_measure.hpp"

#include "swjd/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace swjd {

namespace {

double unit_sphere_area(int m) {
  // 2 pi^(m/2) / Gamma(m/2)
  return 2.0 * std::pow(std::numbers::pi, 0.5 * m) / std::tgamma(0.5 * m);
}

}  // namespace

RadialPowerMeasure::RadialPowerMeasure(int mark_dim, double exponent)
    : m_(mark_dim), p_(exponent), sphere_area_(0.0) {
  require(mark_dim >= 1 && mark_dim <= kMaxDim, "radial power measure: mark dimension must be in [1, 8]");
  require(std::isfinite(exponent), "radial power measure: exponent must be finite");
  sphere_area_ = unit_sphere_area(m_);
}

std::string RadialPowerMeasure::describe() const {
  std::ostringstream s;
  s << "nu(du) = |u|^-" << p_ << " du on {0 < |u| < 1} in R^" << m_;
  return s.str();
}

double RadialPowerMeasure::density(const Vector& u) const {
  const double r = u.norm();
  if (r <= 0.0 || r >= 1.0) return 0.0;
  return std::pow(r, -p_);
}

double RadialPowerMeasure::radial_moment(double q, double lo, double hi) const {
  const double e = q - p_ + m_;
  if (std::abs(e) < 1e-14) {
    require(lo > 0.0, "radial moment diverges at 0");
    return sphere_area_ * std::log(hi / lo);
  }
  if (lo == 0.0) require(e > 0.0, "radial moment diverges at 0");
  return sphere_area_ * (std::pow(hi, e) - std::pow(lo, e)) / e;
}

double RadialPowerMeasure::mass_outside(double eps) const {
  require(eps > 0.0 && eps < 1.0, "jump cutoff must lie in (0, 1)");
  return radial_moment(0.0, eps, 1.0);
}

Vector RadialPowerMeasure::sample_outside(double eps, Rng& rng) const {
  // Radial law has density proportional to r^(e-1) on [eps, 1] with e = m - p.
  const double e = m_ - p_;
  const double w = rng.uniform();
  double r;
  if (std::abs(e) < 1e-14) {
    r = eps * std::pow(1.0 / eps, w);
  } else {
    const double lo = std::pow(eps, e);
    r = std::pow(lo + w * (1.0 - lo), 1.0 / e);
  }
  Vector u(m_);
  if (m_ == 1) {
    u(0) = rng.uniform() < 0.5 ? -r : r;
  } else if (m_ == 2) {
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    u(0) = r * std::cos(theta);
    u(1) = r * std::sin(theta);
  } else {
    for (int i = 0; i < m_; ++i) u(i) = rng.normal();
    u *= r / u.norm();
  }
  return u;
}

double RadialPowerMeasure::integrate(const std::function<double(const Vector&)>& phi, double lo, double hi,
                                     double rel_tol, double abs_tol) const {
  require(lo >= 0.0 && hi <= 1.0 && lo <= hi, "integration radii must satisfy 0 <= lo <= hi <= 1");
  if (lo == hi) return 0.0;
  std::function<double(double)> radial;
  if (m_ == 1) {
    radial = [&](double r) {
      Vector u(1);
      u(0) = r;
      const double plus = phi(u);
      u(0) = -r;
      return std::pow(r, -p_) * (plus + phi(u));
    };
  } else if (m_ == 2) {
    radial = [&, rel_tol, abs_tol](double r) {
      auto angular = [&](double theta) {
        Vector u(2);
        u(0) = r * std::cos(theta);
        u(1) = r * std::sin(theta);
        return phi(u);
      };
      const double ring = swjd::integrate(angular, 0.0, 2.0 * std::numbers::pi, rel_tol * 0.1, std::max(abs_tol, 1e-300)).value;
      return std::pow(r, 1.0 - p_) * ring;
    };
  } else {
    throw InvalidInput("quadrature over the mark space is implemented for mark dimension 1 and 2 only");
  }
  if (lo == 0.0) return integrate_from_zero(radial, hi, rel_tol).value;
  return swjd::integrate(radial, lo, hi, rel_tol, std::max(abs_tol, 1e-300)).value;
}

}  // namespace swjd
