#pragma once

#include "swjd/rng.hpp"
#include "swjd/types.hpp"

#include <functional>
#include <memory>
#include <string>

namespace swjd {

/// A sigma-finite Levy measure on a mark space U in R^m. Only the part of the
/// measure beyond a cutoff |u| > eps needs finite mass.
class JumpMeasure {
 public:
  virtual ~JumpMeasure() = default;

  virtual int mark_dim() const = 0;
  virtual std::string describe() const = 0;
  virtual double density(const Vector& u) const = 0;

  /// nu({|u| > eps}).
  virtual double mass_outside(double eps) const = 0;

  /// Draw u from nu restricted to {|u| > eps}, normalized.
  virtual Vector sample_outside(double eps, Rng& rng) const = 0;

  /// Integral of phi over {lo < |u| < hi} against nu. lo may be 0; the
  /// integrand is then expected to vanish fast enough at u = 0. abs_tol is the
  /// roundoff floor for integrands that cancel to zero.
  virtual double integrate(const std::function<double(const Vector&)>& phi, double lo, double hi,
                           double rel_tol, double abs_tol) const = 0;

  /// Supremum of |u| over U.
  virtual double outer_radius() const = 0;
};

/// nu(du) = |u|^-p du on the punctured unit ball {0 < |u| < 1} of R^m.
class RadialPowerMeasure final : public JumpMeasure {
 public:
  RadialPowerMeasure(int mark_dim, double exponent);

  int mark_dim() const override { return m_; }
  std::string describe() const override;
  double density(const Vector& u) const override;
  double mass_outside(double eps) const override;
  Vector sample_outside(double eps, Rng& rng) const override;
  double integrate(const std::function<double(const Vector&)>& phi, double lo, double hi, double rel_tol,
                   double abs_tol) const override;
  double outer_radius() const override { return 1.0; }

  double exponent() const { return p_; }

  /// Integral of |u|^q over {lo < |u| < hi}; closed form used by built-in models.
  double radial_moment(double q, double lo, double hi) const;

 private:
  int m_;
  double p_;
  double sphere_area_;
};

}  // namespace swjd
