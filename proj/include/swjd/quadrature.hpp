#pragma once

#include <functional>

namespace swjd {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // estimated absolute error
};

/// Adaptive 15-point Gauss-Kronrod on [a, b]. Throws NumericError when the
/// error estimate stays above max(rel_tol * |value|, abs_tol).
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double rel_tol = 1e-10, double abs_tol = 1e-300);

/// Integral over (0, b] of an integrand that may blow up (integrably) at 0.
/// Sums dyadic shells (b 2^-(j+1), b 2^-j] and closes with a geometric tail
/// estimate; throws DivergentIntegral when the shells do not decay.
QuadratureResult integrate_from_zero(const std::function<double(double)>& f, double b,
                                     double rel_tol = 1e-10);

}  // namespace swjd
