#include "swjd/quadrature.hpp"

#include "swjd/types.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <queue>
#include <sstream>

namespace swjd {

namespace {

struct Panel {
  double a, b, value, error, l1;
  bool operator<(const Panel& o) const { return error < o.error; }
};

Panel gk15(const std::function<double(double)>& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  auto mapped = [&](double t) { return half * f(mid + half * t); };
  Panel p{a, b, 0.0, 0.0, 0.0};
  p.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(mapped, -1.0, 1.0, 0, 0.0, &p.error, &p.l1);
  if (!std::isfinite(p.value)) {
    throw NumericError("quadrature produced a non-finite value on [" + std::to_string(a) + ", " +
                       std::to_string(b) + "]");
  }
  return p;
}

}  // namespace

// Global adaptive bisection on the panel with the largest error, using the
// 15-point Kronrod rule as the local kernel.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b, double rel_tol,
                           double abs_tol) {
  QuadratureResult out;
  if (a == b) return out;
  constexpr int kMaxPanels = 4000;
  std::priority_queue<Panel> panels;
  Panel first = gk15(f, a, b);
  double value = first.value, error = first.error, l1 = first.l1;
  panels.push(first);
  auto converged = [&] {
    return error <= std::max(rel_tol * std::abs(value), abs_tol) || error <= 1e-15 * l1;
  };
  while (!converged() && static_cast<int>(panels.size()) < kMaxPanels) {
    const Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      panels.push(worst);
      break;
    }
    const Panel left = gk15(f, worst.a, mid);
    const Panel right = gk15(f, mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    l1 += left.l1 + right.l1 - worst.l1;
    panels.push(left);
    panels.push(right);
  }
  // Re-add to cancel accumulated rounding from the running updates.
  value = 0.0;
  error = 0.0;
  l1 = 0.0;
  while (!panels.empty()) {
    value += panels.top().value;
    error += panels.top().error;
    l1 += panels.top().l1;
    panels.pop();
  }
  out.value = value;
  out.error = error;
  if (!converged()) {
    std::ostringstream msg;
    msg << "quadrature did not converge on [" << a << ", " << b << "]: value " << out.value << " +/- "
        << out.error;
    throw NumericError(msg.str());
  }
  return out;
}

QuadratureResult integrate_from_zero(const std::function<double(double)>& f, double b, double rel_tol) {
  QuadratureResult out;
  if (b <= 0.0) return out;
  constexpr int kMaxShells = 400;
  constexpr int kMinShells = 6;
  double hi = b;
  double previous = 0.0;
  for (int j = 0; j < kMaxShells; ++j) {
    const double lo = 0.5 * hi;
    const QuadratureResult shell = integrate(f, lo, hi, rel_tol * 0.1, 1e-300);
    out.value += shell.value;
    out.error += shell.error;
    hi = lo;
    if (j + 1 < kMinShells) {
      previous = shell.value;
      continue;
    }
    const double mag = std::abs(shell.value);
    if (mag == 0.0 && previous == 0.0) return out;
    const double ratio = previous != 0.0 ? mag / std::abs(previous) : 0.0;
    if (ratio < 0.999) {
      const double tail = mag * ratio / (1.0 - ratio);
      if (tail <= rel_tol * std::abs(out.value) || tail < 1e-300) {
        out.value += (shell.value >= 0 ? 1.0 : -1.0) * tail;
        out.error += tail;
        return out;
      }
    }
    previous = shell.value;
  }
  std::ostringstream msg;
  msg << "integral over (0, " << b << "] does not converge near 0 (partial sum " << out.value
      << " after " << kMaxShells << " dyadic shells)";
  throw DivergentIntegral(msg.str());
}

}  // namespace swjd
