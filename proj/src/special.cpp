#include "swjd/special.hpp"

#include "swjd/quadrature.hpp"
#include "swjd/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace swjd {

HermiteTable::HermiteTable(std::vector<double> nodes, std::vector<double> values, std::vector<double> slopes)
    : nodes_(std::move(nodes)), values_(std::move(values)), slopes_(std::move(slopes)) {
  require(nodes_.size() >= 2 && values_.size() == nodes_.size() && slopes_.size() == nodes_.size(),
          "Hermite table needs at least two nodes with matching values and slopes");
  for (std::size_t i = 1; i < nodes_.size(); ++i) require(nodes_[i] > nodes_[i - 1], "Hermite nodes must increase");
}

std::size_t HermiteTable::cell(double t) const {
  if (t <= nodes_.front()) return 0;
  if (t >= nodes_.back()) return nodes_.size() - 2;
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
  return static_cast<std::size_t>(it - nodes_.begin()) - 1;
}

namespace {

struct CellCubic {
  double h, y0, y1, m0, m1;
};

CellCubic limited(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& m,
                  std::size_t i) {
  CellCubic c{x[i + 1] - x[i], y[i], y[i + 1], m[i], m[i + 1]};
  const double delta = (c.y1 - c.y0) / c.h;
  if (delta == 0.0) {
    c.m0 = c.m1 = 0.0;
    return c;
  }
  double a = c.m0 / delta, b = c.m1 / delta;
  if (a < 0.0) a = 0.0;
  if (b < 0.0) b = 0.0;
  const double s = a * a + b * b;
  if (s > 9.0) {
    const double tau = 3.0 / std::sqrt(s);
    a *= tau;
    b *= tau;
  }
  c.m0 = a * delta;
  c.m1 = b * delta;
  return c;
}

}  // namespace

double HermiteTable::operator()(double t) const {
  const std::size_t i = cell(t);
  const CellCubic c = limited(nodes_, values_, slopes_, i);
  const double s = std::clamp((t - nodes_[i]) / c.h, 0.0, 1.0);
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * c.y0 + (s3 - 2 * s2 + s) * c.h * c.m0 + (-2 * s3 + 3 * s2) * c.y1 +
         (s3 - s2) * c.h * c.m1;
}

double HermiteTable::derivative(double t) const {
  const std::size_t i = cell(t);
  const CellCubic c = limited(nodes_, values_, slopes_, i);
  const double s = std::clamp((t - nodes_[i]) / c.h, 0.0, 1.0);
  const double s2 = s * s;
  return ((6 * s2 - 6 * s) * c.y0 + (-6 * s2 + 6 * s) * c.y1) / c.h + (3 * s2 - 4 * s + 1) * c.m0 +
         (3 * s2 - 2 * s) * c.m1;
}

namespace {

constexpr double kRelTol = 1e-12;
constexpr double kAbsTol = 1e-300;

/// scale * int_0^v g, evaluated from the left end of the grid cell holding v.
/// The first cell, where g may blow up, is split into dyadic shells
/// (h 2^-(j+1), h 2^-j] whose partial integrals are precomputed.
class Exponent {
 public:
  Exponent(std::function<double(double)> g, double scale, int n) : g_(std::move(g)), scale_(scale), n_(n) {
    h_ = 1.0 / n;
    at_node_.assign(n + 1, 0.0);
    shells_.assign(kShells + 1, 0.0);
    shells_[0] = integrate_from_zero(g_, h_, kRelTol).value;
    for (int j = 0; j < kShells; ++j) {
      const double hi = std::ldexp(h_, -j);
      shells_[j + 1] = std::max(0.0, shells_[j] - integrate(g_, 0.5 * hi, hi, kRelTol, kAbsTol).value);
    }
    at_node_[1] = scale_ * shells_[0];
    for (int i = 1; i < n; ++i) at_node_[i + 1] = at_node_[i] + scale_ * integrate(g_, node(i), node(i + 1), kRelTol, kAbsTol).value;
  }

  double node(int i) const { return i == n_ ? 1.0 : i * h_; }
  double operator[](int i) const { return at_node_[i]; }

  /// Value at v inside cell i, relative to the left node.
  double offset(int i, double v) const {
    if (v <= node(i)) return 0.0;
    if (i > 0) return scale_ * integrate(g_, node(i), v, kRelTol, kAbsTol).value;
    int j = std::max(0, static_cast<int>(std::floor(-std::log2(v / h_))));
    while (j > 0 && std::ldexp(h_, -j) < v) --j;
    while (j < kShells && std::ldexp(h_, -(j + 1)) >= v) ++j;
    const double lo = std::ldexp(h_, -(j + 1));
    if (j == kShells) return scale_ * shells_[kShells] * v / std::ldexp(h_, -kShells);
    return scale_ * (shells_[j + 1] + integrate(g_, lo, v, kRelTol, kAbsTol).value);
  }

 private:
  static constexpr int kShells = 64;

  std::function<double(double)> g_;
  double scale_;
  int n_;
  double h_;
  std::vector<double> at_node_;
  std::vector<double> shells_;  // shells_[j] = int_0^{h 2^-j} g
};

void check_g(const std::function<double(double)>& g, int n) {
  require(static_cast<bool>(g), "g is not set");
  for (int i = 0; i < n; ++i) {
    for (double r : {(i + 0.5) / n, (i + 1.0) / n}) {
      const double v = g(r);
      if (!std::isfinite(v) || v < 0.0) {
        std::ostringstream msg;
        msg << "g must be finite and nonnegative on (0, 1]; g(" << r << ") = " << v;
        throw InvalidInput(msg.str());
      }
    }
  }
}

}  // namespace

GFunction build_G(double kappa_R, double lambda_R, std::function<double(double)> g, int grid_log2) {
  require(kappa_R > 0.0 && std::isfinite(kappa_R), "kappa_R must be positive");
  require(lambda_R > 0.0 && std::isfinite(lambda_R), "lambda_R must be positive");
  require(grid_log2 >= 2 && grid_log2 <= 20, "grid_log2 must be in [2, 20]");
  const int n = 1 << grid_log2;
  check_g(g, n);
  const double c = kappa_R / (2.0 * lambda_R);
  const Exponent P(g, c, n);

  // Jt[i] = G'(r_i) = int_{r_i}^1 exp(P(v) - P(r_i)) dv, accumulated right to left.
  std::vector<double> Jt(n + 1, 0.0);
  for (int i = n - 1; i >= 0; --i) {
    const double local =
        integrate([&](double v) { return std::exp(P.offset(i, v)); }, P.node(i), P.node(i + 1), kRelTol, kAbsTol)
            .value;
    Jt[i] = std::exp(P[i + 1] - P[i]) * Jt[i + 1] + local;
  }

  std::vector<double> nodes(n + 1), values(n + 1, 0.0);
  for (int i = 0; i <= n; ++i) nodes[i] = P.node(i);
  for (int i = 0; i < n; ++i) {
    const double hi = P.node(i + 1);
    const double span = P[i + 1] - P[i];
    const auto integrand = [&](double s) {
      const double ps = P.offset(i, s);
      const double inner =
          s < hi ? integrate([&](double v) { return std::exp(P.offset(i, v) - ps); }, s, hi, kRelTol, kAbsTol).value
                 : 0.0;
      return std::exp(span - ps) * Jt[i + 1] + inner;
    };
    values[i + 1] = values[i] + integrate(integrand, P.node(i), hi, kRelTol, kAbsTol).value;
  }

  GFunction G;
  G.kappa_R = kappa_R;
  G.lambda_R = lambda_R;
  G.g = std::move(g);
  G.table = HermiteTable(nodes, values, Jt);

  int last = 0;
  while (last < n && nodes[last + 1] <= values[last + 1]) ++last;
  G.alpha_grid = nodes[last];
  if (last == 0) {
    G.alpha = 0.0;
    G.alpha_degenerate = true;
  } else if (last == n) {
    G.alpha = 1.0;
  } else {
    double lo = nodes[last], hi = nodes[last + 1];
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (mid <= G.table(mid) ? lo : hi) = mid;
    }
    G.alpha = lo;
  }
  return G;
}

double GFunction::operator()(double r) const {
  require(r >= 0.0, "G is defined for r >= 0");
  return r >= 1.0 ? table.values().back() : table(r);
}

double GFunction::derivative(double r) const {
  require(r >= 0.0, "G is defined for r >= 0");
  return r >= 1.0 ? 0.0 : table.derivative(r);
}

double GFunction::second_derivative(double r) const {
  require(r > 0.0 && r <= 1.0, "G'' is evaluated on (0, 1]");
  return -1.0 - kappa_R / (2.0 * lambda_R) * g(r) * derivative(r);
}

FFunction build_F(std::function<double(double)> g, int grid_log2) {
  require(grid_log2 >= 2 && grid_log2 <= 20, "grid_log2 must be in [2, 20]");
  const int n = 1 << grid_log2;
  check_g(g, n);
  const Exponent P(g, 1.0, n);
  std::vector<double> nodes(n + 1), values(n + 1, 0.0), slopes(n + 1);
  for (int i = 0; i <= n; ++i) {
    nodes[i] = P.node(i);
    slopes[i] = std::exp(-P[i]);
  }
  for (int i = 0; i < n; ++i) {
    values[i + 1] = values[i] + std::exp(-P[i]) * integrate([&](double s) { return std::exp(-P.offset(i, s)); },
                                                            P.node(i), P.node(i + 1), kRelTol, kAbsTol)
                                                      .value;
  }
  FFunction F;
  F.g = std::move(g);
  F.table = HermiteTable(nodes, values, slopes);
  return F;
}

double FFunction::operator()(double r) const {
  require(r >= 0.0, "F is defined for r >= 0");
  if (std::isinf(r)) return table.values().back();
  return table(r / (1.0 + r));
}

double FFunction::derivative(double r) const {
  require(r >= 0.0, "F is defined for r >= 0");
  if (std::isinf(r)) return 0.0;
  return table.derivative(r / (1.0 + r)) / ((1.0 + r) * (1.0 + r));
}

double FFunction::second_derivative(double r) const {
  require(r > 0.0, "F'' is evaluated on (0, inf)");
  const double t = r / (1.0 + r);
  return -(2.0 / (1.0 + r) + g(t) / ((1.0 + r) * (1.0 + r))) * derivative(r);
}

}  // namespace swjd
