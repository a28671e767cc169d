#pragma once

#include <functional>
#include <vector>

namespace swjd {

/// Tabulated values and slopes on a grid with cubic Hermite interpolation.
/// Slopes are limited (Fritsch-Carlson) so monotone data stay monotone.
class HermiteTable {
 public:
  HermiteTable() = default;
  HermiteTable(std::vector<double> nodes, std::vector<double> values, std::vector<double> slopes);

  double operator()(double t) const;
  double derivative(double t) const;
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& slopes() const { return slopes_; }

 private:
  std::size_t cell(double t) const;

  std::vector<double> nodes_;
  std::vector<double> values_;
  std::vector<double> slopes_;
};

/// G(r) = int_0^r exp(-c Phi(s)) int_s^1 exp(c Phi(v)) dv ds on [0, 1],
/// with Phi(s) = int_0^s g and c = kappa_R / (2 lambda_R).
struct GFunction {
  double kappa_R = 0.0;
  double lambda_R = 0.0;
  std::function<double(double)> g;
  HermiteTable table;
  /// Largest r with s <= G(s) on [0, r], refined by bisection between grid points.
  double alpha = 0.0;
  /// Largest grid point below alpha.
  double alpha_grid = 0.0;
  /// alpha collapsed to 0: G'(0) <= 1, the bound s <= G(s) holds only at s = 0.
  bool alpha_degenerate = false;

  /// G(r) for r in [0, 1]; G(1) for r > 1 (G'(1) = 0).
  double operator()(double r) const;
  double derivative(double r) const;
  /// G''(r) = -1 - c g(r) G'(r) for r in (0, 1].
  double second_derivative(double r) const;
};

/// F(r) = int_0^{r/(1+r)} exp(-Phi(s)) ds on [0, inf), tabulated in t = r/(1+r).
struct FFunction {
  std::function<double(double)> g;
  HermiteTable table;

  double operator()(double r) const;
  double derivative(double r) const;
  double second_derivative(double r) const;
};

/// Throws DivergentIntegral when int_0^1 g appears infinite, InvalidInput for
/// negative or non-finite g at a grid point.
GFunction build_G(double kappa_R, double lambda_R, std::function<double(double)> g, int grid_log2 = 12);
FFunction build_F(std::function<double(double)> g, int grid_log2 = 12);

}  // namespace swjd
