#pragma once

#include "swjd/generator.hpp"
#include "swjd/model.hpp"

#include <string>
#include <vector>

namespace swjd {

/// d = 1: sigma = |x|^(2/3) + 1, b = -x/(2k^2), c = u x/(sqrt(2) k),
/// nu(du) = du/u^2 on 0 < |u| < 1, q_kl = k 3^-(l+k) / (1 + l x^2).
ModelSpec example51();

/// d = 2: sigma = ((|x|+1)/4) I, b = -(k/(k+1)) x, c = sqrt(k/(k+1)) gamma |u| x,
/// nu(du) = du/|u|^(2+delta) on 0 < |u| < 1,
/// q_kl = (2 + cos(k|x|)) / (3^l (2 + sin |x|^2)); V = |x|^2 + k attached.
ModelSpec example52(double delta = 1.0);

/// gamma with gamma^2 * int |u|^2 nu(du) = 1.
double example52_gamma(double delta);

/// V(x,k) = |x|^2 + k for rates bounded by rate_scale(k) * 3^-l.
TestFunction quadratic_lyapunov(int dim, std::function<double(int)> rate_scale);

struct DriftBound {
  double lhs = 0.0;  // AV(x,k)
  double rhs = 0.0;  // -V(x,k)/6 + 5/2
  double bracket = 0.0;
};

/// Both sides of the drift inequality of the two-dimensional example; K_trunc
/// fixes the regime truncation level (adaptive when <= 0).
DriftBound example52_drift_bound(const ModelSpec& spec, const Vector& x, int k, int K_trunc = 0);

/// sup_x q_k(x) of the one-dimensional example, attained at x = 0.
double example51_max_row_sum(int k);

// Degenerate reference models.

/// b = sigma = c = 0, q = 0.
ModelSpec zero_model(int dim);
/// b = 0, sigma = I, no jumps, no switching.
ModelSpec brownian_model(int dim);
/// b = sigma = c = 0 in d = 1 with the switching rates of example51().
ModelSpec switching_model();

/// A copy with selected parts removed (coefficients replaced by zero).
struct ModelParts {
  bool drift = true;
  bool diffusion = true;
  bool jumps = true;
  bool switching = true;
};
ModelSpec restrict_model(const ModelSpec& spec, const ModelParts& keep, const std::string& name);

/// Resolves "example51", "example52", "example52:<delta>", "zero:<d>",
/// "brownian:<d>", "switching". Throws InvalidInput for unknown names.
ModelSpec builtin_model(const std::string& name);
bool is_builtin_name(const std::string& name);
std::vector<std::string> builtin_names();

}  // namespace swjd
