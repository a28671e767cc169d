#pragma once

#include "swjd/types.hpp"

namespace swjd {

struct PsdSqrt {
  Matrix root;
  double min_eigenvalue = 0.0;
  bool clamped = false;  // some eigenvalue in [-clamp_tol, 0) was set to 0
};

/// Symmetric square root by eigendecomposition. Eigenvalues in [-clamp_tol, 0)
/// are clamped to zero; anything more negative throws NumericError.
PsdSqrt sqrt_psd(const Matrix& a, double clamp_tol = 1e-6);

/// I - 2 u u^T for a unit vector u.
Matrix reflection_matrix(const Vector& u);

}  // namespace swjd
