#include "swjd/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <sstream>

namespace swjd {

PsdSqrt sqrt_psd(const Matrix& a, double clamp_tol) {
  require(a.rows() == a.cols() && a.rows() >= 1, "sqrt_psd needs a square matrix");
  require(a.allFinite(), "sqrt_psd input is not finite");
  const double asym = (a - a.transpose()).norm();
  require(asym <= 1e-12 * (1.0 + a.norm()), "sqrt_psd input is not symmetric");
  PsdSqrt out;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()));
  Vector lambda = eig.eigenvalues();
  out.min_eigenvalue = lambda.minCoeff();
  if (out.min_eigenvalue < -clamp_tol) {
    std::ostringstream msg;
    msg << "matrix is not positive semidefinite: eigenvalue " << out.min_eigenvalue;
    throw NumericError(msg.str());
  }
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < 0.0) {
      lambda(i) = 0.0;
      out.clamped = true;
    }
  }
  const Matrix& V = eig.eigenvectors();
  out.root = V * lambda.cwiseSqrt().asDiagonal() * V.transpose();
  return out;
}

Matrix reflection_matrix(const Vector& u) {
  const Eigen::Index d = u.size();
  return Matrix::Identity(d, d) - 2.0 * u * u.transpose();
}

}  // namespace swjd
