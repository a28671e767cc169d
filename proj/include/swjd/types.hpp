#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace swjd {

// Analog dimension is capped so vectors and matrices live on the stack in
// the inner stepping loops.
inline constexpr int kMaxDim = 8;

using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejected input: bad dimensions, out-of-range parameters, malformed config.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A countable regime sum could not be truncated to the requested tolerance.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// Numeric failure: non-convergent quadrature, indefinite matrix, all paths censored.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An integral that must be finite (e.g. the integral of g near zero) appears divergent.
class DivergentIntegral : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Element of the regime space {1, 2, ...}.
class RegimeIndex {
 public:
  explicit RegimeIndex(int k) : k_(k) {
    if (k < 1) throw InvalidInput("regime index must be >= 1, got " + std::to_string(k));
  }
  int value() const { return k_; }
  friend bool operator==(RegimeIndex a, RegimeIndex b) { return a.k_ == b.k_; }

 private:
  int k_;
};

struct HybridState {
  Vector x;
  int k = 1;

  HybridState() = default;
  HybridState(Vector x_in, int k_in) : x(std::move(x_in)), k(RegimeIndex(k_in).value()) {}

  int dim() const { return static_cast<int>(x.size()); }

  bool finite() const { return x.allFinite(); }

  friend bool operator==(const HybridState& a, const HybridState& b) {
    return a.k == b.k && a.x.size() == b.x.size() && (a.x.array() == b.x.array()).all();
  }
};

inline Vector make_vector(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double value : values) v(i++) = value;
  return v;
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidInput(message);
}

inline void require_state(const HybridState& s, int dim) {
  require(s.dim() == dim, "state dimension " + std::to_string(s.dim()) +
                              " does not match model dimension " + std::to_string(dim));
  require(s.finite(), "state has non-finite components");
  require(s.k >= 1, "regime index must be >= 1");
}

}  // namespace swjd
