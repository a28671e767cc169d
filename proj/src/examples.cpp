#include "swjd/examples.hpp"

#include "swjd/jump_measure.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace swjd {

namespace {

double pow3(int n) { return std::pow(3.0, -n); }

// sum_{l > L} (l + k) 3^-l
double weighted_geometric_tail(int k, int L) {
  return pow3(L) * (2.0 * L + 3.0) / 4.0 + k * pow3(L) / 2.0;
}

}  // namespace

ModelSpec example51() {
  ModelSpec m;
  m.name = "example51";
  m.dim = 1;
  m.drift = [](const Vector& x, int k) -> Vector { return Vector::Constant(1, -x(0) / (2.0 * k * k)); };
  m.diffusion = [](const Vector& x, int) -> Matrix {
    const double c = std::cbrt(std::abs(x(0)));
    return Matrix::Constant(1, 1, c * c + 1.0);
  };
  m.jump = [](const Vector& x, int k, const Vector& u) -> Vector {
    return Vector::Constant(1, u(0) * x(0) / (std::numbers::sqrt2 * k));
  };
  m.jumps.measure = std::make_shared<RadialPowerMeasure>(1, 2.0);
  m.jumps.cutoff = 0.05;
  // c is odd in u and nu is symmetric.
  m.jumps.compensator = [](const Vector&, int, double) -> Vector { return Vector::Zero(1); };
  m.jumps.small_jump_cov = [](const Vector& x, int k, double eps) -> Matrix {
    return Matrix::Constant(1, 1, x(0) * x(0) * eps / (double(k) * k));
  };
  m.jumps.second_moment = [](const Vector& x, int k) { return x(0) * x(0) / (double(k) * k); };

  m.rates.rate = [](const Vector& x, int k, int l) {
    if (l == k) return 0.0;
    return k * pow3(l + k) / (1.0 + l * x(0) * x(0));
  };
  m.rates.row_sum = [](const Vector& x, int k) {
    const double x2 = x(0) * x(0);
    if (x2 == 0.0) return k * pow3(k) * (0.5 - pow3(k));
    // Terms decay like 3^-l; 40 terms past the last reach double precision.
    double s = 0.0;
    double p = 1.0;
    for (int l = 1; l <= 40 + k; ++l) {
      p /= 3.0;
      if (l != k) s += p / (1.0 + l * x2);
    }
    return k * pow3(k) * s;
  };
  m.rates.tail_bound = [](int k, int L) { return k * pow3(k) * pow3(L) / 2.0; };
  m.rates.uniform_bound = 1.0 / 3.0;
  m.ellipticity = 1.0;
  m.growth = 4.0;
  m.lyapunov = std::make_shared<TestFunction>(quadratic_lyapunov(1, [](int k) { return k * pow3(k); }));
  return m;
}

double example52_gamma(double delta) {
  require(delta > 0.0 && delta < 2.0, "example52: delta must lie in (0, 2)");
  return std::sqrt((2.0 - delta) / (2.0 * std::numbers::pi));
}

ModelSpec example52(double delta) {
  const double gamma = example52_gamma(delta);
  ModelSpec m;
  std::ostringstream name;
  name << "example52:" << delta;
  m.name = name.str();
  m.dim = 2;
  m.drift = [](const Vector& x, int k) -> Vector { return -(double(k) / (k + 1.0)) * x; };
  m.diffusion = [](const Vector& x, int) -> Matrix {
    return ((x.norm() + 1.0) / 4.0) * Matrix::Identity(2, 2);
  };
  m.jump = [gamma](const Vector& x, int k, const Vector& u) -> Vector {
    return std::sqrt(double(k) / (k + 1.0)) * gamma * u.norm() * x;
  };
  m.jumps.measure = std::make_shared<RadialPowerMeasure>(2, 2.0 + delta);
  m.jumps.cutoff = 0.1;
  m.jumps.compensator = [gamma, delta](const Vector& x, int k, double eps) -> Vector {
    // int_{eps < |u| < 1} |u| nu(du) = 2 pi int_eps^1 r^-delta dr
    const double radial = std::abs(delta - 1.0) < 1e-14
                              ? 2.0 * std::numbers::pi * std::log(1.0 / eps)
                              : 2.0 * std::numbers::pi * (1.0 - std::pow(eps, 1.0 - delta)) / (1.0 - delta);
    return std::sqrt(double(k) / (k + 1.0)) * gamma * radial * x;
  };
  m.jumps.small_jump_cov = [delta](const Vector& x, int k, double eps) -> Matrix {
    return (double(k) / (k + 1.0)) * std::pow(eps, 2.0 - delta) * (x * x.transpose());
  };
  m.jumps.second_moment = [](const Vector& x, int k) { return (double(k) / (k + 1.0)) * x.squaredNorm(); };

  m.rates.rate = [](const Vector& x, int k, int l) {
    if (l == k) return 0.0;
    const double r = x.norm();
    return (2.0 + std::cos(k * r)) / (std::pow(3.0, l) * (2.0 + std::sin(r * r)));
  };
  m.rates.row_sum = [](const Vector& x, int k) {
    const double r = x.norm();
    return (2.0 + std::cos(k * r)) / (2.0 + std::sin(r * r)) * (0.5 - pow3(k));
  };
  m.rates.tail_bound = [](int, int L) { return 1.5 * pow3(L); };
  m.rates.uniform_bound = 3.0;
  m.ellipticity = 1.0 / 16.0;
  m.growth = 1.25;
  m.lyapunov = std::make_shared<TestFunction>(quadratic_lyapunov(2, [](int) { return 3.0; }));
  return m;
}

TestFunction quadratic_lyapunov(int dim, std::function<double(int)> rate_scale) {
  TestFunction V;
  V.name = "|x|^2+k";
  V.value = [](const Vector& x, int k) { return x.squaredNorm() + k; };
  V.gradient = [](const Vector& x, int) -> Vector { return 2.0 * x; };
  V.hessian = [dim](const Vector&, int) -> Matrix { return 2.0 * Matrix::Identity(dim, dim); };
  // |V(x,l) - V(x,k)| = |l - k| <= l + k
  V.regime_tail = [rate_scale](const Vector&, int k, int L) { return rate_scale(k) * weighted_geometric_tail(k, L); };
  return V;
}

DriftBound example52_drift_bound(const ModelSpec& spec, const Vector& x, int k, int K_trunc) {
  require(spec.lyapunov != nullptr, "model has no attached Lyapunov function");
  GeneratorOptions opts;
  if (K_trunc > 0) opts.max_level = K_trunc;
  const GeneratorValue gv = apply_generator(spec, *spec.lyapunov, x, k, opts);
  DriftBound out;
  out.lhs = gv.value;
  out.bracket = gv.bracket;
  out.rhs = -(x.squaredNorm() + k) / 6.0 + 2.5;
  return out;
}

double example51_max_row_sum(int k) {
  require(k >= 1, "regime index must be >= 1");
  return k * pow3(k) * (0.5 - pow3(k));
}

// ---------------------------------------------------------------------------

ModelSpec zero_model(int dim) {
  require(dim >= 1 && dim <= kMaxDim, "zero model: dimension out of range");
  ModelSpec m;
  m.name = "zero:" + std::to_string(dim);
  m.dim = dim;
  m.drift = [dim](const Vector&, int) -> Vector { return Vector::Zero(dim); };
  m.diffusion = [dim](const Vector&, int) -> Matrix { return Matrix::Zero(dim, dim); };
  return m;
}

ModelSpec brownian_model(int dim) {
  ModelSpec m = zero_model(dim);
  m.name = "brownian:" + std::to_string(dim);
  m.diffusion = [dim](const Vector&, int) -> Matrix { return Matrix::Identity(dim, dim); };
  m.ellipticity = 1.0;
  m.growth = static_cast<double>(dim);
  return m;
}

ModelSpec switching_model() {
  return restrict_model(example51(), ModelParts{false, false, false, true}, "switching");
}

ModelSpec restrict_model(const ModelSpec& spec, const ModelParts& keep, const std::string& name) {
  ModelSpec m = spec;
  m.name = name;
  const int d = spec.dim;
  if (!keep.drift) m.drift = [d](const Vector&, int) -> Vector { return Vector::Zero(d); };
  if (!keep.diffusion) {
    m.diffusion = [d](const Vector&, int) -> Matrix { return Matrix::Zero(d, d); };
    m.ellipticity.reset();
  }
  if (!keep.jumps) {
    m.jump = nullptr;
    m.jumps = JumpMeasureSpec{};
  }
  if (!keep.switching) m.rates = RateMatrixSpec{};
  return m;
}

// ---------------------------------------------------------------------------

namespace {

bool parse_double(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_int(const std::string& s, int& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

ModelSpec builtin_model(const std::string& name) {
  const auto colon = name.find(':');
  const std::string head = name.substr(0, colon);
  const std::string arg = colon == std::string::npos ? std::string() : name.substr(colon + 1);
  if (head == "example51" && arg.empty()) return example51();
  if (head == "example52") {
    double delta = 1.0;
    if (!arg.empty() && !parse_double(arg, delta)) throw InvalidInput("example52: cannot parse delta '" + arg + "'");
    return example52(delta);
  }
  if (head == "zero" || head == "brownian") {
    int d = 1;
    if (!arg.empty() && !parse_int(arg, d)) throw InvalidInput(head + ": cannot parse dimension '" + arg + "'");
    return head == "zero" ? zero_model(d) : brownian_model(d);
  }
  if (head == "switching" && arg.empty()) return switching_model();
  std::string msg = "unknown model '" + name + "'; built-ins:";
  for (const auto& n : builtin_names()) msg += " " + n;
  throw InvalidInput(msg);
}

bool is_builtin_name(const std::string& name) {
  const std::string head = name.substr(0, name.find(':'));
  return head == "example51" || head == "example52" || head == "zero" || head == "brownian" || head == "switching";
}

std::vector<std::string> builtin_names() {
  return {"example51", "example52[:delta]", "zero[:d]", "brownian[:d]", "switching"};
}

}  // namespace swjd
