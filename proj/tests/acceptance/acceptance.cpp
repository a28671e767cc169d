// Acceptance suite: one PASS/FAIL line per criterion, driven through the C API.

#include "swjd/swjd.h"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

using json = nlohmann::json;

// Pinned tolerances and scales.
constexpr double kLyapunovTol = 1e-6;
constexpr double kLipschitzConstant = 0.75;
constexpr double kLipschitzTol = 1e-10;
constexpr double kShapeTol = 1e-10;
constexpr double kFamilyLevel = 0.01;
constexpr double kCrossCovZ = 4.0;
constexpr double kTrendThreshold = 0.05;
constexpr double kTrendTol = 2.0;
constexpr double kTvThreshold = 0.1;
constexpr double kDynkinZ = 4.0;
constexpr int kThreadsFirst = 1;
constexpr int kThreadsSecond = 4;

class Failure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

double numv(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
  }
  return NAN;
}

/// Runs commands through the C API and keeps every result document for the determinism check.
class Session {
 public:
  json run(const std::string& model, const std::string& command, const json& params) {
    swjd_model* m = nullptr;
    if (swjd_model_load(model.c_str(), &m) != SWJD_OK) throw Failure(model + ": " + swjd_last_error());
    swjd_result* r = nullptr;
    const swjd_status st = swjd_run(m, command.c_str(), params.dump().c_str(), &r);
    swjd_model_free(m);
    if (st != SWJD_OK) throw Failure(command + ": " + swjd_status_string(st) + ": " + swjd_last_error());
    const std::string text = swjd_result_json(r);
    swjd_result_free(r);
    documents.push_back(text);
    return json::parse(text);
  }

  std::vector<std::string> documents;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  double max_seconds;
  std::function<Outcome(Session&)> body;
};

Outcome lyapunov(Session& s) {
  const json r = s.run("example52:1.0", "lyapunov",
                       {{"grid", "-5:5:21"}, {"kmax", 30}, {"alpha", 1.0 / 6.0}, {"beta", 2.5}, {"tol", kLyapunovTol}});
  const json& res = r["result"];
  const bool pass = r["passed"].get<bool>() && res["n_points"] == 21 * 21 * 30 && res["n_failed"] == 0;
  return {pass, "max AV + V/6 - 5/2 = " + fmt(numv(res["max_margin"])) + " over " + res["n_points"].dump() +
                    " points (tol " + fmt(kLyapunovTol) + " + bracket " + fmt(numv(res["max_bracket"]), 3) + ")"};
}

Outcome lipschitz(Session& s) {
  const json r = s.run("example51", "lipschitz",
                       {{"n_pairs", 10000}, {"lo", -10}, {"hi", 10}, {"constant", kLipschitzConstant},
                        {"tol", kLipschitzTol}, {"kmax", 20}, {"seed", 2}});
  return {r["passed"].get<bool>(), "max sum_l |q_kl(x)-q_kl(y)| / |x-y| = " + fmt(numv(r["result"]["max_ratio"])) +
                                       " <= " + fmt(kLipschitzConstant) + " on 10^4 pairs x k<=20"};
}

Outcome shape_functions(Session& s) {
  bool pass = true;
  std::string detail = "alpha(R=1,2,5) =";
  for (double R : {1.0, 2.0, 5.0}) {
    const json r = s.run("example51", "g-function",
                         {{"kappa_R", 4.0 * (std::cbrt(R * R) + 1.0)}, {"lambda_R", 1.0}, {"g", "r^(-1/3)"}, {"tol", kShapeTol}});
    pass = pass && r["passed"].get<bool>();
    detail += " " + fmt(numv(r["result"]["alpha"]));
  }
  const json f = s.run("example51", "f-function", {{"g", "r^(-1/3)"}, {"r_max", 10}, {"tol", kShapeTol}});
  pass = pass && f["passed"].get<bool>();
  detail += "; G and F invariants " + std::string(pass ? "hold" : "fail") + " at tol " + fmt(kShapeTol);
  return {pass, detail};
}

Outcome marginals(Session& s) {
  const json r = s.run("example51", "coupling-marginals",
                       {{"start", {0.0, 1}}, {"start2", {0.5, 1}}, {"t", 1.0}, {"h", 1e-3}, {"n_paths", 20000},
                        {"level", kFamilyLevel}, {"seed", 4}});
  double min_p = 1.0;
  for (const auto& [name, t] : r["result"]["tests"].items()) min_p = std::min(min_p, numv(t["p_value"]));
  return {r["passed"].get<bool>(), "smallest of 4 p-values " + fmt(min_p) + " >= " + fmt(kFamilyLevel / 4)};
}

Outcome cross_covariance(Session& s) {
  const json p51 = json::array({
      {{"first", {0.0, 1}}, {"second", {0.5, 1}}},
      {{"first", {1.0, 2}}, {"second", {-1.0, 2}}},
      {{"first", {0.3, 1}}, {"second", {0.35, 3}}},
      {{"first", {-2.0, 4}}, {"second", {2.0, 1}}},
      {{"first", {5.0, 1}}, {"second", {4.5, 2}}},
  });
  const json p52 = json::array({
      {{"first", {0.5, -0.2, 2}}, {"second", {0.8, 0.1, 2}}},
      {{"first", {0.0, 0.0, 1}}, {"second", {1.0, 1.0, 1}}},
      {{"first", {-1.0, 2.0, 3}}, {"second", {1.0, -2.0, 1}}},
      {{"first", {3.0, 0.0, 1}}, {"second", {0.0, 3.0, 5}}},
      {{"first", {0.1, 0.1, 10}}, {"second", {0.2, 0.1, 10}}},
  });
  const json a = s.run("example51", "cross-covariance", {{"probes", p51}, {"n", 100000}, {"h", 1e-3}, {"seed", 5}, {"z_max", kCrossCovZ}});
  const json b = s.run("example52", "cross-covariance", {{"probes", p52}, {"n", 100000}, {"h", 1e-3}, {"seed", 5}, {"z_max", kCrossCovZ}});
  const double z = std::max(numv(a["result"]["max_z"]), numv(b["result"]["max_z"]));
  return {a["passed"].get<bool>() && b["passed"].get<bool>(),
          "max |empirical - g^ h| / stderr = " + fmt(z, 3) + " <= " + fmt(kCrossCovZ) + " over 10 probes"};
}

json modulus_params(const char* seed_tag) {
  return {{"start", {0.0, 1}}, {"offsets", {0.2, 0.1, 0.05, 0.025}}, {"t", 1.0}, {"h", 0.01}, {"n_paths", 50000},
          {"threshold", kTrendThreshold}, {"trend_tol", kTrendTol}, {"seed", std::string(seed_tag) == "feller" ? 6 : 7}};
}

std::string modulus_detail(const json& r) {
  std::string d = "moduli";
  for (const auto& p : r["result"]["points"]) d += " " + fmt(numv(p["modulus"]["estimate"]), 3);
  const json& t = r["result"]["trend"];
  d += std::string("; nonincreasing ") + (t["nonincreasing"].get<bool>() ? "yes" : "no") + ", final <= " +
       fmt(kTrendThreshold) + " " + (t["final_below"].get<bool>() ? "yes" : "no");
  return d;
}

Outcome feller(Session& s) {
  json p = modulus_params("feller");
  p["f"] = "tanh(x1)/(1+k)";
  p["f_sup"] = 0.5;
  const json r = s.run("example51", "feller", p);
  return {r["result"]["trend"]["holds"].get<bool>(), modulus_detail(r)};
}

Outcome strong_feller(Session& s) {
  json p = modulus_params("strong-feller");
  p["f"] = "(x1>=0)*(k==1)";
  p["f_sup"] = 1.0;
  const json r = s.run("example51", "strong-feller", p);
  std::string d = modulus_detail(r) + "; bound";
  for (const auto& q : r["result"]["points"]) d += " " + fmt(numv(q["bound"]), 3);
  d += r["result"]["bounds_hold"].get<bool>() ? " holds" : " violated";
  return {r["passed"].get<bool>(), d};
}

Outcome coupling_drift(Session& s) {
  const json a = s.run("brownian:2", "coupling-drift",
                       {{"kappa_R", 1.0}, {"lambda_R", 1.0}, {"g", "0"},
                        {"pairs", json::array({{{"x", {0.0, 0.0}}, {"x_tilde", {0.5, 0.0}}}})},
                        {"h", 1e-3}, {"n_paths", 100000}, {"seed", 8}});
  const double R = 1.0;
  const json b = s.run("example51", "coupling-drift",
                       {{"kappa_R", 4.0 * (std::cbrt(R * R) + 1.0)}, {"lambda_R", 1.0}, {"g", "r^(-1/3)"},
                        {"ball_radius", R},
                        {"pairs", json::array({{{"x", {0.0}}, {"x_tilde", {0.3}}, {"k", 1}},
                                               {{"x", {-0.5}}, {"x_tilde", {0.2}}, {"k", 2}},
                                               {{"x", {0.4}}, {"x_tilde", {0.9}}, {"k", 1}}})},
                        {"h", 1e-3}, {"n_paths", 100000}, {"seed", 8}});
  double worst = -INFINITY;
  for (const json* r : {&a, &b})
    for (const auto& p : (*r)["result"]["pairs"]) worst = std::max(worst, numv(p["slack"]));
  return {a["passed"].get<bool>() && b["passed"].get<bool>(),
          "Brownian drift " + fmt(numv(a["result"]["pairs"][0]["drift"]["estimate"])) +
              " vs -2; worst drift + 2 lambda_R - 4 (se + bias) = " + fmt(worst) + " <= 0 over 4 pairs"};
}

Outcome irreducible(Session& s) {
  const json r = s.run("example51", "irreducible",
                       {{"start", {0.0, 1}}, {"target", json::array({{1.0, 0.5}, {-1.0, 0.5}, {0.0, 0.25}})},
                        {"regime", {2, 3, 1}}, {"t", 2.0}, {"h", 0.01}, {"n_paths", 10000}, {"n_max", 320000}, {"seed", 9}});
  std::string d = "95% lower bounds";
  for (const auto& t : r["result"]["targets"]) d += " " + fmt(numv(t["lower_bound"]), 3);
  return {r["passed"].get<bool>(), d + " > 0"};
}

Outcome killed(Session& s) {
  const json r = s.run("example51", "killed",
                       {{"start", {0.0, 1}}, {"target", {0.0, 0.5}}, {"t", 1.0}, {"h", 0.01}, {"n_paths", 100000}, {"seed", 10}});
  const json& res = r["result"];
  return {r["passed"].get<bool>(),
          "P~ " + fmt(numv(res["killed"]["estimate"])) + " >= e^-Mt P - 3se = " +
              fmt(numv(res["lower_by_killing"]["rhs"])) + "; P " + fmt(numv(res["transition"]["estimate"])) +
              " >= P~ - 3se = " + fmt(numv(res["upper_by_transition"]["rhs"]))};
}

Outcome invariant(Session& s) {
  const json r = s.run("example52:1.0", "invariant",
                       {{"starts", json::array({{2.0, 2.0, 1}, {-2.0, -2.0, 5}})}, {"box_lo", {-2.0, -2.0}},
                        {"box_hi", {2.0, 2.0}}, {"cells", 10}, {"k_max", 10}, {"t_burn", 20.0}, {"t_end", 200.0},
                        {"h", 0.01}, {"paths_per_start", 256}, {"threshold", kTvThreshold}, {"seed", 11}});
  return {r["passed"].get<bool>(),
          "TV between starts " + fmt(numv(r["result"]["max_tv"])) + " <= " + fmt(kTvThreshold) + " on 1001 cells"};
}

Outcome dynkin(Session& s) {
  struct Probe {
    const char* model;
    json start;
    const char* f;
    double sup;
  };
  const std::vector<Probe> probes = {
      {"example51", {0.5, 1}, "x1*exp(-x1^2)", 0.4289},
      {"example51", {0.5, 1}, "cos(x1)/(1+k)", 0.5},
      {"example51", {0.5, 1}, "(k==1)", 1.0},
      {"example52", {0.5, -0.3, 1}, "x1*exp(-(x1^2+x2^2))", 0.4289},
      {"example52", {0.5, -0.3, 1}, "cos(x1+x2)/(1+k)", 0.5},
      {"example52", {0.5, -0.3, 1}, "(k==1)", 1.0},
      {"switching", {0.3, 1}, "cos(x1)/(1+k)", 0.5},
      {"switching", {0.3, 1}, "(k==1)", 1.0},
      {"switching", {0.3, 1}, "exp(-k)", 0.3679},
  };
  bool pass = true;
  double worst = 0.0;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const Probe& p = probes[i];
    const json r = s.run(p.model, "dynkin",
                         {{"start", p.start}, {"f", p.f}, {"f_sup", p.sup}, {"t", std::ldexp(1.0, -8)},
                          {"h", std::ldexp(1.0, -12)}, {"small_jumps", "gaussian"}, {"n_paths", 100000},
                          {"z_max", kDynkinZ}, {"seed", 12 + i}});
    pass = pass && r["passed"].get<bool>();
    worst = std::max(worst, numv(r["result"]["z_score"]));
  }
  return {pass, "max z " + fmt(worst, 3) + " <= " + fmt(kDynkinZ) + " over 3 models x 3 functions"};
}

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> c = {
      {1, "example52 Lyapunov drift", 60, lyapunov},
      {2, "example51 Q-row Lipschitz constant", 10, lipschitz},
      {3, "G/F invariant suite", 5, shape_functions},
      {4, "basic-coupling marginals", 120, marginals},
      {5, "reflection cross-covariance", 60, cross_covariance},
      {6, "Feller trend", 300, feller},
      {7, "strong Feller trend and bound", 300, strong_feller},
      {8, "coupling-drift inequality", 120, coupling_drift},
      {9, "irreducibility", 180, irreducible},
      {10, "killed-process inequalities", 120, killed},
      {11, "invariant-measure self-consistency", 600, invariant},
      {12, "generator-integrator consistency", 120, dynkin},
  };
  return c;
}

bool run_all(Session& s, bool print) {
  bool all = true;
  for (const auto& c : criteria()) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body(s);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.max_seconds;
    const bool pass = o.pass && in_time;
    all = all && pass;
    if (print) {
      std::printf("%s %2d %s: %s (%.1f s, limit %.0f s)\n", pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(),
                  secs, c.max_seconds);
      std::fflush(stdout);
    }
  }
  return all;
}

}  // namespace

int main() {
  swjd_set_threads(kThreadsFirst);
  Session first;
  bool all = run_all(first, true);

  const auto t0 = std::chrono::steady_clock::now();
  swjd_set_threads(kThreadsSecond);
  Session second;
  run_all(second, false);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::size_t same = 0;
  for (std::size_t i = 0; i < first.documents.size() && i < second.documents.size(); ++i)
    same += first.documents[i] == second.documents[i];
  const bool det = first.documents.size() == second.documents.size() && same == first.documents.size();
  std::printf("%s 13 determinism: %zu/%zu result documents byte-identical at %d vs %d threads (%.1f s)\n",
              det ? "PASS" : "FAIL", same, first.documents.size(), kThreadsFirst, kThreadsSecond, secs);
  all = all && det;
  return all ? 0 : 1;
}
