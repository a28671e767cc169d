#include "swjd/runner.hpp"

#include "swjd/analysis.hpp"
#include "swjd/examples.hpp"
#include "swjd/io.hpp"
#include "swjd/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace swjd {

using json = nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& msg) { throw InvalidInput(msg); }

// ---------------------------------------------------------------------------
// JSON output helpers

json num(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? json("nan") : json(v > 0 ? "inf" : "-inf");
}

json vec_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

json mat_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(num(m(i, j)));
    a.push_back(r);
  }
  return a;
}

json state_json(const HybridState& s) {
  json a = vec_json(s.x);
  a.push_back(s.k);
  return a;
}

json opt_json(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }

json est_json(const EstimatorResult& r) {
  return {{"estimate", num(r.estimate)},
          {"std_error", num(r.std_error)},
          {"ci95", {num(r.ci95.lo), num(r.ci95.hi)}},
          {"n_paths", r.n_paths},
          {"n_censored", r.n_censored}};
}

json generator_json(const GeneratorValue& g) {
  return {{"value", num(g.value)},
          {"bracket", num(g.bracket)},
          {"diffusion_term", num(g.diffusion_term)},
          {"drift_term", num(g.drift_term)},
          {"jump_term", num(g.jump_term)},
          {"switching_term", num(g.switching_term)},
          {"small_jump_bracket", num(g.small_jump_bracket)},
          {"regime_tail", num(g.regime_tail)},
          {"quadrature_error", num(g.quadrature_error)},
          {"regime_level", g.regime_level}};
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// Parameter parsing

std::vector<double> parse_reals(const json& v, const std::string& what) {
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
  } else if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number()) bad(what + ": expected numbers");
      out.push_back(e.get<double>());
    }
  } else if (v.is_string()) {
    const std::string s = v.get<std::string>();
    std::size_t pos = 0;
    while (pos <= s.size()) {
      std::size_t end = s.find(',', pos);
      if (end == std::string::npos) end = s.size();
      std::string tok = s.substr(pos, end - pos);
      tok.erase(0, tok.find_first_not_of(' '));
      tok.erase(tok.find_last_not_of(' ') + 1);
      double d = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
      if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
        bad(what + ": cannot parse '" + tok + "' as a number");
      out.push_back(d);
      pos = end + 1;
    }
  } else {
    bad(what + ": expected a number list");
  }
  for (double d : out)
    if (!std::isfinite(d)) bad(what + ": values must be finite");
  return out;
}

Vector parse_point(const json& v, int dim, const std::string& what) {
  const auto r = parse_reals(v, what);
  if (static_cast<int>(r.size()) != dim)
    bad(what + ": expected " + std::to_string(dim) + " coordinates, got " + std::to_string(r.size()));
  Vector x(dim);
  for (int i = 0; i < dim; ++i) x(i) = r[i];
  return x;
}

HybridState parse_state(const json& v, int dim, const std::string& what) {
  const auto r = parse_reals(v, what);
  if (static_cast<int>(r.size()) != dim + 1)
    bad(what + ": expected x1,...,x" + std::to_string(dim) + ",k (" + std::to_string(dim + 1) + " values), got " +
        std::to_string(r.size()));
  const double k = r.back();
  if (k < 1 || k != std::floor(k) || k > 1e9) bad(what + ": regime must be a positive integer");
  Vector x(dim);
  for (int i = 0; i < dim; ++i) x(i) = r[i];
  return HybridState(x, static_cast<int>(k));
}

class Params {
 public:
  Params(const json& in, int dim) : in_(in), dim_(dim) {
    if (!in_.is_object()) bad("parameters must be a JSON object");
  }

  int dim() const { return dim_; }
  bool has(const std::string& key) const { return in_.contains(key) && !in_.at(key).is_null(); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!has(key)) bad("missing required parameter '" + key + "'");
    resolved[key] = in_.at(key);
    return in_.at(key);
  }

  double real(const std::string& key, std::optional<double> def = {}) {
    used_.insert(key);
    double v;
    if (has(key)) {
      const json& j = in_.at(key);
      if (j.is_number()) {
        v = j.get<double>();
      } else if (j.is_string()) {
        const auto r = parse_reals(j, key);
        if (r.size() != 1) bad(key + ": expected one number");
        v = r[0];
      } else {
        bad(key + ": expected a number");
      }
    } else if (def) {
      v = *def;
    } else {
      bad("missing required parameter '" + key + "'");
    }
    if (!std::isfinite(v)) bad(key + " must be finite");
    resolved[key] = v;
    return v;
  }

  double positive(const std::string& key, std::optional<double> def = {}) {
    const double v = real(key, def);
    if (!(v > 0.0)) bad(key + " must be positive, got " + fmt(v));
    return v;
  }

  double nonnegative(const std::string& key, std::optional<double> def = {}) {
    const double v = real(key, def);
    if (!(v >= 0.0)) bad(key + " must be nonnegative, got " + fmt(v));
    return v;
  }

  std::optional<double> optional_positive(const std::string& key) {
    if (!has(key)) {
      used_.insert(key);
      return std::nullopt;
    }
    return positive(key);
  }

  long integer(const std::string& key, std::optional<long> def, long lo, long hi) {
    const double v = real(key, def ? std::optional<double>(static_cast<double>(*def)) : std::nullopt);
    if (v != std::floor(v) || v < lo || v > hi)
      bad(key + " must be an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " + fmt(v, 17));
    resolved[key] = static_cast<long>(v);
    return static_cast<long>(v);
  }

  std::uint64_t seed() {
    used_.insert("seed");
    std::uint64_t s = 1;
    if (has("seed")) {
      const json& j = in_.at("seed");
      if (j.is_number_unsigned()) {
        s = j.get<std::uint64_t>();
      } else if (j.is_number_integer() && j.get<long long>() >= 0) {
        s = static_cast<std::uint64_t>(j.get<long long>());
      } else if (j.is_string()) {
        const std::string t = j.get<std::string>();
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), s);
        if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) bad("seed must be an unsigned integer");
      } else {
        bad("seed must be an unsigned integer");
      }
    }
    resolved["seed"] = s;
    return s;
  }

  std::string text(const std::string& key, std::optional<std::string> def = {}) {
    used_.insert(key);
    std::string v;
    if (has(key)) {
      if (!in_.at(key).is_string()) bad(key + ": expected a string");
      v = in_.at(key).get<std::string>();
    } else if (def) {
      v = *def;
    } else {
      bad("missing required parameter '" + key + "'");
    }
    resolved[key] = v;
    return v;
  }

  bool flag(const std::string& key, bool def) {
    used_.insert(key);
    bool v = def;
    if (has(key)) {
      const json& j = in_.at(key);
      if (j.is_boolean()) {
        v = j.get<bool>();
      } else if (j.is_string() && (j == "true" || j == "false")) {
        v = j == "true";
      } else {
        bad(key + ": expected true or false");
      }
    }
    resolved[key] = v;
    return v;
  }

  HybridState state(const std::string& key) {
    const HybridState s = parse_state(raw(key), dim_, key);
    resolved[key] = state_json(s);
    return s;
  }

  Vector point(const std::string& key) {
    const Vector x = parse_point(raw(key), dim_, key);
    resolved[key] = vec_json(x);
    return x;
  }

  std::vector<double> reals(const std::string& key, std::optional<std::vector<double>> def = {}) {
    used_.insert(key);
    std::vector<double> v;
    if (has(key)) {
      v = parse_reals(in_.at(key), key);
    } else if (def) {
      v = *def;
    } else {
      bad("missing required parameter '" + key + "'");
    }
    json a = json::array();
    for (double d : v) a.push_back(d);
    resolved[key] = a;
    return v;
  }

  /// Marks an optional key as known without recording a value.
  void allow(const std::string& key) {
    used_.insert(key);
    if (has(key)) bad("parameters '" + key + "' and its alternative are mutually exclusive");
  }

  /// Rejects keys the command did not read.
  void finish(const std::string& command) const {
    for (const auto& [key, value] : in_.items()) {
      if (!used_.count(key)) bad(command + ": unknown parameter '" + key + "'");
    }
  }

  json resolved = json::object();

 private:
  const json& in_;
  int dim_;
  std::set<std::string> used_;
};

struct Context {
  const LoadedModel& model;
  const ModelSpec& spec;
  Params& p;
  CommandOutput out;
  json result = json::object();
};

/// `t_key` null: a single-step config with horizon = h.
IntegratorConfig read_integrator(Context& c, double t_def, double h_def, const char* policy_def = "drop",
                                 const char* t_key = "t") {
  IntegratorConfig cfg;
  if (t_key) cfg.horizon = c.p.positive(t_key, t_def);
  cfg.step = c.p.positive("h", h_def);
  if (!t_key) cfg.horizon = cfg.step;
  cfg.small_jumps = parse_small_jump_policy(c.p.text("small_jumps", std::string(policy_def)));
  cfg.cutoff = c.p.optional_positive("cutoff");
  cfg.exit_radius = c.p.positive("exit_radius", 1e6);
  cfg.regime_rel_tol = c.p.positive("regime_rel_tol", c.model.regime_rel_tol.value_or(1e-12));
  cfg.validate(c.spec);
  return cfg;
}

CouplingConfig read_coupling(Context& c, const IntegratorConfig& ic, CouplingKind kind) {
  CouplingConfig cfg;
  cfg.kind = kind;
  cfg.integrator = ic;
  cfg.lambda_R = c.p.optional_positive("lambda_R");
  cfg.ball_radius = c.p.positive("ball_radius", 10.0);
  cfg.delta0 = c.p.positive("delta0", 1.0);
  cfg.eta = c.p.optional_positive("eta");
  cfg.bridge_test = c.p.flag("bridge_test", true);
  cfg.validate(c.spec);
  return cfg;
}

RunOptions read_run(Context& c, std::size_t n_def) {
  RunOptions run;
  run.n_paths = static_cast<std::size_t>(c.p.integer("n_paths", static_cast<long>(n_def), 1, 100000000));
  run.seed = c.p.seed();
  run.censoring = parse_censor_policy(c.p.text("censoring", std::string("condition")));
  return run;
}

TestFunction read_function(Context& c, const std::string& def_expr, double def_sup) {
  const bool custom = c.p.has("f");
  const std::string expr = c.p.text("f", def_expr);
  const double sup = custom ? c.p.positive("f_sup") : c.p.positive("f_sup", def_sup);
  return expression_function(expr, c.spec.dim, sup);
}

/// Parses a "lo:hi:n" axis grid.
struct Axis {
  double lo = 0.0;
  double hi = 0.0;
  int n = 1;
};

Axis parse_axis(const std::string& s, const std::string& what) {
  Axis a;
  std::vector<double> parts;
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    std::size_t end = s.find(':', pos);
    if (i < 2 && end == std::string::npos) bad(what + ": expected lo:hi:n, got '" + s + "'");
    if (i == 2) end = s.size();
    parts.push_back(parse_reals(json(s.substr(pos, end - pos)), what).at(0));
    pos = end + 1;
  }
  a.lo = parts[0];
  a.hi = parts[1];
  if (parts[2] < 1 || parts[2] != std::floor(parts[2]) || parts[2] > 100000)
    bad(what + ": point count must be a positive integer");
  a.n = static_cast<int>(parts[2]);
  if (!(a.hi >= a.lo)) bad(what + ": need lo <= hi");
  if (a.n > 1 && a.hi == a.lo) bad(what + ": several points on an empty interval");
  return a;
}

std::vector<Vector> read_x_tilde(Context& c, const Vector& x) {
  std::vector<Vector> pts;
  if (c.p.has("x_tilde")) {
    const json& v = c.p.raw("x_tilde");
    if (!v.is_array() || v.empty()) bad("x_tilde: expected a nonempty list of points");
    json norm = json::array();
    for (const auto& e : v) {
      pts.push_back(parse_point(e, c.spec.dim, "x_tilde"));
      norm.push_back(vec_json(pts.back()));
    }
    c.p.resolved["x_tilde"] = norm;
    c.p.allow("offsets");
  } else {
    c.p.allow("x_tilde");
    const auto off = c.p.reals("offsets", std::vector<double>{0.2, 0.1, 0.05, 0.025});
    if (off.empty()) bad("offsets: expected at least one value");
    for (double o : off) {
      Vector y = x;
      y(0) += o;
      pts.push_back(y);
    }
  }
  return pts;
}


// ---------------------------------------------------------------------------
// Subcommands

void cmd_simulate(Context& c) {
  const HybridState start = c.p.state("start");
  IntegratorConfig cfg = read_integrator(c, 1.0, 1e-3);
  cfg.record_stride = static_cast<int>(c.p.integer("record_stride", 1, 0, 1000000000));
  cfg.record_events = true;
  const std::uint64_t seed = c.p.seed();
  require_state(start, c.spec.dim);
  c.p.finish("simulate");

  const PathRecord path = simulate_path(c.spec, start, cfg, seed);
  c.result = {{"n_steps", cfg.n_steps()},
              {"n_recorded", path.times.size()},
              {"terminal", state_json(path.terminal)},
              {"exit_time", opt_json(path.exit_time)},
              {"n_switch", path.switch_events.size()},
              {"n_jump", path.jump_events.size()},
              {"neglected_variance", num(path.neglected_variance)}};
  const int mark_dim = c.spec.jumps.measure ? c.spec.jumps.measure->mark_dim() : 0;
  c.out.artifacts.push_back({"path.csv", path_csv(path)});
  c.out.artifacts.push_back({"events.bin", event_log(path, c.spec.dim, mark_dim)});
  c.out.summary = "simulate: terminal state " + c.result["terminal"].dump() + " after " +
                  std::to_string(cfg.n_steps()) + " steps, " + std::to_string(path.switch_events.size()) +
                  " switches, " + std::to_string(path.jump_events.size()) + " jumps" +
                  (path.exited() ? ", exited at t=" + fmt(*path.exit_time) : "");
}

void cmd_couple(Context& c) {
  const HybridState a = c.p.state("start");
  const HybridState b = c.p.state("start2");
  const CouplingKind kind = parse_coupling_kind(c.p.text("coupling", std::string("reflection")));
  IntegratorConfig ic = read_integrator(c, 1.0, 1e-3);
  ic.record_stride = static_cast<int>(c.p.integer("record_stride", 1, 0, 1000000000));
  const CouplingConfig cfg = read_coupling(c, ic, kind);
  const std::uint64_t seed = c.p.seed();
  require_state(a, c.spec.dim);
  require_state(b, c.spec.dim);
  c.p.finish("couple");

  const CoupledPathRecord r = kind == CouplingKind::basic ? couple_basic(c.spec, a, b, cfg, seed)
                                                          : couple_reflection(c.spec, a, b, cfg, seed);
  c.result = {{"marks",
               {{"tau_R", opt_json(r.marks.tau_R)},
                {"S_delta0", opt_json(r.marks.S_delta0)},
                {"zeta", opt_json(r.marks.zeta)},
                {"T", opt_json(r.marks.T)},
                {"T_tilde", opt_json(r.marks.T_tilde)}}},
              {"coalesced", r.coalesced},
              {"terminal_first", state_json(r.terminal_first)},
              {"terminal_second", state_json(r.terminal_second)},
              {"exit_time", opt_json(r.exit_time)},
              {"clamp_warnings", r.clamp_warnings}};
  c.out.artifacts.push_back({"coupled.csv", coupled_csv(r)});
  c.out.summary = std::string("couple (") + to_string(kind) + "): " +
                  (r.coalesced ? "coalesced at t=" + fmt(*r.marks.T_tilde) : std::string("not coalesced")) +
                  ", final distance " + fmt(r.distance.empty() ? 0.0 : r.distance.back());
}

void cmd_modulus(Context& c, CouplingKind kind) {
  const bool basic = kind == CouplingKind::basic;
  const std::string name = basic ? "feller" : "strong-feller";
  const HybridState start = c.p.state("start");
  const std::vector<Vector> xt = read_x_tilde(c, start.x);
  const TestFunction f = basic ? read_function(c, "tanh(x1)/(1+k)", 0.5) : read_function(c, "(x1>=0)*(k==1)", 1.0);
  const double threshold = c.p.positive("threshold", 0.1 * *f.sup_norm);
  const double trend_tol = c.p.positive("trend_tol", 2.0);
  const IntegratorConfig ic = read_integrator(c, 1.0, 1e-2);
  const CouplingConfig cfg = read_coupling(c, ic, kind);
  const RunOptions run = read_run(c, 10000);
  c.p.finish(name);

  const auto pts = basic ? feller_modulus(c.spec, f, start.x, xt, start.k, cfg, run)
                         : strong_feller_modulus(c.spec, f, start.x, xt, start.k, cfg, run);
  std::vector<EstimatorResult> mods;
  json arr = json::array();
  bool bounds = true;
  std::string csv = "point";
  for (int i = 1; i <= c.spec.dim; ++i) csv += ",xt" + std::to_string(i);
  csv += ",offset,difference,modulus,modulus_se,zeta_prob,gap_before_zeta,unmet_prob,distance,bound,bound_holds\n";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const ModulusPoint& m = pts[i];
    mods.push_back(m.modulus);
    bounds = bounds && m.bound_holds;
    json e = {{"x_tilde", vec_json(m.x_tilde)},
              {"offset", num((m.x_tilde - start.x).norm())},
              {"difference", est_json(m.difference)},
              {"modulus", est_json(m.modulus)},
              {"zeta_prob", est_json(m.zeta_prob)},
              {"gap_before_zeta", est_json(m.gap_before_zeta)},
              {"distance", est_json(m.distance)},
              {"bound", num(m.bound)},
              {"bound_holds", m.bound_holds}};
    if (!basic) e["unmet_prob"] = est_json(m.unmet_prob);
    arr.push_back(e);
    csv += std::to_string(i);
    for (int j = 0; j < c.spec.dim; ++j) csv += "," + format_double(m.x_tilde(j));
    for (double v : {(m.x_tilde - start.x).norm(), m.difference.estimate, m.modulus.estimate, m.modulus.std_error,
                     m.zeta_prob.estimate, m.gap_before_zeta.estimate, basic ? 0.0 : m.unmet_prob.estimate,
                     m.distance.estimate, m.bound})
      csv += "," + format_double(v);
    csv += m.bound_holds ? ",1\n" : ",0\n";
  }
  const TrendCheck trend = check_trend(mods, threshold, trend_tol);
  c.result = {{"points", arr},
              {"trend", {{"nonincreasing", trend.nonincreasing}, {"final_below", trend.final_below},
                         {"threshold", threshold}, {"holds", trend.holds()}}},
              {"bounds_hold", bounds}};
  c.out.passed = trend.holds() && bounds;
  c.out.artifacts.push_back({"modulus.csv", csv});
  c.out.summary = name + ": " + std::to_string(pts.size()) + " points, final modulus " +
                  fmt(mods.back().estimate) + " (se " + fmt(mods.back().std_error) + "), trend " +
                  (trend.holds() ? "holds" : "fails") + ", bound " + (bounds ? "holds" : "fails");
}

std::vector<TargetSet> read_targets(Context& c) {
  const int d = c.spec.dim;
  std::vector<json> items;
  const json& t = c.p.raw("target");
  const bool many = t.is_array() && !t.empty() && (t.front().is_array() || t.front().is_string());
  if (many) {
    for (const auto& e : t) items.push_back(e);
  } else {
    items.push_back(t);
  }
  const auto regimes = c.p.reals("regime");
  if (regimes.size() != 1 && regimes.size() != items.size())
    bad("regime: give one regime or one per target");
  std::vector<TargetSet> out;
  json norm = json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto r = parse_reals(items[i], "target");
    if (static_cast<int>(r.size()) != d + 1) bad("target: expected a1,...,a" + std::to_string(d) + ",radius");
    TargetSet ts;
    ts.center = Vector(d);
    for (int j = 0; j < d; ++j) ts.center(j) = r[j];
    ts.radius = r[d];
    if (!(ts.radius > 0.0)) bad("target radius must be positive");
    const double l = regimes.size() == 1 ? regimes[0] : regimes[i];
    if (l < 1 || l != std::floor(l) || l > 1e9) bad("regime must be a positive integer");
    ts.regime = static_cast<int>(l);
    out.push_back(ts);
    norm.push_back({{"center", vec_json(ts.center)}, {"radius", ts.radius}, {"regime", ts.regime}});
  }
  c.p.resolved["target"] = norm;
  c.p.resolved.erase("regime");
  return out;
}

void cmd_irreducible(Context& c) {
  const HybridState start = c.p.state("start");
  const std::vector<TargetSet> targets = read_targets(c);
  const IntegratorConfig ic = read_integrator(c, 1.0, 1e-2);
  const RunOptions run = read_run(c, 10000);
  const auto n_max = static_cast<std::size_t>(
      c.p.integer("n_max", static_cast<long>(std::max<std::size_t>(run.n_paths, 160000)), 1, 100000000));
  if (n_max < run.n_paths) bad("n_max must be at least n_paths");
  c.p.finish("irreducible");

  json arr = json::array();
  bool all = true;
  double min_lb = 1.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    RunOptions r = run;
    r.seed = derive_seed(run.seed, i, 11);
    const TransitionEstimate te = estimate_transition_adaptive(c.spec, start, targets[i], ic, r, n_max);
    all = all && te.lower_bound > 0.0;
    min_lb = std::min(min_lb, te.lower_bound);
    arr.push_back({{"center", vec_json(targets[i].center)},
                   {"radius", targets[i].radius},
                   {"regime", targets[i].regime},
                   {"probability", est_json(te.result)},
                   {"hits", te.hits},
                   {"lower_bound", num(te.lower_bound)},
                   {"rounds", te.rounds}});
  }
  c.result = {{"targets", arr}, {"all_positive", all}, {"min_lower_bound", num(min_lb)}};
  c.out.passed = all;
  c.out.summary = "irreducible: " + std::to_string(targets.size()) + " target(s), smallest 95% lower bound " +
                  fmt(min_lb) + (all ? " > 0" : ", not all positive");
}

void cmd_killed(Context& c) {
  const HybridState start = c.p.state("start");
  const Vector center = [&] {
    const json& t = c.p.raw("target");
    if (t.is_array() && t.size() > 1 && !t.front().is_number()) bad("killed: give exactly one target");
    const auto r = parse_reals(t.is_array() && t.size() == 1 && !t.front().is_number() ? t.front() : t, "target");
    if (static_cast<int>(r.size()) != c.spec.dim + 1) bad("target: expected a1,...,ad,radius");
    Vector v(c.spec.dim);
    for (int j = 0; j < c.spec.dim; ++j) v(j) = r[j];
    if (!(r.back() > 0.0)) bad("target radius must be positive");
    c.p.resolved["target"] = r;
    return v;
  }();
  const double radius = c.p.resolved["target"].back().get<double>();
  std::optional<double> default_rate;
  if (c.spec.name == "example51") default_rate = example51_max_row_sum(start.k);
  if (!c.spec.rates.switching()) default_rate = 0.0;
  if (!default_rate && !c.p.has("sup_rate"))
    bad("killed: this model has no known bound on sup_x q_k(x); pass sup_rate");
  const double M = c.p.nonnegative("sup_rate", default_rate);
  const IntegratorConfig ic = read_integrator(c, 1.0, 1e-2);
  const RunOptions run = read_run(c, 10000);
  c.p.finish("killed");

  const TargetSet target{center, radius, start.k};
  const KilledEstimate ke = estimate_killed_subtransition(c.spec, start, target, ic, run);
  RunOptions r2 = run;
  r2.seed = derive_seed(run.seed, 0, 13);
  const TransitionEstimate full = estimate_transition(c.spec, start, target, ic, r2);

  const double w = std::exp(-M * ic.horizon);
  const double rhs1 = w * ke.frozen.estimate - 3.0 * (ke.killed.std_error + w * ke.frozen.std_error);
  const bool ok1 = ke.killed.estimate >= rhs1;
  const double rhs2 = ke.killed.estimate - 3.0 * std::hypot(full.result.std_error, ke.killed.std_error);
  const bool ok2 = full.result.estimate >= rhs2;
  c.result = {{"killed", est_json(ke.killed)},
              {"frozen", est_json(ke.frozen)},
              {"survival", est_json(ke.survival)},
              {"transition", est_json(full.result)},
              {"sup_rate", M},
              {"killing_floor", w},
              {"lower_by_killing", {{"lhs", num(ke.killed.estimate)}, {"rhs", num(rhs1)}, {"holds", ok1}}},
              {"upper_by_transition", {{"lhs", num(full.result.estimate)}, {"rhs", num(rhs2)}, {"holds", ok2}}}};
  c.out.passed = ok1 && ok2;
  c.out.summary = "killed: P~=" + fmt(ke.killed.estimate) + " vs e^-Mt P=" + fmt(w * ke.frozen.estimate) +
                  ", P(t,(x,k),Bx{k})=" + fmt(full.result.estimate) + (c.out.passed ? ", both hold" : ", violated");
}

void cmd_invariant(Context& c) {
  const int d = c.spec.dim;
  std::vector<HybridState> starts;
  if (c.p.has("starts")) {
    const json& s = c.p.raw("starts");
    if (!s.is_array() || s.empty()) bad("starts: expected a nonempty list of states");
    json norm = json::array();
    for (const auto& e : s) {
      starts.push_back(parse_state(e, d, "starts"));
      norm.push_back(state_json(starts.back()));
    }
    c.p.resolved["starts"] = norm;
  } else {
    c.p.allow("starts");
    starts = {HybridState(Vector::Constant(d, 2.0), 1), HybridState(Vector::Constant(d, -2.0), 5)};
    json norm = json::array();
    for (const auto& st : starts) norm.push_back(state_json(st));
    c.p.resolved["starts"] = norm;
  }
  Partition part;
  part.lo = c.p.has("box_lo") ? c.p.point("box_lo") : Vector::Constant(d, -2.0);
  part.hi = c.p.has("box_hi") ? c.p.point("box_hi") : Vector::Constant(d, 2.0);
  c.p.resolved["box_lo"] = vec_json(part.lo);
  c.p.resolved["box_hi"] = vec_json(part.hi);
  const auto cells = c.p.reals("cells", std::vector<double>{10.0});
  if (cells.size() != 1 && static_cast<int>(cells.size()) != d) bad("cells: give one count or one per axis");
  for (int i = 0; i < d; ++i) {
    const double n = cells.size() == 1 ? cells[0] : cells[i];
    if (n < 1 || n != std::floor(n) || n > 1e6) bad("cells must be positive integers");
    part.cells.push_back(static_cast<int>(n));
  }
  part.k_max = static_cast<int>(c.p.integer("k_max", 10, 1, 1000000));
  part.validate(d);
  InvariantOptions opts;
  opts.t_burn = c.p.nonnegative("t_burn", 20.0);
  const IntegratorConfig ic = read_integrator(c, 200.0, 1e-2, "drop", "t_end");
  opts.t_end = ic.horizon;
  if (!(opts.t_burn < opts.t_end)) bad("t_burn must be below t_end");
  opts.paths_per_start = static_cast<std::size_t>(c.p.integer("paths_per_start", 64, 1, 100000000));
  opts.seed = c.p.seed();
  const double threshold = c.p.positive("threshold", 0.1);
  for (const auto& s : starts) require_state(s, d);
  c.p.finish("invariant");

  const InvariantReport rep = estimate_invariant(c.spec, starts, part, ic, opts);
  double max_tv = 0.0;
  json tv = json::array();
  for (const auto& row : rep.tv) {
    json r = json::array();
    for (double v : row) {
      r.push_back(num(v));
      max_tv = std::max(max_tv, v);
    }
    tv.push_back(r);
  }
  json wtv = json::array();
  for (double v : rep.window_tv) wtv.push_back(num(v));
  const std::size_t overflow = part.size() - 1;
  json overflow_mass = json::array();
  for (const auto& h : rep.histograms) overflow_mass.push_back(num(h[overflow]));
  c.result = {{"n_cells", part.size()},
              {"tv", tv},
              {"max_tv", num(max_tv)},
              {"window_tv", wtv},
              {"overflow_mass", overflow_mass},
              {"n_censored", rep.n_censored}};
  c.out.passed = max_tv <= threshold;

  std::string csv = "cell,k";
  for (int i = 1; i <= d; ++i) csv += ",c" + std::to_string(i);
  for (std::size_t s = 0; s < starts.size(); ++s) csv += ",mass" + std::to_string(s + 1);
  csv += "\n";
  for (std::size_t idx = 0; idx < part.size(); ++idx) {
    csv += std::to_string(idx);
    if (idx == overflow) {
      csv += ",-1";
      for (int i = 0; i < d; ++i) csv += ",-1";
    } else {
      std::size_t rem = idx;
      std::vector<int> ci(d);
      for (int i = d - 1; i >= 0; --i) {
        ci[i] = static_cast<int>(rem % part.cells[i]);
        rem /= part.cells[i];
      }
      csv += "," + std::to_string(rem + 1);
      for (int i = 0; i < d; ++i) csv += "," + std::to_string(ci[i]);
    }
    for (const auto& h : rep.histograms) csv += "," + format_double(h[idx]);
    csv += "\n";
  }
  c.out.artifacts.push_back({"occupation.csv", csv});
  c.out.summary = "invariant: " + std::to_string(starts.size()) + " starts, max TV " + fmt(max_tv) +
                  (c.out.passed ? " <= " : " > ") + fmt(threshold);
}

std::vector<HybridState> read_grid(Context& c, const std::string& def, long kmax_def) {
  const Axis a = parse_axis(c.p.text("grid", def), "grid");
  const int kmax = static_cast<int>(c.p.integer("kmax", kmax_def, 1, 1000000));
  double total = std::pow(static_cast<double>(a.n), c.spec.dim) * kmax;
  if (total > 5e7) bad("grid has too many points");
  return grid_probes(c.spec.dim, a.lo, a.hi, a.n, kmax);
}

void cmd_lyapunov(Context& c) {
  const auto grid = read_grid(c, "-5:5:21", 30);
  LyapunovCertificate cert;
  if (c.p.has("V")) {
    cert.V = expression_function(c.p.text("V"), c.spec.dim);
  } else {
    c.p.allow("V");
    if (!c.spec.lyapunov) bad("lyapunov: the model has no attached Lyapunov function; pass V");
    cert.V = *c.spec.lyapunov;
  }
  cert.rate = c.p.has("rate") ? expression_function(c.p.text("rate"), c.spec.dim) : cert.V;
  if (!c.p.has("rate")) c.p.allow("rate");
  cert.alpha = c.p.nonnegative("alpha", 1.0 / 6.0);
  cert.beta = c.p.nonnegative("beta", 2.5);
  if (c.p.has("box_lo") || c.p.has("box_hi")) {
    cert.box_lo = c.p.point("box_lo");
    cert.box_hi = c.p.point("box_hi");
    cert.n_lo = static_cast<int>(c.p.integer("n_lo", 1, 1, 1000000000));
    cert.n_hi = static_cast<int>(c.p.integer("n_hi", 1000000000, 1, 1000000000));
    cert.whole_space = false;
  } else {
    c.p.allow("n_lo");
    c.p.allow("n_hi");
  }
  const double tol = c.p.nonnegative("tol", 1e-6);
  GeneratorOptions go;
  go.quad_tol = c.p.positive("quad_tol", 1e-9);
  if (c.p.has("regime_level")) go.max_level = static_cast<int>(c.p.integer("regime_level", {}, 1, 1000000));
  else c.p.allow("regime_level");
  c.p.finish("lyapunov");

  const DriftReport rep = check_lyapunov(c.spec, cert, grid, go);
  const bool holds = rep.holds(tol);
  json margins = json::array();
  json brackets = json::array();
  for (const auto& p : rep.points) {
    margins.push_back(num(p.margin));
    brackets.push_back(num(p.bracket));
  }
  c.result = {{"n_points", rep.points.size()},
              {"max_margin", num(rep.max_margin)},
              {"max_bracket", num(rep.max_bracket)},
              {"worst_point", rep.worst_point ? state_json(*rep.worst_point) : json(nullptr)},
              {"n_failed", rep.n_failed},
              {"holds", holds},
              {"margins", margins},
              {"brackets", brackets}};
  c.out.passed = holds;
  c.out.artifacts.push_back({"drift.csv", drift_csv(rep)});
  c.out.summary = "lyapunov: " + std::to_string(rep.points.size()) + " points, max margin " + fmt(rep.max_margin, 6) +
                  " (bracket " + fmt(rep.max_bracket, 3) + "), " + (holds ? "holds" : "violated");
}

json check_json(double value, double limit, bool ok) {
  return {{"value", num(value)}, {"limit", num(limit)}, {"holds", ok}};
}

void cmd_g_function(Context& c) {
  const double kappa = c.p.positive("kappa_R");
  const double lambda = c.p.positive("lambda_R");
  const std::string gtext = c.p.text("g", std::string("r^(-1/3)"));
  const int grid_log2 = static_cast<int>(c.p.integer("grid_log2", 12, 4, 18));
  const int n = static_cast<int>(c.p.integer("check_points", 1024, 8, 1 << 20));
  const double tol = c.p.nonnegative("tol", 1e-10);
  const auto g = expression_of_r(gtext);
  c.p.finish("g-function");

  const GFunction G = build_G(kappa, lambda, g, grid_log2);
  const double dr = 1.0 / n;
  std::vector<double> v(n + 1);
  for (int i = 0; i <= n; ++i) v[i] = G(i * dr);
  double d1 = std::numeric_limits<double>::infinity();
  double d2 = -std::numeric_limits<double>::infinity();
  double below = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) d1 = std::min(d1, (v[i + 1] - v[i]) / dr);
  for (int i = 1; i < n; ++i) d2 = std::max(d2, (v[i + 1] - 2 * v[i] + v[i - 1]) / (dr * dr));
  for (int i = 0; i <= n && i * dr <= G.alpha; ++i) below = std::max(below, i * dr - v[i]);
  const bool pos_alpha = !G.alpha_degenerate && G.alpha > 0.0;
  const bool ok0 = std::abs(v[0]) <= tol, ok1 = d1 >= -tol, ok2 = d2 <= tol, ok3 = below <= tol;
  c.result = {{"alpha", num(G.alpha)},
              {"alpha_grid", num(G.alpha_grid)},
              {"alpha_degenerate", G.alpha_degenerate},
              {"G1", num(G(1.0))},
              {"dG0", num(G.derivative(0.0))},
              {"checks",
               {{"G0_zero", check_json(v[0], tol, ok0)},
                {"nondecreasing", check_json(d1, -tol, ok1)},
                {"concave", check_json(d2, tol, ok2)},
                {"alpha_positive", check_json(G.alpha, 0.0, pos_alpha)},
                {"identity_below", check_json(below, tol, ok3)}}}};
  c.out.passed = ok0 && ok1 && ok2 && ok3 && pos_alpha;
  std::string csv = "r,G,dG,d2G\n";
  for (int i = 0; i <= n; ++i) {
    const double r = i * dr;
    csv += format_double(r) + "," + format_double(v[i]) + "," + format_double(G.derivative(r)) + "," +
           (i == 0 ? std::string("nan") : format_double(G.second_derivative(r))) + "\n";
  }
  c.out.artifacts.push_back({"g.csv", csv});
  c.out.summary = "g-function: alpha " + fmt(G.alpha) + ", G(1) " + fmt(G(1.0)) + ", invariants " +
                  (c.out.passed ? "hold" : "fail");
}

void cmd_f_function(Context& c) {
  const std::string gtext = c.p.text("g", std::string("r^(-1/3)"));
  const double r_max = c.p.positive("r_max", 10.0);
  const int grid_log2 = static_cast<int>(c.p.integer("grid_log2", 12, 4, 18));
  const int n = static_cast<int>(c.p.integer("check_points", 2560, 8, 1 << 22));
  const double tol = c.p.nonnegative("tol", 1e-10);
  const auto g = expression_of_r(gtext);
  c.p.finish("f-function");

  const FFunction F = build_F(g, grid_log2);
  const double dr = r_max / n;
  std::vector<double> v(n + 1);
  for (int i = 0; i <= n; ++i) v[i] = F(i * dr);
  double lo = std::numeric_limits<double>::infinity();
  double over = -std::numeric_limits<double>::infinity();
  double d2 = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    const double r = i * dr;
    lo = std::min(lo, v[i]);
    over = std::max(over, v[i] - r / (1 + r));
  }
  for (int i = 1; i < n; ++i) d2 = std::max(d2, (v[i + 1] - 2 * v[i] + v[i - 1]) / (dr * dr));
  const bool ok0 = std::abs(v[0]) <= tol, ok1 = lo >= -tol, ok2 = over <= tol, ok3 = d2 <= tol;
  c.result = {{"F_rmax", num(v[n])},
              {"checks",
               {{"F0_zero", check_json(v[0], tol, ok0)},
                {"nonnegative", check_json(lo, -tol, ok1)},
                {"below_r_over_1pr", check_json(over, tol, ok2)},
                {"concave", check_json(d2, tol, ok3)}}}};
  c.out.passed = ok0 && ok1 && ok2 && ok3;
  std::string csv = "r,F,dF,d2F\n";
  for (int i = 0; i <= n; ++i) {
    const double r = i * dr;
    csv += format_double(r) + "," + format_double(v[i]) + "," + format_double(F.derivative(r)) + "," +
           (i == 0 ? std::string("nan") : format_double(F.second_derivative(r))) + "\n";
  }
  c.out.artifacts.push_back({"f.csv", csv});
  c.out.summary = std::string("f-function: F(") + fmt(r_max) + ") " + fmt(v[n]) + ", invariants " +
                  (c.out.passed ? "hold" : "fail");
}

void cmd_validate(Context& c) {
  auto probes = read_grid(c, "-10:10:41", 20);
  const long n_random = c.p.integer("random", 0, 0, 10000000);
  const std::uint64_t seed = c.p.seed();
  ValidationOptions vo;
  vo.regime_rel_tol = c.p.positive("regime_rel_tol", c.model.regime_rel_tol.value_or(1e-12));
  vo.mark_samples = static_cast<int>(c.p.integer("mark_samples", 8, 1, 100000));
  c.p.finish("validate");

  if (n_random > 0) {
    const Axis a = parse_axis(c.p.resolved["grid"].get<std::string>(), "grid");
    const int kmax = c.p.resolved["kmax"].get<int>();
    for (long i = 0; i < n_random; ++i) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i), 17));
      Vector x(c.spec.dim);
      for (int j = 0; j < c.spec.dim; ++j) x(j) = a.lo + (a.hi - a.lo) * rng.uniform();
      probes.emplace_back(x, 1 + static_cast<int>(rng.uniform() * kmax));
    }
  }
  const ValidationReport rep = validate_model(c.spec, probes, default_directions(c.spec.dim), vo);
  json checks = json::array();
  std::size_t violated = 0;
  for (const auto& ch : rep.checks) {
    violated += ch.violated;
    checks.push_back({{"name", ch.name},
                      {"description", ch.description},
                      {"applicable", ch.applicable},
                      {"worst_value", num(ch.worst_value)},
                      {"margin", num(ch.margin)},
                      {"worst_point", ch.worst_point ? state_json(*ch.worst_point) : json(nullptr)},
                      {"violated", ch.violated},
                      {"message", ch.message}});
  }
  c.result = {{"n_points", rep.n_points}, {"checks", checks}, {"n_violated", violated}};
  c.out.passed = !rep.any_violation();
  c.out.summary = "validate: " + std::to_string(rep.n_points) + " probes, " + std::to_string(rep.checks.size()) +
                  " checks, " + std::to_string(violated) + " violated";
}

void cmd_dynkin(Context& c) {
  const HybridState start = c.p.state("start");
  const TestFunction f = read_function(c, "cos(x1)/(1+k)", 0.5);
  const IntegratorConfig ic = read_integrator(c, std::ldexp(1.0, -8), std::ldexp(1.0, -12), "gaussian");
  const RunOptions run = read_run(c, 100000);
  const double z_max = c.p.positive("z_max", 4.0);
  GeneratorOptions go;
  go.quad_tol = c.p.positive("quad_tol", 1e-9);
  require_state(start, c.spec.dim);
  c.p.finish("dynkin");

  const DynkinResult r = dynkin_check(c.spec, f, start, ic, run, go);
  c.result = {{"lhs", est_json(r.lhs)},
              {"lhs_half", est_json(r.lhs_half)},
              {"rhs", generator_json(r.rhs)},
              {"bias_allowance", num(r.bias_allowance)},
              {"z_score", num(r.z_score)}};
  c.out.passed = r.z_score <= z_max;
  c.out.summary = "dynkin: (E f - f)/t = " + fmt(r.lhs.estimate) + ", Af = " + fmt(r.rhs.value) + ", z = " +
                  fmt(r.z_score, 3) + (c.out.passed ? " <= " : " > ") + fmt(z_max);
}

void cmd_lipschitz(Context& c) {
  const double L = c.p.positive("constant", 0.75);
  const long n = c.p.integer("n_pairs", 10000, 1, 100000000);
  const double lo = c.p.real("lo", -10.0);
  const double hi = c.p.real("hi", 10.0);
  if (!(hi > lo)) bad("need lo < hi");
  const int kmax = static_cast<int>(c.p.integer("kmax", 20, 1, 1000000));
  const double tol = c.p.nonnegative("tol", 1e-10);
  const std::uint64_t seed = c.p.seed();
  if (!c.spec.rates.switching()) bad("lipschitz: the model has no switching rates");
  c.p.finish("lipschitz");

  struct Worst {
    double slack = -std::numeric_limits<double>::infinity();
    double ratio = 0.0;
    double tail = 0.0;
    Vector x, y;
    int k = 1;
  };
  const auto per_pair = parallel_map<Worst>(static_cast<std::size_t>(n), [&](std::size_t i) {
    Rng rng(derive_seed(seed, i, 19));
    Vector x(c.spec.dim), y(c.spec.dim);
    for (int j = 0; j < c.spec.dim; ++j) x(j) = lo + (hi - lo) * rng.uniform();
    for (int j = 0; j < c.spec.dim; ++j) y(j) = lo + (hi - lo) * rng.uniform();
    Worst w;
    const double dist = (x - y).norm();
    for (int k = 1; k <= kmax; ++k) {
      const RateDifference rd = rate_difference_sum(c.spec.rates, x, y, k, 1e-13);
      const double slack = rd.truncated - L * dist;
      if (slack > w.slack) {
        w = {slack, dist > 0 ? rd.truncated / dist : 0.0, rd.tail, x, y, k};
      }
    }
    return w;
  });
  Worst worst;
  double max_ratio = 0.0;
  for (const auto& w : per_pair) {
    max_ratio = std::max(max_ratio, w.ratio);
    if (w.slack > worst.slack) worst = w;
  }
  const bool ok = worst.slack <= tol;
  c.result = {{"max_ratio", num(max_ratio)},
              {"max_slack", num(worst.slack)},
              {"worst", {{"x", vec_json(worst.x)}, {"y", vec_json(worst.y)}, {"k", worst.k}, {"tail", num(worst.tail)}}},
              {"holds", ok}};
  c.out.passed = ok;
  c.out.summary = "lipschitz: max sum|q(x)-q(y)|/|x-y| = " + fmt(max_ratio) + " over " + std::to_string(n) +
                  " pairs, constant " + fmt(L) + (ok ? " holds" : " violated");
}

void cmd_coupling_marginals(Context& c) {
  const HybridState a = c.p.state("start");
  const HybridState b = c.p.state("start2");
  const CouplingKind kind = parse_coupling_kind(c.p.text("coupling", std::string("basic")));
  const IntegratorConfig ic = read_integrator(c, 1.0, 1e-3);
  const CouplingConfig cfg = read_coupling(c, ic, kind);
  const RunOptions run = read_run(c, 20000);
  const double level = c.p.positive("level", 0.01);
  if (level >= 1.0) bad("level must lie in (0, 1)");
  require_state(a, c.spec.dim);
  require_state(b, c.spec.dim);
  c.p.finish("coupling-marginals");

  CouplingConfig quiet = cfg;
  quiet.integrator.record_stride = 0;
  quiet.integrator.record_events = false;
  const CoupledScheme cs(c.spec, quiet);
  const EulerScheme& single = cs.marginal();
  const std::size_t n = run.n_paths;
  struct Terminal {
    HybridState s;
    bool exited = false;
  };
  const auto coupled = parallel_map<std::pair<Terminal, Terminal>>(n, [&](std::size_t i) {
    const CoupledPathRecord r = couple(cs, a, b, derive_seed(run.seed, i, 0));
    return std::pair{Terminal{r.terminal_first, r.exited()}, Terminal{r.terminal_second, r.exited()}};
  });
  const auto indep_a = parallel_map<Terminal>(n, [&](std::size_t i) {
    const PathRecord r = simulate_path(single, a, derive_seed(run.seed, i, 1));
    return Terminal{r.terminal, r.exited()};
  });
  const auto indep_b = parallel_map<Terminal>(n, [&](std::size_t i) {
    const PathRecord r = simulate_path(single, b, derive_seed(run.seed, i, 2));
    return Terminal{r.terminal, r.exited()};
  });

  auto split = [](const std::vector<Terminal>& ts, std::vector<double>& xs, std::vector<double>& ks) {
    for (const auto& t : ts) {
      if (t.exited) continue;
      xs.push_back(t.s.x(0));
      const auto k = static_cast<std::size_t>(t.s.k);
      if (ks.size() < k) ks.resize(k, 0.0);
      ks[k - 1] += 1.0;
    }
  };
  std::vector<Terminal> first, second;
  for (const auto& [p, q] : coupled) {
    first.push_back(p);
    second.push_back(q);
  }
  std::vector<double> x1, k1, x2, k2, y1, l1, y2, l2;
  split(first, x1, k1);
  split(second, x2, k2);
  split(indep_a, y1, l1);
  split(indep_b, y2, l2);
  auto pad = [](std::vector<double>& u, std::vector<double>& v) {
    const std::size_t m = std::max(u.size(), v.size());
    u.resize(m, 0.0);
    v.resize(m, 0.0);
  };
  pad(k1, l1);
  pad(k2, l2);
  const double threshold = level / 4.0;
  const TestResult tests[4] = {ks_two_sample(x1, y1), ks_two_sample(x2, y2), chi_square_homogeneity(k1, l1),
                               chi_square_homogeneity(k2, l2)};
  const char* names[4] = {"ks_first", "ks_second", "chi2_first", "chi2_second"};
  json arr = json::object();
  bool all = true;
  double min_p = 1.0;
  for (int i = 0; i < 4; ++i) {
    const bool ok = tests[i].p_value >= threshold;
    all = all && ok;
    min_p = std::min(min_p, tests[i].p_value);
    arr[names[i]] = {{"statistic", num(tests[i].statistic)},
                     {"p_value", num(tests[i].p_value)},
                     {"dof", tests[i].dof},
                     {"passed", ok}};
  }
  c.result = {{"tests", arr},
              {"per_test_level", threshold},
              {"n_exited", n - x1.size() + n - y1.size() + n - y2.size()}};
  c.out.passed = all;
  c.out.summary = "coupling-marginals: smallest p-value " + fmt(min_p) + (all ? " >= " : " < ") + fmt(threshold) +
                  " (4 tests)";
}

void cmd_cross_covariance(Context& c) {
  const int d = c.spec.dim;
  const json& probes_in = c.p.raw("probes");
  if (!probes_in.is_array() || probes_in.empty()) bad("probes: expected a nonempty list");
  std::vector<std::pair<HybridState, HybridState>> probes;
  json norm = json::array();
  for (const auto& e : probes_in) {
    if (!e.is_object() || !e.contains("first") || !e.contains("second"))
      bad("probes: each entry needs 'first' and 'second' states");
    probes.emplace_back(parse_state(e.at("first"), d, "probes.first"), parse_state(e.at("second"), d, "probes.second"));
    norm.push_back({{"first", state_json(probes.back().first)}, {"second", state_json(probes.back().second)}});
  }
  c.p.resolved["probes"] = norm;
  const IntegratorConfig ic = read_integrator(c, 0.0, 1e-3, "drop", nullptr);
  const CouplingConfig cfg = read_coupling(c, ic, CouplingKind::reflection);
  const auto n = static_cast<std::size_t>(c.p.integer("n", 100000, 2, 100000000));
  const std::uint64_t seed = c.p.seed();
  const double z_max = c.p.positive("z_max", 4.0);
  c.p.finish("cross-covariance");

  const CoupledScheme cs(c.spec, cfg);
  const double h = ic.step;
  json arr = json::array();
  double worst = 0.0;
  for (std::size_t pi = 0; pi < probes.size(); ++pi) {
    const auto& [s1, s2] = probes[pi];
    const Matrix expected = cs.reflection_cross_covariance(s1.x, s1.k, s2.x, s2.k) * h;
    const auto prods = parallel_map<Matrix>(n, [&](std::size_t i) {
      Rng rng(derive_seed(seed, i, pi));
      const auto [dx, dz] = reflection_noise_increment(cs, s1.x, s1.k, s2.x, s2.k, h, rng);
      return Matrix(dx * dz.transpose());
    });
    Matrix mean(d, d), se(d, d), z(d, d);
    std::vector<double> col(n);
    double pz = 0.0;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        for (std::size_t i = 0; i < n; ++i) col[i] = prods[i](a, b);
        const EstimatorResult er = mean_estimate(col);
        mean(a, b) = er.estimate;
        se(a, b) = er.std_error;
        const double diff = std::abs(er.estimate - expected(a, b));
        z(a, b) = diff == 0.0 ? 0.0 : (er.std_error > 0 ? diff / er.std_error : std::numeric_limits<double>::infinity());
        pz = std::max(pz, z(a, b));
      }
    worst = std::max(worst, pz);
    arr.push_back({{"first", state_json(s1)},
                   {"second", state_json(s2)},
                   {"expected", mat_json(expected)},
                   {"empirical", mat_json(mean)},
                   {"std_error", mat_json(se)},
                   {"max_z", num(pz)}});
  }
  c.result = {{"probes", arr}, {"max_z", num(worst)}, {"lambda_R", cs.lambda_R()}};
  c.out.passed = worst <= z_max;
  c.out.summary = "cross-covariance: " + std::to_string(probes.size()) + " probes, max z " + fmt(worst, 3) +
                  (c.out.passed ? " <= " : " > ") + fmt(z_max);
}

void cmd_coupling_drift(Context& c) {
  const int d = c.spec.dim;
  const double kappa = c.p.positive("kappa_R");
  const double lambda = c.p.positive("lambda_R");
  const std::string gtext = c.p.text("g", std::string("0"));
  const int grid_log2 = static_cast<int>(c.p.integer("grid_log2", 12, 4, 18));
  const json& pin = c.p.raw("pairs");
  if (!pin.is_array() || pin.empty()) bad("pairs: expected a nonempty list");
  std::vector<CouplingDriftPair> pairs;
  json norm = json::array();
  for (const auto& e : pin) {
    if (!e.is_object() || !e.contains("x") || !e.contains("x_tilde"))
      bad("pairs: each entry needs 'x' and 'x_tilde' (and optionally 'k')");
    CouplingDriftPair pr;
    pr.x = parse_point(e.at("x"), d, "pairs.x");
    pr.x_tilde = parse_point(e.at("x_tilde"), d, "pairs.x_tilde");
    pr.k = 1;
    if (e.contains("k")) {
      if (!e.at("k").is_number_integer() || e.at("k").get<long>() < 1) bad("pairs.k must be a positive integer");
      pr.k = e.at("k").get<int>();
    }
    pairs.push_back(pr);
    norm.push_back({{"x", vec_json(pr.x)}, {"x_tilde", vec_json(pr.x_tilde)}, {"k", pr.k}});
  }
  c.p.resolved["pairs"] = norm;
  const IntegratorConfig ic = read_integrator(c, 0.0, 1e-3, "drop", nullptr);
  const CouplingConfig cfg = read_coupling(c, ic, CouplingKind::reflection);
  const RunOptions run = read_run(c, 100000);
  const auto g = expression_of_r(gtext);
  c.p.finish("coupling-drift");

  const GFunction G = build_G(kappa, lambda, g, grid_log2);
  const auto res = verify_coupling_drift(c.spec, G, pairs, ic.step, cfg, run);
  json arr = json::array();
  bool all = true;
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& r : res) {
    all = all && r.holds;
    const double slack = r.drift.estimate + r.beta - 4.0 * (r.drift.std_error + r.bias_allowance);
    worst = std::max(worst, slack);
    arr.push_back({{"x", vec_json(r.pair.x)},
                   {"x_tilde", vec_json(r.pair.x_tilde)},
                   {"k", r.pair.k},
                   {"drift", est_json(r.drift)},
                   {"drift_half", est_json(r.drift_half)},
                   {"bias_allowance", num(r.bias_allowance)},
                   {"beta", num(r.beta)},
                   {"slack", num(slack)},
                   {"holds", r.holds}});
  }
  c.result = {{"pairs", arr}, {"alpha", num(G.alpha)}, {"alpha_degenerate", G.alpha_degenerate}, {"all_hold", all}};
  c.out.passed = all;
  c.out.summary = "coupling-drift: " + std::to_string(res.size()) + " pairs, worst slack " + fmt(worst) +
                  (all ? " <= 0" : " > 0");
}

using Command = void (*)(Context&);

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> m = {
      {"simulate", cmd_simulate},
      {"couple", cmd_couple},
      {"feller", [](Context& c) { cmd_modulus(c, CouplingKind::basic); }},
      {"strong-feller", [](Context& c) { cmd_modulus(c, CouplingKind::reflection); }},
      {"irreducible", cmd_irreducible},
      {"killed", cmd_killed},
      {"invariant", cmd_invariant},
      {"lyapunov", cmd_lyapunov},
      {"g-function", cmd_g_function},
      {"f-function", cmd_f_function},
      {"validate", cmd_validate},
      {"dynkin", cmd_dynkin},
      {"lipschitz", cmd_lipschitz},
      {"coupling-marginals", cmd_coupling_marginals},
      {"cross-covariance", cmd_cross_covariance},
      {"coupling-drift", cmd_coupling_drift},
  };
  return m;
}

}  // namespace

std::vector<std::string> command_names() {
  return {"simulate", "couple",     "feller",     "strong-feller", "irreducible", "killed",
          "invariant", "lyapunov",  "g-function", "f-function",    "validate",    "dynkin",
          "lipschitz", "coupling-marginals", "cross-covariance", "coupling-drift"};
}

bool is_command(const std::string& name) { return commands().count(name) > 0; }

CommandOutput run_command(const LoadedModel& model, const std::string& command, const std::string& params_json) {
  const auto it = commands().find(command);
  if (it == commands().end()) {
    std::string msg = "unknown command '" + command + "'; commands:";
    for (const auto& n : command_names()) msg += " " + n;
    bad(msg);
  }
  json in = json::object();
  if (!params_json.empty()) {
    try {
      in = json::parse(params_json);
    } catch (const json::parse_error& e) {
      bad(std::string("parameters are not valid JSON: ") + e.what());
    }
  }
  Params p(in, model.spec.dim);
  Context c{model, model.spec, p, {}, json::object()};
  it->second(c);

  json doc = {{"command", command},
              {"model", {{"source", model.source}, {"config", json::parse(model.resolved_json)}}},
              {"params", p.resolved},
              {"result", c.result},
              {"passed", c.out.passed},
              {"summary", c.out.summary}};
  c.out.json = doc.dump(2) + "\n";
  return c.out;
}

}  // namespace swjd
