#include "swjd/config.hpp"

#include "swjd/examples.hpp"
#include "swjd/expression.hpp"

#include <json.hpp>

#include <array>
#include <fstream>
#include <set>
#include <sstream>

namespace swjd {

using nlohmann::json;

namespace {

/// Variable slots: x1..xd, then the named extras, then the "x" alias when d = 1.
class Scope {
 public:
  Scope(int dim, std::vector<std::string> extras, int marks = 0) : dim_(dim), marks_(marks) {
    for (int i = 1; i <= dim; ++i) names_.push_back("x" + std::to_string(i));
    for (int i = 1; i <= marks; ++i) names_.push_back("u" + std::to_string(i));
    if (marks > 0) names_.push_back("r");
    for (auto& e : extras) names_.push_back(std::move(e));
    if (dim == 1) names_.push_back("x");
    if (marks == 1) names_.push_back("u");
  }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  /// Fills x, marks and extras into `out`, which must hold size() values.
  void fill(double* out, const Vector& x, const Vector* u, std::initializer_list<double> extras) const {
    int j = 0;
    for (int i = 0; i < dim_; ++i) out[j++] = x(i);
    for (int i = 0; i < marks_; ++i) out[j++] = (*u)(i);
    if (marks_ > 0) out[j++] = u->norm();
    for (double e : extras) out[j++] = e;
    if (dim_ == 1) out[j++] = x(0);
    if (marks_ == 1) out[j++] = (*u)(0);
  }

 private:
  int dim_;
  int marks_;
  std::vector<std::string> names_;
};

constexpr std::size_t kMaxSlots = 2 * kMaxDim + 8;

[[noreturn]] void bad(const std::string& origin, const std::string& what) {
  throw InvalidInput(origin + ": " + what);
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& origin,
                const std::string& where) {
  if (!obj.is_object()) bad(origin, where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      std::string list;
      for (const auto& a : allowed) list += " " + a;
      bad(origin, "unknown key '" + key + "' in " + where + " (allowed:" + list + ")");
    }
  }
}

double get_number(const json& obj, const std::string& key, const std::string& origin) {
  const json& v = obj.at(key);
  if (!v.is_number()) bad(origin, "'" + key + "' must be a number");
  return v.get<double>();
}

std::string get_string(const json& v, const std::string& what, const std::string& origin) {
  if (!v.is_string()) bad(origin, what + " must be an expression string");
  return v.get<std::string>();
}

Expression compile(const json& v, const Scope& scope, const std::string& what, const std::string& origin) {
  const std::string text = get_string(v, what, origin);
  try {
    return Expression::parse(text, scope.names());
  } catch (const InvalidInput& e) {
    bad(origin, what + ": " + e.what());
  }
}

std::vector<Expression> compile_vector(const json& v, int dim, const Scope& scope, const std::string& what,
                                       const std::string& origin) {
  std::vector<Expression> out;
  if (v.is_string() && dim == 1) {
    out.push_back(compile(v, scope, what, origin));
    return out;
  }
  if (!v.is_array() || static_cast<int>(v.size()) != dim)
    bad(origin, what + " must be an array of " + std::to_string(dim) + " expressions");
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(compile(v[i], scope, what + "[" + std::to_string(i) + "]", origin));
  return out;
}

ModelSpec build_user_model(const json& cfg, const std::string& origin, json& resolved) {
  check_keys(cfg, {"name", "dimension", "drift", "diffusion", "jumps", "switching", "ellipticity", "growth",
                   "lyapunov", "tolerances"},
             origin, "model config");
  if (!cfg.contains("dimension")) bad(origin, "'dimension' is required");
  const json& dv = cfg.at("dimension");
  if (!dv.is_number_integer() || dv.get<int>() < 1 || dv.get<int>() > kMaxDim)
    bad(origin, "'dimension' must be an integer in [1, " + std::to_string(kMaxDim) + "]");
  const int d = dv.get<int>();

  ModelSpec m;
  m.dim = d;
  m.name = cfg.value("name", std::string("user"));
  resolved["name"] = m.name;
  resolved["dimension"] = d;
  const Scope xk(d, {"k"});

  if (cfg.contains("drift")) {
    auto b = compile_vector(cfg.at("drift"), d, xk, "drift", origin);
    m.drift = [b, xk, d](const Vector& x, int k) {
      std::array<double, kMaxSlots> v;
      xk.fill(v.data(), x, nullptr, {static_cast<double>(k)});
      Vector out(d);
      for (int i = 0; i < d; ++i) out(i) = b[i].eval(v.data());
      return out;
    };
    resolved["drift"] = cfg.at("drift");
  } else {
    m.drift = [d](const Vector&, int) -> Vector { return Vector::Zero(d); };
    resolved["drift"] = json::array();
  }

  if (cfg.contains("diffusion")) {
    const json& s = cfg.at("diffusion");
    if (s.is_string()) {
      const Expression e = compile(s, xk, "diffusion", origin);
      m.diffusion = [e, xk, d](const Vector& x, int k) {
        std::array<double, kMaxSlots> v;
        xk.fill(v.data(), x, nullptr, {static_cast<double>(k)});
        return Matrix(e.eval(v.data()) * Matrix::Identity(d, d));
      };
    } else {
      if (!s.is_array() || static_cast<int>(s.size()) != d)
        bad(origin, "diffusion must be a scalar expression or a " + std::to_string(d) + "x" + std::to_string(d) +
                        " array of expressions");
      std::vector<std::vector<Expression>> rows;
      for (int i = 0; i < d; ++i) rows.push_back(compile_vector(s[i], d, xk, "diffusion[" + std::to_string(i) + "]", origin));
      m.diffusion = [rows, xk, d](const Vector& x, int k) {
        std::array<double, kMaxSlots> v;
        xk.fill(v.data(), x, nullptr, {static_cast<double>(k)});
        Matrix out(d, d);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) out(i, j) = rows[i][j].eval(v.data());
        return out;
      };
    }
    resolved["diffusion"] = s;
  } else {
    m.diffusion = [d](const Vector&, int) -> Matrix { return Matrix::Zero(d, d); };
    resolved["diffusion"] = "0";
  }

  if (cfg.contains("jumps")) {
    const json& j = cfg.at("jumps");
    check_keys(j, {"mark_dim", "exponent", "coefficient", "cutoff", "second_moment"}, origin, "jumps");
    for (const char* key : {"mark_dim", "exponent", "coefficient"})
      if (!j.contains(key)) bad(origin, std::string("jumps.") + key + " is required");
    if (!j.at("mark_dim").is_number_integer()) bad(origin, "jumps.mark_dim must be an integer");
    const int mdim = j.at("mark_dim").get<int>();
    if (mdim != 1 && mdim != 2) bad(origin, "jumps.mark_dim must be 1 or 2");
    const double p = get_number(j, "exponent", origin);
    const Scope xku(d, {"k"}, mdim);
    auto c = compile_vector(j.at("coefficient"), d, xku, "jumps.coefficient", origin);
    m.jump = [c, xku, d](const Vector& x, int k, const Vector& u) {
      std::array<double, kMaxSlots> v;
      xku.fill(v.data(), x, &u, {static_cast<double>(k)});
      Vector out(d);
      for (int i = 0; i < d; ++i) out(i) = c[i].eval(v.data());
      return out;
    };
    m.jumps.measure = std::make_shared<RadialPowerMeasure>(mdim, p);
    m.jumps.cutoff = j.contains("cutoff") ? get_number(j, "cutoff", origin) : 0.05;
    if (!(m.jumps.cutoff > 0.0 && m.jumps.cutoff < 1.0)) bad(origin, "jumps.cutoff must lie in (0, 1)");
    if (j.contains("second_moment")) {
      const Expression e = compile(j.at("second_moment"), xk, "jumps.second_moment", origin);
      m.jumps.second_moment = [e, xk](const Vector& x, int k) {
        std::array<double, kMaxSlots> v;
        xk.fill(v.data(), x, nullptr, {static_cast<double>(k)});
        return e.eval(v.data());
      };
    }
    json rj = j;
    rj["cutoff"] = m.jumps.cutoff;
    resolved["jumps"] = rj;
  }

  if (cfg.contains("switching")) {
    const json& s = cfg.at("switching");
    check_keys(s, {"rate", "row_sum", "tail_bound", "uniform_bound", "max_regime", "state_independent"}, origin,
               "switching");
    if (!s.contains("rate")) bad(origin, "switching.rate is required");
    const Scope xkl(d, {"k", "l"});
    const Expression q = compile(s.at("rate"), xkl, "switching.rate", origin);
    m.rates.rate = [q, xkl](const Vector& x, int k, int l) {
      if (l == k) return 0.0;
      std::array<double, kMaxSlots> v;
      xkl.fill(v.data(), x, nullptr, {static_cast<double>(k), static_cast<double>(l)});
      return q.eval(v.data());
    };
    json rs = s;
    if (s.contains("row_sum")) {
      const Expression e = compile(s.at("row_sum"), xk, "switching.row_sum", origin);
      m.rates.row_sum = [e, xk](const Vector& x, int k) {
        std::array<double, kMaxSlots> v;
        xk.fill(v.data(), x, nullptr, {static_cast<double>(k)});
        return e.eval(v.data());
      };
    }
    if (s.contains("tail_bound")) {
      const Expression e = compile(s.at("tail_bound"), Scope(0, {"k", "L"}), "switching.tail_bound", origin);
      m.rates.tail_bound = [e](int k, int L) {
        const double v[2] = {static_cast<double>(k), static_cast<double>(L)};
        return e.eval(v);
      };
    }
    if (s.contains("uniform_bound")) m.rates.uniform_bound = get_number(s, "uniform_bound", origin);
    if (s.contains("max_regime")) {
      if (!s.at("max_regime").is_number_integer() || s.at("max_regime").get<int>() < 1)
        bad(origin, "switching.max_regime must be a positive integer");
      m.rates.max_regime = s.at("max_regime").get<int>();
    }
    bool uses_x = false;
    for (int i = 1; i <= d; ++i) uses_x = uses_x || q.uses("x" + std::to_string(i));
    uses_x = uses_x || q.uses("x");
    m.rates.state_independent = s.value("state_independent", !uses_x);
    if (m.rates.state_independent && uses_x) bad(origin, "switching.state_independent is true but rate depends on x");
    rs["state_independent"] = m.rates.state_independent;
    resolved["switching"] = rs;
  }

  if (cfg.contains("ellipticity")) {
    m.ellipticity = get_number(cfg, "ellipticity", origin);
    resolved["ellipticity"] = *m.ellipticity;
  }
  if (cfg.contains("growth")) {
    m.growth = get_number(cfg, "growth", origin);
    resolved["growth"] = *m.growth;
  }

  if (cfg.contains("lyapunov")) {
    const json& l = cfg.at("lyapunov");
    check_keys(l, {"value", "regime_tail"}, origin, "lyapunov");
    if (!l.contains("value")) bad(origin, "lyapunov.value is required");
    TestFunction V = expression_function(get_string(l.at("value"), "lyapunov.value", origin), d);
    if (l.contains("regime_tail")) {
      const Expression e = compile(l.at("regime_tail"), Scope(d, {"k", "L"}), "lyapunov.regime_tail", origin);
      const Scope xkL(d, {"k", "L"});
      V.regime_tail = [e, xkL](const Vector& x, int k, int L) {
        std::array<double, kMaxSlots> v;
        xkL.fill(v.data(), x, nullptr, {static_cast<double>(k), static_cast<double>(L)});
        return e.eval(v.data());
      };
    }
    m.lyapunov = std::make_shared<TestFunction>(std::move(V));
    resolved["lyapunov"] = l;
  }
  return m;
}

}  // namespace

LoadedModel parse_model_config(const std::string& json_text, const std::string& origin) {
  json cfg;
  try {
    cfg = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad(origin, std::string("malformed JSON: ") + e.what());
  }
  LoadedModel lm;
  lm.source = origin;
  json resolved = json::object();
  lm.spec = build_user_model(cfg, origin, resolved);
  if (cfg.contains("tolerances")) {
    const json& t = cfg.at("tolerances");
    check_keys(t, {"regime_rel_tol", "max_terms"}, origin, "tolerances");
    if (t.contains("regime_rel_tol")) {
      lm.regime_rel_tol = get_number(t, "regime_rel_tol", origin);
      if (!(*lm.regime_rel_tol > 0.0 && *lm.regime_rel_tol < 1.0))
        bad(origin, "tolerances.regime_rel_tol must lie in (0, 1)");
    }
    if (t.contains("max_terms")) {
      if (!t.at("max_terms").is_number_integer() || t.at("max_terms").get<int>() < 1)
        bad(origin, "tolerances.max_terms must be a positive integer");
      lm.spec.rates.max_terms = t.at("max_terms").get<int>();
    }
  }
  json tol = json::object();
  tol["max_terms"] = lm.spec.rates.max_terms;
  if (lm.regime_rel_tol) tol["regime_rel_tol"] = *lm.regime_rel_tol;
  resolved["tolerances"] = tol;
  check_model(lm.spec);
  lm.resolved_json = resolved.dump();
  return lm;
}

LoadedModel load_model(const std::string& name_or_path) {
  if (is_builtin_name(name_or_path)) {
    LoadedModel lm;
    lm.spec = builtin_model(name_or_path);
    lm.source = name_or_path;
    json r;
    r["builtin"] = lm.spec.name;
    lm.resolved_json = r.dump();
    return lm;
  }
  std::ifstream in(name_or_path, std::ios::binary);
  if (!in) {
    std::string msg = "unknown model '" + name_or_path + "' (not a built-in and no such config file); built-ins:";
    for (const auto& n : builtin_names()) msg += " " + n;
    throw InvalidInput(msg);
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_model_config(text.str(), name_or_path);
}

TestFunction expression_function(const std::string& text, int dim, std::optional<double> sup_norm) {
  require(dim >= 1 && dim <= kMaxDim, "test function dimension out of range");
  const Scope xk(dim, {"k"});
  const Expression e = Expression::parse(text, xk.names());
  TestFunction f;
  f.name = text;
  f.value = [e, xk](const Vector& x, int k) {
    std::array<double, kMaxSlots> v;
    xk.fill(v.data(), x, nullptr, {static_cast<double>(k)});
    return e.eval(v.data());
  };
  f.sup_norm = sup_norm;
  f.regime_independent = !e.uses("k");
  return f;
}

std::function<double(double)> expression_of_r(const std::string& text) {
  const Expression e = Expression::parse(text, {"r"});
  return [e](double r) { return e.eval(&r); };
}

}  // namespace swjd
