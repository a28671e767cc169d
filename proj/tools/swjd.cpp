#include "swjd/swjd.h"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace {

using json = nlohmann::json;

enum class Kind {
  scalar,  // one value, passed through as a string
  multi,   // repeatable, collected into a list
  joined,  // repeatable, joined with commas
  raw,     // parsed as JSON
};

struct Flag {
  const char* name;
  const char* key;
  Kind kind;
  const char* help;
  const char* commands;  // space-separated subcommands that accept the flag
};

constexpr const char* kSim =
    "simulate couple feller strong-feller irreducible killed invariant dynkin coupling-marginals";
constexpr const char* kCoupled = "couple feller strong-feller coupling-marginals cross-covariance coupling-drift";
constexpr const char* kStart = "simulate couple feller strong-feller irreducible killed dynkin coupling-marginals";
constexpr const char* kPaths = "feller strong-feller irreducible killed dynkin coupling-marginals coupling-drift";

const std::vector<Flag>& flags() {
  static const std::vector<Flag> f = {
      {"--start", "start", Kind::scalar, "start state x1,...,xd,k", kStart},
      {"--start2", "start2", Kind::scalar, "second start state x1,...,xd,k", "couple coupling-marginals"},
      {"--t", "t", Kind::scalar, "time horizon", "simulate couple feller strong-feller irreducible killed dynkin coupling-marginals"},
      {"--h", "h", Kind::scalar, "Euler step", "simulate couple feller strong-feller irreducible killed invariant dynkin "
                                              "coupling-marginals cross-covariance coupling-drift"},
      {"--seed", "seed", Kind::scalar, "master seed",
       "simulate couple feller strong-feller irreducible killed invariant dynkin coupling-marginals "
       "cross-covariance coupling-drift validate lipschitz"},
      {"--n-paths", "n_paths", Kind::scalar, "Monte Carlo paths (pairs for couplings)", kPaths},
      {"--n-max", "n_max", Kind::scalar, "path budget for adaptive doubling", "irreducible"},
      {"--n", "n", Kind::scalar, "increments per probe", "cross-covariance"},
      {"--small-jumps", "small_jumps", Kind::scalar, "small-jump policy: drop | gaussian", kSim},
      {"--cutoff", "cutoff", Kind::scalar, "small-jump cutoff eps", kSim},
      {"--exit-radius", "exit_radius", Kind::scalar, "paths stop when |X| exceeds this", kSim},
      {"--regime-rel-tol", "regime_rel_tol", Kind::scalar, "regime truncation tolerance",
       "simulate couple feller strong-feller irreducible killed invariant dynkin coupling-marginals validate"},
      {"--record-stride", "record_stride", Kind::scalar, "keep every n-th grid point (0: ends only)", "simulate couple"},
      {"--censoring", "censoring", Kind::scalar, "exited paths: condition | sup-bound", kPaths},
      {"--coupling", "coupling", Kind::scalar, "basic | reflection", "couple coupling-marginals"},
      {"--lambda-R", "lambda_R", Kind::scalar, "reflection strength lambda_R",
       "couple feller strong-feller coupling-marginals cross-covariance coupling-drift g-function"},
      {"--ball-radius", "ball_radius", Kind::scalar, "radius R of the localizing ball", kCoupled},
      {"--delta0", "delta0", Kind::scalar, "separation threshold delta0", kCoupled},
      {"--eta", "eta", Kind::scalar, "coalescence threshold", kCoupled},
      {"--bridge-test", "bridge_test", Kind::scalar, "Brownian-bridge meeting test: true | false", kCoupled},
      {"--f", "f", Kind::scalar, "test function expression in x1..xd, k", "feller strong-feller dynkin"},
      {"--f-sup", "f_sup", Kind::scalar, "sup |f|", "feller strong-feller dynkin"},
      {"--threshold", "threshold", Kind::scalar, "pass threshold", "feller strong-feller invariant"},
      {"--trend-tol", "trend_tol", Kind::scalar, "trend slack in standard errors", "feller strong-feller"},
      {"--x-tilde", "x_tilde", Kind::multi, "comparison point (repeatable)", "feller strong-feller"},
      {"--offsets", "offsets", Kind::joined, "offsets along the first axis", "feller strong-feller"},
      {"--target", "target", Kind::multi, "target ball a1,...,ad,r (repeatable)", "irreducible killed"},
      {"--regime", "regime", Kind::joined, "target regime (repeatable, one per target)", "irreducible"},
      {"--sup-rate", "sup_rate", Kind::scalar, "M >= sup_x q_k(x)", "killed"},
      {"--starts", "starts", Kind::multi, "start state (repeatable)", "invariant"},
      {"--box-lo", "box_lo", Kind::scalar, "lower box corner", "invariant lyapunov"},
      {"--box-hi", "box_hi", Kind::scalar, "upper box corner", "invariant lyapunov"},
      {"--cells", "cells", Kind::scalar, "cells per axis", "invariant"},
      {"--k-max", "k_max", Kind::scalar, "regimes resolved by the partition", "invariant"},
      {"--t-burn", "t_burn", Kind::scalar, "start of the averaging window", "invariant"},
      {"--t-end", "t_end", Kind::scalar, "end of the averaging window", "invariant"},
      {"--paths-per-start", "paths_per_start", Kind::scalar, "paths per start", "invariant"},
      {"--grid", "grid", Kind::scalar, "axis grid lo:hi:n", "lyapunov validate"},
      {"--kmax", "kmax", Kind::scalar, "largest probed regime", "lyapunov validate lipschitz"},
      {"--V", "V", Kind::scalar, "Lyapunov function expression", "lyapunov"},
      {"--rate", "rate", Kind::scalar, "rate function f in AV <= -alpha f + beta 1_C", "lyapunov"},
      {"--alpha", "alpha", Kind::scalar, "drift rate alpha", "lyapunov"},
      {"--beta", "beta", Kind::scalar, "drift constant beta", "lyapunov"},
      {"--nmin", "n_lo", Kind::scalar, "smallest regime of N", "lyapunov"},
      {"--nmax", "n_hi", Kind::scalar, "largest regime of N", "lyapunov"},
      {"--regime-level", "regime_level", Kind::scalar, "fixed regime truncation level", "lyapunov"},
      {"--quad-tol", "quad_tol", Kind::scalar, "generator quadrature tolerance", "lyapunov dynkin"},
      {"--tol", "tol", Kind::scalar, "pass tolerance", "lyapunov g-function f-function lipschitz"},
      {"--kappa-R", "kappa_R", Kind::scalar, "kappa_R of G", "g-function coupling-drift"},
      {"--g", "g", Kind::scalar, "g(r) expression", "g-function f-function coupling-drift"},
      {"--grid-log2", "grid_log2", Kind::scalar, "table resolution 2^-n", "g-function f-function coupling-drift"},
      {"--check-points", "check_points", Kind::scalar, "points of the invariant checks", "g-function f-function"},
      {"--r-max", "r_max", Kind::scalar, "right end of the F check grid", "f-function"},
      {"--random", "random", Kind::scalar, "extra random probes", "validate"},
      {"--mark-samples", "mark_samples", Kind::scalar, "mark samples per probe", "validate"},
      {"--z-max", "z_max", Kind::scalar, "largest accepted z-score", "dynkin cross-covariance"},
      {"--constant", "constant", Kind::scalar, "Lipschitz constant", "lipschitz"},
      {"--n-pairs", "n_pairs", Kind::scalar, "random pairs", "lipschitz"},
      {"--lo", "lo", Kind::scalar, "lower end of the sampling box", "lipschitz"},
      {"--hi", "hi", Kind::scalar, "upper end of the sampling box", "lipschitz"},
      {"--level", "level", Kind::scalar, "family-wise test level", "coupling-marginals"},
      {"--probes", "probes", Kind::raw, "JSON list of {first, second} states", "cross-covariance"},
      {"--pairs", "pairs", Kind::raw, "JSON list of {x, x_tilde, k}", "coupling-drift"},
  };
  return f;
}

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> d = {
      {"simulate", "simulate one path; writes path CSV and binary event log"},
      {"couple", "simulate one coupled pair; writes coupled CSV"},
      {"feller", "basic-coupling modulus |P_t f(x~) - P_t f(x)| along x~ -> x"},
      {"strong-feller", "reflection-coupling modulus and its proof bound"},
      {"irreducible", "Clopper-Pearson lower bounds on P(t,(x,k),B x {l})"},
      {"killed", "killed sub-transition inequalities"},
      {"invariant", "occupation histograms from several starts and their TV distance"},
      {"lyapunov", "drift inequality AV + alpha f - beta 1_C <= 0 on a grid"},
      {"g-function", "tabulate G and check its invariants"},
      {"f-function", "tabulate F and check its invariants"},
      {"validate", "spot-check the model assumptions on probes"},
      {"dynkin", "compare (E f(X_t) - f)/t with the generator Af"},
      {"lipschitz", "check sum_l |q_kl(x) - q_kl(y)| <= L |x - y| on random pairs"},
      {"coupling-marginals", "KS and chi-square tests of coupled marginals against independent paths"},
      {"cross-covariance", "one-step cross-covariance of the reflection noise against g^ h"},
      {"coupling-drift", "short-time drift of G(|X~ - X|) under reflection coupling"},
  };
  return d;
}

bool applies(const Flag& f, const std::string& command) {
  std::istringstream s(f.commands);
  std::string c;
  while (s >> c)
    if (c == command) return true;
  return false;
}

std::vector<std::string> split_words(const char* s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

bool write_file(const std::filesystem::path& p, const void* data, std::size_t n) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  return static_cast<bool>(out);
}

int exit_code(swjd_status s) {
  switch (s) {
    case SWJD_OK: return 0;
    case SWJD_INVALID_ARGUMENT:
    case SWJD_UNKNOWN_MODEL:
    case SWJD_IO: return 2;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regime-switching jump diffusion experiments"};
  app.set_help_flag("--help", "print help and exit");
  app.require_subcommand(0, 1);
  app.set_version_flag("--version", std::string(swjd_version()));
  bool list = false;
  app.add_flag("--list", list, "list subcommands and built-in models");

  struct Sub {
    CLI::App* app = nullptr;
    std::string model = "example51";
    std::string out;
    int threads = 0;
    std::vector<std::string> sets;
    std::string params_file;
    bool quiet = false;
    std::map<std::string, std::vector<std::string>> values;
  };
  const auto commands = split_words(swjd_command_names());
  std::map<std::string, Sub> subs;
  for (const auto& name : commands) {
    Sub& s = subs[name];
    const auto it = descriptions().find(name);
    s.app = app.add_subcommand(name, it == descriptions().end() ? "" : it->second);
    s.app->add_option("--model", s.model, "built-in name or config path")->capture_default_str();
    s.app->add_option("--out", s.out, "output directory (default $SWJD_OUTPUT_DIR or .)");
    s.app->add_option("--threads", s.threads, "worker threads (0: available parallelism)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    s.app->add_option("--set", s.sets, "extra parameter key=value (value parsed as JSON when possible)");
    s.app->add_option("--params", s.params_file, "JSON file with parameters")->check(CLI::ExistingFile);
    s.app->add_flag("--quiet", s.quiet, "do not print the summary line");
    for (const auto& f : flags()) {
      if (!applies(f, name)) continue;
      auto* opt = s.app->add_option(f.name, s.values[f.key], f.help);
      if (f.kind == Kind::multi || f.kind == Kind::joined) {
        opt->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
      } else {
        opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
      }
      opt->expected(1);
      opt->allow_extra_args(false);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (list || app.get_subcommands().empty()) {
    if (!list) {
      std::cout << app.help();
      return 2;
    }
    std::cout << "commands: " << swjd_command_names() << "\nbuilt-in models: " << swjd_builtin_names() << "\n";
    return 0;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  Sub& s = subs.at(command);

  json params = json::object();
  if (!s.params_file.empty()) {
    std::ifstream in(s.params_file);
    try {
      params = json::parse(in);
    } catch (const json::parse_error& e) {
      std::cerr << "swjd: error: " << s.params_file << ": " << e.what() << "\n";
      return 2;
    }
    if (!params.is_object()) {
      std::cerr << "swjd: error: " << s.params_file << ": expected a JSON object\n";
      return 2;
    }
  }
  for (const auto& f : flags()) {
    const auto it = s.values.find(f.key);
    if (it == s.values.end() || it->second.empty()) continue;
    const auto& v = it->second;
    switch (f.kind) {
      case Kind::scalar: params[f.key] = v.back(); break;
      case Kind::multi: params[f.key] = v; break;
      case Kind::joined: {
        std::string joined;
        for (const auto& e : v) joined += (joined.empty() ? "" : ",") + e;
        params[f.key] = joined;
        break;
      }
      case Kind::raw:
        try {
          params[f.key] = json::parse(v.back());
        } catch (const json::parse_error& e) {
          std::cerr << "swjd: error: " << f.name << ": not valid JSON: " << e.what() << "\n";
          return 2;
        }
        break;
    }
  }
  for (const auto& kv : s.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "swjd: error: --set expects key=value, got '" << kv << "'\n";
      return 2;
    }
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    try {
      params[key] = json::parse(value);
    } catch (const json::parse_error&) {
      params[key] = value;
    }
  }

  std::filesystem::path out_dir = s.out;
  if (s.out.empty()) {
    const char* env = std::getenv("SWJD_OUTPUT_DIR");
    out_dir = env && *env ? env : ".";
  }

  if (swjd_set_threads(s.threads) != SWJD_OK) {
    std::cerr << "swjd: error: " << swjd_last_error() << "\n";
    return 2;
  }
  swjd_model* model = nullptr;
  swjd_status st = swjd_model_load(s.model.c_str(), &model);
  if (st != SWJD_OK) {
    std::cerr << "swjd: error: " << swjd_last_error() << "\n";
    return exit_code(st);
  }
  swjd_result* result = nullptr;
  st = swjd_run(model, command.c_str(), params.dump().c_str(), &result);
  swjd_model_free(model);
  if (st != SWJD_OK) {
    std::cerr << "swjd: error: " << swjd_status_string(st) << ": " << swjd_last_error() << "\n";
    return exit_code(st);
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  bool ok = !ec;
  const std::string text = swjd_result_json(result);
  ok = ok && write_file(out_dir / (command + ".json"), text.data(), text.size());
  for (std::size_t i = 0; ok && i < swjd_result_artifact_count(result); ++i) {
    std::size_t n = 0;
    const void* data = swjd_result_artifact_data(result, i, &n);
    ok = write_file(out_dir / (command + "-" + swjd_result_artifact_name(result, i)), data, n);
  }
  if (!ok) {
    std::cerr << "swjd: error: cannot write results to " << out_dir << "\n";
    swjd_result_free(result);
    return 1;
  }
  if (!s.quiet) std::cout << swjd_result_summary(result) << "\n";
  const int code = swjd_result_passed(result) ? 0 : 1;
  swjd_result_free(result);
  return code;
}
