#include "swjd/analysis.hpp"

#include "swjd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace swjd {

const char* to_string(CensorPolicy p) { return p == CensorPolicy::condition ? "condition" : "sup-bound"; }

CensorPolicy parse_censor_policy(const std::string& s) {
  if (s == "condition") return CensorPolicy::condition;
  if (s == "sup-bound" || s == "sup_bound") return CensorPolicy::sup_bound;
  throw InvalidInput("unknown censoring policy '" + s + "' (expected condition or sup-bound)");
}

namespace {

void check_run(const RunOptions& run) { require(run.n_paths > 0, "n_paths must be positive"); }

/// Mean over the entries with keep[i] set, in index order.
EstimatorResult masked_mean(const std::vector<double>& v, const std::vector<char>& keep) {
  std::vector<double> kept;
  kept.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    if (keep[i]) kept.push_back(v[i]);
  return mean_estimate(kept, v.size() - kept.size());
}

double sup_of(const TestFunction& f) {
  require(f.sup_norm.has_value(), "test function '" + f.name + "' must be bounded (sup_norm unset)");
  return *f.sup_norm;
}

}  // namespace

EstimatorResult estimate_semigroup(const ModelSpec& spec, const TestFunction& f, const HybridState& start,
                                   const IntegratorConfig& cfg, const RunOptions& run) {
  check_run(run);
  const double sup = sup_of(f);
  require_state(start, spec.dim);
  IntegratorConfig c = cfg;
  c.record_stride = 0;
  c.record_events = false;
  const EulerScheme scheme(spec, c);
  struct Sample {
    double value;
    bool exited;
  };
  const auto samples = parallel_map<Sample>(run.n_paths, [&](std::size_t i) {
    const PathRecord p = simulate_path(scheme, start, derive_seed(run.seed, i));
    if (p.exited()) return Sample{sup, true};
    return Sample{f(p.terminal.x, p.terminal.k), false};
  });
  std::vector<double> v(samples.size());
  std::vector<char> keep(samples.size());
  std::size_t censored = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    v[i] = samples[i].value;
    keep[i] = !samples[i].exited || run.censoring == CensorPolicy::sup_bound;
    censored += samples[i].exited;
  }
  if (censored == samples.size() && run.censoring == CensorPolicy::condition)
    throw NumericError("all " + std::to_string(censored) + " paths exited before the horizon");
  EstimatorResult r = masked_mean(v, keep);
  r.n_paths = samples.size();
  r.n_censored = censored;
  return r;
}

// ---------------------------------------------------------------------------

namespace {

struct PairSample {
  double diff = 0.0;
  double zeta = 0.0;
  double gap = 0.0;
  double unmet = 0.0;
  double distance = 0.0;
  bool exited = false;
};

std::vector<ModulusPoint> modulus_run(const ModelSpec& spec, const TestFunction& f, const Vector& x,
                                      const std::vector<Vector>& x_tilde, int k, const CouplingConfig& cfg_in,
                                      const RunOptions& run, CouplingKind kind) {
  check_run(run);
  const double sup = sup_of(f);
  require_state(HybridState(x, k), spec.dim);
  require(!x_tilde.empty(), "x~ sequence is empty");
  CouplingConfig cfg = cfg_in;
  cfg.kind = kind;
  cfg.integrator.record_stride = 0;
  cfg.integrator.record_events = false;
  const CoupledScheme scheme(spec, cfg);
  const double t = cfg.integrator.horizon;

  std::vector<ModulusPoint> out;
  for (const Vector& xt : x_tilde) {
    require_state(HybridState(xt, k), spec.dim);
    const auto samples = parallel_map<PairSample>(run.n_paths, [&](std::size_t i) {
      const CoupledPathRecord r = couple(scheme, HybridState(x, k), HybridState(xt, k), derive_seed(run.seed, i));
      PairSample s;
      if (r.exited()) {
        s.exited = true;
        s.zeta = 1.0;
        s.unmet = 1.0;
        return s;
      }
      const double a = f(r.terminal_first.x, r.terminal_first.k);
      const double b = f(r.terminal_second.x, r.terminal_second.k);
      s.diff = b - a;
      s.zeta = r.marks.zeta && *r.marks.zeta <= t ? 1.0 : 0.0;
      s.gap = s.zeta == 0.0 ? std::abs(b - a) : 0.0;
      s.unmet = r.marks.T && *r.marks.T <= t ? 0.0 : 1.0;
      s.distance = (r.terminal_second.x - r.terminal_first.x).norm();
      return s;
    });
    const std::size_t n = samples.size();
    std::vector<double> diff(n), zeta(n), gap(n), unmet(n), dist(n);
    std::vector<char> kept(n), all(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      diff[i] = samples[i].diff;
      zeta[i] = samples[i].zeta;
      gap[i] = samples[i].gap;
      unmet[i] = samples[i].unmet;
      dist[i] = samples[i].distance;
      kept[i] = !samples[i].exited;
    }
    ModulusPoint p;
    p.x_tilde = xt;
    p.difference = masked_mean(diff, kept);
    p.modulus = p.difference;
    p.modulus.estimate = std::abs(p.difference.estimate);
    p.modulus.ci95 = {std::max(0.0, p.modulus.estimate - 1.96 * p.modulus.std_error),
                      p.modulus.estimate + 1.96 * p.modulus.std_error};
    p.zeta_prob = masked_mean(zeta, all);
    p.unmet_prob = masked_mean(unmet, all);
    p.gap_before_zeta = masked_mean(gap, kept);
    p.distance = masked_mean(dist, kept);
    const std::size_t censored = p.difference.n_censored;
    p.zeta_prob.n_censored = p.unmet_prob.n_censored = censored;
    if (kind == CouplingKind::basic) {
      p.bound = 2 * sup * p.zeta_prob.estimate + p.gap_before_zeta.estimate;
    } else {
      p.bound = 4 * sup * p.unmet_prob.estimate + 2 * sup * p.zeta_prob.estimate;
    }
    p.bound_holds = p.modulus.estimate <= p.bound + 3 * p.modulus.std_error;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

std::vector<ModulusPoint> feller_modulus(const ModelSpec& spec, const TestFunction& f, const Vector& x,
                                         const std::vector<Vector>& x_tilde, int k, const CouplingConfig& cfg,
                                         const RunOptions& run) {
  return modulus_run(spec, f, x, x_tilde, k, cfg, run, CouplingKind::basic);
}

std::vector<ModulusPoint> strong_feller_modulus(const ModelSpec& spec, const TestFunction& f, const Vector& x,
                                                const std::vector<Vector>& x_tilde, int k,
                                                const CouplingConfig& cfg, const RunOptions& run) {
  return modulus_run(spec, f, x, x_tilde, k, cfg, run, CouplingKind::reflection);
}

TrendCheck check_trend(const std::vector<EstimatorResult>& estimates, double threshold, double tol) {
  TrendCheck c;
  if (estimates.empty()) return c;
  for (std::size_t i = 0; i + 1 < estimates.size(); ++i) {
    const double slack = tol * std::hypot(estimates[i].std_error, estimates[i + 1].std_error);
    if (estimates[i + 1].estimate > estimates[i].estimate + slack) c.nonincreasing = false;
  }
  c.final_below = estimates.back().estimate <= threshold;
  return c;
}

// ---------------------------------------------------------------------------

namespace {

void check_target(const TargetSet& target, int dim) {
  require(target.center.size() == dim, "target center dimension does not match the model");
  require(target.center.allFinite(), "target center is not finite");
  require(target.radius > 0.0, "target radius must be positive");
  require(target.regime >= 1, "target regime must be >= 1");
}

bool in_ball(const Vector& x, const TargetSet& target) { return (x - target.center).norm() < target.radius; }

}  // namespace

TransitionEstimate estimate_transition(const ModelSpec& spec, const HybridState& start, const TargetSet& target,
                                       const IntegratorConfig& cfg, const RunOptions& run) {
  return estimate_transition_adaptive(spec, start, target, cfg, run, run.n_paths);
}

TransitionEstimate estimate_transition_adaptive(const ModelSpec& spec, const HybridState& start,
                                                const TargetSet& target, const IntegratorConfig& cfg,
                                                const RunOptions& run, std::size_t n_max) {
  check_run(run);
  require_state(start, spec.dim);
  check_target(target, spec.dim);
  require(n_max >= run.n_paths, "n_max must be at least n_paths");
  IntegratorConfig c = cfg;
  c.record_stride = 0;
  c.record_events = false;
  const EulerScheme scheme(spec, c);

  std::vector<char> hit;
  std::size_t censored = 0;
  TransitionEstimate est;
  std::size_t n = run.n_paths;
  for (int round = 1;; ++round) {
    const std::size_t done = hit.size();
    const auto fresh = parallel_map<char>(n - done, [&](std::size_t j) -> char {
      const PathRecord p = simulate_path(scheme, start, derive_seed(run.seed, done + j));
      if (p.exited()) return 2;
      return p.terminal.k == target.regime && in_ball(p.terminal.x, target) ? 1 : 0;
    });
    hit.insert(hit.end(), fresh.begin(), fresh.end());
    std::size_t hits = 0;
    censored = 0;
    for (char h : hit) {
      hits += h == 1;
      censored += h == 2;
    }
    est.hits = hits;
    est.rounds = round;
    est.result = proportion_estimate(hits, hit.size(), censored);
    est.lower_bound = clopper_pearson_lower(hits, hit.size());
    if (est.lower_bound > 0.0 || n >= n_max) break;
    n = std::min(n_max, 2 * n);
  }
  return est;
}

KilledEstimate estimate_killed_subtransition(const ModelSpec& spec, const HybridState& start, const TargetSet& target,
                                             const IntegratorConfig& cfg, const RunOptions& run) {
  check_run(run);
  require_state(start, spec.dim);
  check_target(target, spec.dim);
  IntegratorConfig c = cfg;
  c.record_stride = 0;
  c.record_events = false;
  const EulerScheme scheme(spec, c);
  struct Sample {
    double killed, frozen, weight;
    bool exited;
  };
  const auto samples = parallel_map<Sample>(run.n_paths, [&](std::size_t i) {
    const KilledPath p = simulate_killed_path(scheme, start, derive_seed(run.seed, i));
    const double in = !p.path.exited() && in_ball(p.path.terminal.x, target) ? 1.0 : 0.0;
    return Sample{in * p.survival_weight, in, p.survival_weight, p.path.exited()};
  });
  const std::size_t n = samples.size();
  std::vector<double> killed(n), frozen(n), weight(n);
  std::size_t censored = 0;
  for (std::size_t i = 0; i < n; ++i) {
    killed[i] = samples[i].killed;
    frozen[i] = samples[i].frozen;
    weight[i] = samples[i].weight;
    censored += samples[i].exited;
  }
  KilledEstimate out;
  out.killed = mean_estimate(killed);
  out.frozen = mean_estimate(frozen);
  out.survival = mean_estimate(weight);
  out.killed.n_censored = out.frozen.n_censored = out.survival.n_censored = censored;
  return out;
}

// ---------------------------------------------------------------------------

void Partition::validate(int dim) const {
  require(lo.size() == dim && hi.size() == dim, "partition box dimension does not match the model");
  require(static_cast<int>(cells.size()) == dim, "partition needs one cell count per dimension");
  for (int i = 0; i < dim; ++i) {
    require(hi(i) > lo(i), "partition box must have hi > lo");
    require(cells[i] >= 1, "partition cell counts must be positive");
  }
  require(k_max >= 1, "partition k_max must be >= 1");
  require(size() < (std::size_t{1} << 26), "partition has too many cells");
}

std::size_t Partition::size() const {
  std::size_t n = static_cast<std::size_t>(k_max);
  for (int c : cells) n *= static_cast<std::size_t>(c);
  return n + 1;
}

std::size_t Partition::index(const HybridState& s) const {
  const std::size_t overflow = size() - 1;
  if (s.k > k_max) return overflow;
  std::size_t idx = static_cast<std::size_t>(s.k - 1);
  for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
    const double u = (s.x(i) - lo(i)) / (hi(i) - lo(i));
    if (!(u >= 0.0 && u < 1.0)) return overflow;
    const int c = std::min(cells[i] - 1, static_cast<int>(u * cells[i]));
    idx = idx * static_cast<std::size_t>(cells[i]) + static_cast<std::size_t>(c);
  }
  return idx;
}

InvariantReport estimate_invariant(const ModelSpec& spec, const std::vector<HybridState>& starts,
                                   const Partition& partition, const IntegratorConfig& cfg,
                                   const InvariantOptions& opts) {
  require(!starts.empty(), "no start states");
  require(opts.t_burn >= 0.0 && opts.t_burn < opts.t_end, "need 0 <= t_burn < t_end");
  require(opts.paths_per_start > 0, "paths_per_start must be positive");
  partition.validate(spec.dim);
  for (const auto& s : starts) require_state(s, spec.dim);
  IntegratorConfig c = cfg;
  c.horizon = opts.t_end;
  c.record_stride = 1;
  c.record_events = false;
  const EulerScheme scheme(spec, c);
  const double t_mid = 0.5 * (opts.t_burn + opts.t_end);
  const std::size_t m = partition.size();

  InvariantReport rep;
  std::vector<std::vector<double>> halves;
  for (std::size_t si = 0; si < starts.size(); ++si) {
    struct Occupation {
      std::vector<double> first, second;
      bool exited = false;
    };
    const auto occ = parallel_map<Occupation>(opts.paths_per_start, [&](std::size_t i) {
      const PathRecord p = simulate_path(scheme, starts[si], derive_seed(opts.seed, i, si));
      Occupation o;
      o.first.assign(m, 0.0);
      o.second.assign(m, 0.0);
      o.exited = p.exited();
      for (std::size_t j = 0; j + 1 < p.times.size(); ++j) {
        const double a = std::max(p.times[j], opts.t_burn);
        const double b = std::min(p.times[j + 1], opts.t_end);
        if (b <= a) continue;
        const std::size_t cell = partition.index(p.states[j]);
        const double in_first = std::max(0.0, std::min(b, t_mid) - a);
        o.first[cell] += in_first;
        o.second[cell] += (b - a) - in_first;
      }
      return o;
    });
    std::vector<double> first(m), second(m), hist(m), column(occ.size());
    std::size_t censored = 0;
    for (const auto& o : occ) censored += o.exited;
    for (std::size_t cell = 0; cell < m; ++cell) {
      for (std::size_t i = 0; i < occ.size(); ++i) column[i] = occ[i].first[cell];
      first[cell] = pairwise_sum(column);
      for (std::size_t i = 0; i < occ.size(); ++i) column[i] = occ[i].second[cell];
      second[cell] = pairwise_sum(column);
      hist[cell] = first[cell] + second[cell];
    }
    double total = 0.0;
    for (double v : hist) total += v;
    if (total <= 0.0) throw NumericError("no occupation time recorded in the window");
    for (double& v : hist) v /= total;
    rep.window_tv.push_back(total_variation(first, second));
    rep.histograms.push_back(std::move(hist));
    rep.n_censored.push_back(censored);
  }
  const std::size_t ns = starts.size();
  rep.tv.assign(ns, std::vector<double>(ns, 0.0));
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = i + 1; j < ns; ++j)
      rep.tv[i][j] = rep.tv[j][i] = total_variation(rep.histograms[i], rep.histograms[j]);
  return rep;
}

// ---------------------------------------------------------------------------

std::vector<CouplingDriftResult> verify_coupling_drift(const ModelSpec& spec, const GFunction& G,
                                                       const std::vector<CouplingDriftPair>& pairs, double h,
                                                       const CouplingConfig& cfg_in, const RunOptions& run) {
  check_run(run);
  require(h > 0.0 && std::isfinite(h), "h must be positive");
  CouplingConfig cfg = cfg_in;
  cfg.kind = CouplingKind::reflection;
  cfg.lambda_R = G.lambda_R;
  cfg.integrator.record_stride = 0;
  cfg.integrator.record_events = false;
  const double reach =
      std::min(G.alpha_degenerate ? 1.0 : G.alpha, cfg.delta0);

  auto run_at = [&](const CouplingDriftPair& pr, double step, std::uint64_t stream) {
    CouplingConfig c = cfg;
    c.integrator.step = step;
    c.integrator.horizon = step;
    const CoupledScheme scheme(spec, c);
    const double g0 = G((pr.x_tilde - pr.x).norm());
    std::vector<double> v(run.n_paths);
    std::vector<char> keep(run.n_paths);
    struct S {
      double v;
      bool exited;
    };
    const auto s = parallel_map<S>(run.n_paths, [&](std::size_t i) {
      const CoupledPathRecord r =
          couple(scheme, HybridState(pr.x, pr.k), HybridState(pr.x_tilde, pr.k), derive_seed(run.seed, i, stream));
      if (r.exited()) return S{0.0, true};
      return S{(G((r.terminal_second.x - r.terminal_first.x).norm()) - g0) / step, false};
    });
    for (std::size_t i = 0; i < s.size(); ++i) {
      v[i] = s[i].v;
      keep[i] = !s[i].exited;
    }
    return masked_mean(v, keep);
  };

  std::vector<CouplingDriftResult> out;
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    const auto& pr = pairs[pi];
    require_state(HybridState(pr.x, pr.k), spec.dim);
    require_state(HybridState(pr.x_tilde, pr.k), spec.dim);
    const double r0 = (pr.x_tilde - pr.x).norm();
    if (!(r0 > 0.0 && r0 <= reach) || std::max(pr.x.norm(), pr.x_tilde.norm()) > cfg.ball_radius) {
      std::ostringstream msg;
      msg << "pair " << pi << " violates 0 < |x - x~| <= " << reach << " or |x| v |x~| <= " << cfg.ball_radius;
      throw InvalidInput(msg.str());
    }
    CouplingDriftResult res;
    res.pair = pr;
    res.beta = 2.0 * G.lambda_R;
    res.drift = run_at(pr, h, 2 * pi);
    res.drift_half = run_at(pr, 0.5 * h, 2 * pi + 1);
    res.bias_allowance = std::abs(res.drift.estimate - res.drift_half.estimate);
    res.holds = res.drift.estimate <= -res.beta + 4.0 * (res.drift.std_error + res.bias_allowance);
    out.push_back(std::move(res));
  }
  return out;
}

DynkinResult dynkin_check(const ModelSpec& spec, const TestFunction& f, const HybridState& start,
                          const IntegratorConfig& cfg, const RunOptions& run, const GeneratorOptions& gen) {
  check_run(run);
  sup_of(f);
  require_state(start, spec.dim);
  const double t = cfg.horizon;
  const double f0 = f(start.x, start.k);
  auto lhs_at = [&](double horizon) {
    IntegratorConfig c = cfg;
    c.horizon = horizon;
    c.record_stride = 0;
    c.record_events = false;
    const EulerScheme scheme(spec, c);
    struct S {
      double v;
      bool exited;
    };
    const auto s = parallel_map<S>(run.n_paths, [&](std::size_t i) {
      const PathRecord p = simulate_path(scheme, start, derive_seed(run.seed, i));
      if (p.exited()) return S{0.0, true};
      return S{(f(p.terminal.x, p.terminal.k) - f0) / horizon, false};
    });
    std::vector<double> v(s.size());
    std::vector<char> keep(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      v[i] = s[i].v;
      keep[i] = !s[i].exited;
    }
    return masked_mean(v, keep);
  };
  DynkinResult r;
  r.lhs = lhs_at(t);
  r.lhs_half = lhs_at(0.5 * t);
  r.rhs = apply_generator(spec, f, start.x, start.k, gen);
  r.bias_allowance = 2.0 * std::abs(r.lhs.estimate - r.lhs_half.estimate) + r.rhs.bracket;
  const double num = std::abs(r.lhs.estimate - r.rhs.value);
  const double den = r.lhs.std_error + r.bias_allowance;
  r.z_score = num == 0.0 ? 0.0 : (den > 0.0 ? num / den : std::numeric_limits<double>::infinity());
  return r;
}

}  // namespace swjd
