#pragma once

// Iterative schemes for the variational inequality
//
//   find x' in F:  <u - lambda A x', j(p - x')> <= 0  for all p in F,
//
// F the common fixed-point set of a nonexpansive family:
//   * implicit resolvent path  z_t = t u + (I - t lambda A) T z_t,  t -> 0
//   * explicit cyclic scheme   x_{n+1} = a_{n+1} u + (I - a_{n+1} lambda A) T_{n+1} x_n
// together with the Yamada (u = 0, single map) and Xu (lambda = 1, linear
// SPD A, Hilbert space) special cases and the strict-pseudocontraction
// application.

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vifix/errors.hpp"
#include "vifix/operators.hpp"
#include "vifix/schedules.hpp"
#include "vifix/space.hpp"

namespace vifix {

enum class Termination { converged, max_iterations, diverged };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged:
      return "converged";
    case Termination::max_iterations:
      return "max_iterations";
    case Termination::diverged:
      return "diverged";
  }
  return "unknown";
}

struct TraceEntry {
  long long n;
  Vec x;
  double fp_residual;
  double step;
};

struct IterationTrace {
  std::vector<TraceEntry> iterates;
  Termination terminal = Termination::max_iterations;
  Vec final;
  long long steps = 0;  // iterations performed
};

// Which iterates make it into a trace: all of the first `dense`, then
// log-spaced (each kept step at least `growth` times the previous one).
// The last iterate is always kept.
struct TraceOptions {
  long long dense = 10000;
  double growth = 1.001;
};

class TraceThinner {
 public:
  explicit TraceThinner(TraceOptions opt) : opt_(opt), next_(opt.dense + 1) {}

  bool keep(long long k) {
    if (k <= opt_.dense) return true;
    if (k < next_) return false;
    next_ = std::max(k + 1, static_cast<long long>(std::ceil(static_cast<double>(k) * opt_.growth)));
    return true;
  }

 private:
  TraceOptions opt_;
  long long next_;
};

class NonConvergence : public NumericalError {
 public:
  NonConvergence(const std::string& what, IterationTrace trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const IterationTrace& trace() const { return trace_; }

 private:
  IterationTrace trace_;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, IterationTrace trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const IterationTrace& trace() const { return trace_; }

 private:
  IterationTrace trace_;
};

struct ProblemInstance {
  Space space;
  Family family;
  AccretiveOperator A;
  Vec u;
  StepSchedule sched;
  // The caller vouches that F(T_r...T_1) and its cyclic rotations all equal
  // the common fixed-point set (needed for raw multi-member families).
  bool composition_asserted = false;

  void validate() const {
    family.validate_for(space);
    A.validate_for(space);
    space.check(u, "anchor u");
    if (!(sched.lambda > 0.0 && sched.omega > 0.0 && sched.t_max > 0.0)) {
      throw ConfigurationError("instance: schedule is not feasible");
    }
  }

  int family_size() const { return family.size(); }
};

// T_r o ... o T_1 for the whole family.
inline Map cycle_map(const Family& family) { return Map::composition(family.members); }

// ||x - T_r o ... o T_1 x|| in the ambient norm.
inline double cycle_residual(const Space& space, const Map& cycle, const Vec& x) {
  return detail::lp_norm(x - cycle(x), space.q());
}

// The single nonexpansive map the implicit scheme works with: the only
// member, the convex combination when weights are given, otherwise the
// cyclic composition (allowed for relaxed families or when the composition
// condition is asserted).
inline Map resolvent_map(const ProblemInstance& inst) {
  const Family& fam = inst.family;
  if (fam.size() == 1) return fam.members.front();
  if (fam.combine_weights) return convex_combine(fam);
  if (!fam.relaxed && !inst.composition_asserted) {
    throw ConfigurationError(
        "multi-member family without relaxation: enable relaxation or assert the composition condition");
  }
  return cycle_map(fam);
}

// ---------------------------------------------------------------------------
// Implicit scheme.

struct ResolventResult {
  Vec z;
  long long iterations = 0;        // applications of S_t
  long long apriori_iterations = 0;  // Banach bound, counting the first step
  double contraction_factor = 0.0;  // (1 - t omega)^{1/e}
  double max_ratio = 0.0;           // max ||x_{k+1} - x_k|| / ||x_k - x_{k-1}||
  long long ratios_recorded = 0;
  double residual = 0.0;            // last step ||x_{k} - x_{k-1}||
};

// Fixed point of the strict contraction S_t x = t u + (I - t lambda A) T x,
// by plain Picard iteration from x0 until ||x_{k+1} - x_k|| <= tol.
//
// Ratios of successive steps are only recorded while the previous step is
// above the rounding floor 64 eps (1 + ||x||).
inline ResolventResult implicit_resolvent(const ProblemInstance& inst, const Map& T, double t, const Vec& x0,
                                          double tol, long long max_iter) {
  const Space& space = inst.space;
  T.validate_for(space);
  inst.A.validate_for(space);
  space.check(x0, "x0");
  if (!(t > 0.0 && t < inst.sched.t_max)) {
    std::ostringstream os;
    os << "implicit_resolvent: t = " << t << " outside (0, t_max = " << inst.sched.t_max << ")";
    throw ParameterError(os.str());
  }
  if (!(tol > 0.0)) throw ParameterError("implicit_resolvent: tol must be > 0");
  if (max_iter < 1) throw ParameterError("implicit_resolvent: max_iter must be >= 1");

  const double lam = inst.sched.lambda;
  const double q = space.q();
  auto S = [&](const Vec& x) -> Vec {
    const Vec y = T(x);
    return t * inst.u + (y - (t * lam) * inst.A(y));
  };

  ResolventResult res;
  res.contraction_factor = inst.sched.contraction_factor(t);
  const double c = res.contraction_factor;

  IterationTrace trace;
  TraceThinner thin(TraceOptions{});
  Vec x = x0;
  trace.iterates.push_back({0, x, 0.0, t});
  double prev_step = -1.0;
  for (long long k = 1; k <= max_iter; ++k) {
    Vec next = S(x);
    if (!next.allFinite()) {
      trace.terminal = Termination::diverged;
      trace.final = x;
      trace.steps = k;
      throw DivergenceError("implicit_resolvent: non-finite iterate", std::move(trace));
    }
    const double step = detail::lp_norm(next - x, q);
    if (k == 1) {
      if (step == 0.0 || c <= 0.0) {
        res.apriori_iterations = 1;
      } else {
        const double n = std::log(tol * (1.0 - c) / step) / std::log(c);
        res.apriori_iterations = 1 + static_cast<long long>(std::max(0.0, std::ceil(n)));
      }
    }
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + detail::lp_norm(x, q));
    if (prev_step > floor) {
      res.max_ratio = std::max(res.max_ratio, step / prev_step);
      ++res.ratios_recorded;
    }
    prev_step = step;
    x = std::move(next);
    if (thin.keep(k)) trace.iterates.push_back({k, x, step, t});
    if (step <= tol) {
      res.z = x;
      res.iterations = k;
      res.residual = step;
      return res;
    }
  }
  trace.terminal = Termination::max_iterations;
  trace.final = x;
  trace.steps = max_iter;
  std::ostringstream os;
  os << "implicit_resolvent: no convergence to tol " << tol << " within " << max_iter
     << " iterations (contraction factor " << c << "); check the declared constants";
  throw NonConvergence(os.str(), std::move(trace));
}

inline ResolventResult implicit_resolvent(const ProblemInstance& inst, double t, const Vec& x0, double tol,
                                          long long max_iter) {
  inst.validate();
  return implicit_resolvent(inst, resolvent_map(inst), t, x0, tol, max_iter);
}

// t_k = t0 * factor^k, k = 0..count-1.
inline std::vector<double> geometric_t_sequence(double t0, double factor, int count) {
  if (!(t0 > 0.0) || !(factor > 0.0 && factor < 1.0) || count < 1) {
    throw ParameterError("geometric_t_sequence: need t0 > 0, factor in (0,1), count >= 1");
  }
  std::vector<double> out;
  out.reserve(count);
  double t = t0;
  for (int k = 0; k < count; ++k) {
    out.push_back(t);
    t *= factor;
  }
  return out;
}

struct PathResult {
  IterationTrace trace;  // n = position on the path, step = t, x = z_t
  std::vector<ResolventResult> solves;
  // sup_t ||u - lambda A T z_t||; ||z_t - T z_t|| <= t * path_constant.
  double path_constant = 0.0;
};

// Solves z_t along a decreasing t-sequence, warm-starting each solve at the
// previous z_t. The trace residual is ||z_t - T z_t||.
inline PathResult implicit_path(const ProblemInstance& inst, const std::vector<double>& t_sequence,
                                const Vec& x0, double tol, long long max_iter) {
  inst.validate();
  if (t_sequence.empty()) throw ParameterError("implicit_path: empty t-sequence");
  for (std::size_t i = 0; i < t_sequence.size(); ++i) {
    if (!(t_sequence[i] > 0.0 && t_sequence[i] < inst.sched.t_max)) {
      throw ParameterError("implicit_path: every t must lie in (0, t_max)");
    }
    if (i > 0 && !(t_sequence[i] < t_sequence[i - 1])) {
      throw ParameterError("implicit_path: t-sequence must be strictly decreasing");
    }
  }
  const Map T = resolvent_map(inst);
  const double q = inst.space.q();
  PathResult out;
  Vec warm = x0;
  long long n = 0;
  for (double t : t_sequence) {
    ResolventResult r = implicit_resolvent(inst, T, t, warm, tol, max_iter);
    const Vec Tz = T(r.z);
    const double fp = detail::lp_norm(r.z - Tz, q);
    const double anchor = detail::lp_norm(inst.u - inst.sched.lambda * inst.A(Tz), q);
    out.path_constant = std::max(out.path_constant, anchor);
    out.trace.iterates.push_back({++n, r.z, fp, t});
    warm = r.z;
    out.solves.push_back(std::move(r));
  }
  out.trace.final = warm;
  out.trace.steps = n;
  out.trace.terminal = Termination::converged;
  return out;
}

// ---------------------------------------------------------------------------
// Explicit scheme.

// tol <= 0: run the full budget. tol > 0: stop once the cycle residual
// ||x - T_r o ... o T_1 x|| drops to tol.
struct StopRule {
  long long n_max = 1000;
  double tol = 0.0;
};

// Called after every step with (n, x_n, alpha_n, 1-based member index).
using StepObserver = std::function<void(long long, const Vec&, double, int)>;

namespace detail {

inline void check_alpha(const StepSchedule& sched, long long n, double alpha) {
  if (!(alpha > 0.0 && alpha < sched.t_max)) {
    std::ostringstream os;
    os << "alpha_" << n << " = " << alpha << " outside (0, t_max = " << sched.t_max
       << "); clip the schedule or raise n0";
    throw ConfigurationError(os.str());
  }
}

inline bool blown_up(const Vec& x) { return !x.allFinite() || x.cwiseAbs().maxCoeff() > 1e150; }

}  // namespace detail

// x_{n+1} = alpha_{n+1} u + (I - alpha_{n+1} lambda A) T_{n+1} x_n with
// T_n = T_{n mod r}. The starting point is x_{n0} = x0; every alpha used
// must lie in (0, t_max).
inline IterationTrace explicit_iterate(const ProblemInstance& inst, const Vec& x0, StopRule stop,
                                       const StepObserver& observer = {}, TraceOptions topt = {}) {
  inst.validate();
  inst.space.check(x0, "x0");
  const Family& fam = inst.family;
  if (fam.size() > 1 && !fam.relaxed && !inst.composition_asserted) {
    throw ConfigurationError(
        "explicit scheme: multi-member family requires relaxation or an asserted composition condition");
  }
  if (stop.n_max < 0) throw ParameterError("explicit_iterate: n_max must be >= 0");
  const Map cycle = cycle_map(fam);
  const double lam = inst.sched.lambda;
  const int r = fam.size();

  IterationTrace trace;
  TraceThinner thin(topt);
  Vec x = x0;
  long long n = inst.sched.n0;
  trace.iterates.push_back({n, x, cycle_residual(inst.space, cycle, x), 0.0});
  bool last_logged = true;
  double last_alpha = 0.0;
  for (long long k = 1; k <= stop.n_max; ++k) {
    const long long m = n + 1;
    const int idx = cyclic_select(r, m);
    const double alpha = inst.sched.alpha(m);
    detail::check_alpha(inst.sched, m, alpha);
    const Vec y = fam.members[idx - 1](x);
    const Vec Ay = inst.A(y);
    x = alpha * inst.u + (y - (alpha * lam) * Ay);
    n = m;
    last_alpha = alpha;
    trace.steps = k;
    if (detail::blown_up(x)) {
      trace.terminal = Termination::diverged;
      trace.final = x;
      std::ostringstream os;
      os << "explicit scheme diverged at n=" << n << " (non-finite or overflowing iterate)";
      throw DivergenceError(os.str(), std::move(trace));
    }
    if (observer) observer(n, x, alpha, idx);
    double res = -1.0;
    if (stop.tol > 0.0) {
      res = cycle_residual(inst.space, cycle, x);
      if (res <= stop.tol) {
        trace.iterates.push_back({n, x, res, alpha});
        trace.terminal = Termination::converged;
        trace.final = x;
        return trace;
      }
    }
    last_logged = thin.keep(k);
    if (last_logged) {
      if (res < 0.0) res = cycle_residual(inst.space, cycle, x);
      trace.iterates.push_back({n, x, res, alpha});
    }
  }
  if (!last_logged) trace.iterates.push_back({n, x, cycle_residual(inst.space, cycle, x), last_alpha});
  trace.terminal = Termination::max_iterations;
  trace.final = x;
  return trace;
}

// Yamada's hybrid steepest descent x_{n+1} = T x_n - mu lambda_{n+1} A(T x_n),
// written out independently; it coincides step for step with
// explicit_iterate for u = 0, lambda = mu, alpha_n = lambda_n, r = 1.
inline IterationTrace yamada_iterate(const Space& space, const Map& T, const AccretiveOperator& A, double mu,
                                     const AlphaRule& lambda_rule, long long n0, const Vec& x0, long long n_max,
                                     TraceOptions topt = {}) {
  T.validate_for(space);
  A.validate_for(space);
  space.check(x0, "x0");
  const double s = space.smooth_exponent();
  const double mu_max = lambda_max(s, A.eta(), A.L(), space.d());
  if (!(mu > 0.0 && mu < mu_max)) {
    std::ostringstream os;
    os << "yamada: mu = " << mu << " outside (0, " << mu_max << ")";
    throw InfeasibleLambda(os.str());
  }
  const double t_max = t_interval(omega(s, A.eta(), mu, A.L(), space.d()));
  const double q = space.q();

  IterationTrace trace;
  TraceThinner thin(topt);
  Vec x = x0;
  long long n = n0;
  trace.iterates.push_back({n, x, detail::lp_norm(x - T(x), q), 0.0});
  bool last_logged = true;
  double last = 0.0;
  for (long long k = 1; k <= n_max; ++k) {
    const long long m = n + 1;
    const double lam_n = alpha_value(lambda_rule, m);
    if (!(lam_n > 0.0 && lam_n < t_max)) throw ConfigurationError("yamada: lambda_n outside (0, t_max)");
    const Vec Tx = T(x);
    x = Tx - (mu * lam_n) * A(Tx);
    n = m;
    last = lam_n;
    trace.steps = k;
    if (detail::blown_up(x)) {
      trace.terminal = Termination::diverged;
      trace.final = x;
      throw DivergenceError("yamada: diverged", std::move(trace));
    }
    last_logged = thin.keep(k);
    if (last_logged) trace.iterates.push_back({n, x, detail::lp_norm(x - T(x), q), lam_n});
  }
  if (!last_logged) trace.iterates.push_back({n, x, detail::lp_norm(x - T(x), q), last});
  trace.terminal = Termination::max_iterations;
  trace.final = x;
  return trace;
}

// Xu's scheme x_{n+1} = (I - alpha_{n+1} A) T_{n+1} x_n + alpha_{n+1} u in
// Hilbert space with A linear SPD. Step sizes are certified spectrally:
// alpha_n < min{1, 2 / (eta + L)} keeps I - alpha_n A a (1 - alpha_n eta)-contraction.
inline IterationTrace xu_iterate(const Space& space, const Family& family, const AccretiveOperator& A,
                                 const Vec& u, const AlphaRule& alpha_rule, long long n0, const Vec& x0,
                                 long long n_max, bool composition_asserted = false, TraceOptions topt = {}) {
  if (!space.is_hilbert()) throw ConfigurationError("xu: requires q = 2");
  if (!A.is_linear_spd()) throw ConfigurationError("xu: requires a linear SPD operator");
  family.validate_for(space);
  A.validate_for(space);
  space.check(u, "anchor u");
  space.check(x0, "x0");
  if (family.size() > 1 && !family.relaxed && !composition_asserted) {
    throw ConfigurationError("xu: multi-member family requires relaxation or an asserted composition condition");
  }
  const double t_max = std::min(1.0, 2.0 / (A.eta() + A.L()));
  const Map cycle = cycle_map(family);
  const int r = family.size();

  IterationTrace trace;
  TraceThinner thin(topt);
  Vec x = x0;
  long long n = n0;
  trace.iterates.push_back({n, x, cycle_residual(space, cycle, x), 0.0});
  bool last_logged = true;
  double last = 0.0;
  for (long long k = 1; k <= n_max; ++k) {
    const long long m = n + 1;
    const double a = alpha_value(alpha_rule, m);
    if (!(a > 0.0 && a < t_max)) throw ConfigurationError("xu: alpha_n outside (0, min{1, 2/(eta+L)})");
    const Vec Tx = family.members[cyclic_select(r, m) - 1](x);
    x = (Tx - a * A(Tx)) + a * u;
    n = m;
    last = a;
    trace.steps = k;
    if (detail::blown_up(x)) {
      trace.terminal = Termination::diverged;
      trace.final = x;
      throw DivergenceError("xu: diverged", std::move(trace));
    }
    last_logged = thin.keep(k);
    if (last_logged) trace.iterates.push_back({n, x, cycle_residual(space, cycle, x), a});
  }
  if (!last_logged) trace.iterates.push_back({n, x, cycle_residual(space, cycle, x), last});
  trace.terminal = Termination::max_iterations;
  trace.final = x;
  return trace;
}

// ---------------------------------------------------------------------------
// Strict pseudocontractions.

struct PseudocontractiveProblem {
  Space space;
  std::vector<Pseudocontraction> maps;
  std::vector<double> a;                      // averaging parameters
  std::optional<std::vector<double>> gamma;  // optional relaxation of T_{a_i}
  AccretiveOperator A;
  Vec u;
  StepSchedule sched;
  bool composition_asserted = false;
};

struct PseudocontractiveResult {
  IterationTrace trace;
  Family averaged;                      // the family actually iterated
  std::vector<double> original_residuals;  // ||x - T_i x|| for the original maps
};

// Averages each T_i into T_{a_i} = (1 - a_i) I + a_i T_i (nonexpansive for
// a_i < max_averaging_parameter), optionally relaxes, then runs the explicit scheme.
inline PseudocontractiveResult pseudocontractive_solve(const PseudocontractiveProblem& prob, const Vec& x0,
                                                       StopRule stop, const StepObserver& observer = {},
                                                       TraceOptions topt = {}) {
  if (prob.maps.empty()) throw ConfigurationError("pseudocontractive: no maps");
  if (prob.a.size() != prob.maps.size()) throw ConfigurationError("pseudocontractive: one a_i per map required");
  Family fam;
  for (std::size_t i = 0; i < prob.maps.size(); ++i) {
    const double amax = max_averaging_parameter(prob.space, prob.maps[i].k);
    if (!(prob.a[i] > 0.0 && prob.a[i] < amax)) {
      std::ostringstream os;
      os << "pseudocontractive: a_" << (i + 1) << " = " << prob.a[i] << " outside (0, " << amax << ")";
      throw ConfigurationError(os.str());
    }
    fam.members.push_back(average(prob.maps[i], prob.a[i], prob.space));
  }
  if (prob.gamma) {
    fam.relax_weights = *prob.gamma;
    fam = relax(fam);
  }
  ProblemInstance inst{prob.space, fam, prob.A, prob.u, prob.sched, prob.composition_asserted};
  PseudocontractiveResult out;
  out.trace = explicit_iterate(inst, x0, stop, observer, topt);
  out.averaged = std::move(fam);
  for (const auto& T : prob.maps) {
    out.original_residuals.push_back(detail::lp_norm(out.trace.final - T.map(out.trace.final), prob.space.q()));
  }
  return out;
}

}  // namespace vifix
