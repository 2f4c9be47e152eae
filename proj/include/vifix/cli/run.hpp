#pragma once

// Orchestration behind the vifix command line: feasibility gating, scheme
// dispatch, certification and the trace / certificate writers.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <future>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vifix/cli/config.hpp"
#include "vifix/solvers.hpp"
#include "vifix/verify.hpp"

namespace vifix::cli {

// ---------------------------------------------------------------------------
// Logging to stderr, level taken from VIFIX_LOG (off|error|warn|info|debug).

enum class LogLevel { off = 0, error = 1, warn = 2, info = 3, debug = 4 };

inline LogLevel log_level() {
  const char* env = std::getenv("VIFIX_LOG");
  if (!env) return LogLevel::warn;
  const std::string s(env);
  if (s == "off") return LogLevel::off;
  if (s == "error") return LogLevel::error;
  if (s == "info") return LogLevel::info;
  if (s == "debug") return LogLevel::debug;
  return LogLevel::warn;
}

inline void log(LogLevel level, const std::string& msg) {
  static const char* names[] = {"", "error", "warn", "info", "debug"};
  if (level > log_level()) return;
  std::cerr << "[vifix] " << names[static_cast<int>(level)] << ": " << msg << '\n';
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string fmt(const Vec& x) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) out += ", ";
    out += fmt(x[i]);
  }
  return out + "]";
}

// ---------------------------------------------------------------------------
// Feasibility.

struct FeasibilityReport {
  std::vector<std::pair<std::string, std::string>> entries;
  std::vector<std::string> violations;

  bool feasible() const { return violations.empty(); }
  void add(std::string key, std::string value) { entries.emplace_back(std::move(key), std::move(value)); }

  std::string render() const {
    std::ostringstream os;
    for (const auto& [k, v] : entries) os << k << " = " << v << '\n';
    for (const auto& v : violations) os << "violation = " << v << '\n';
    os << "feasible = " << (feasible() ? "true" : "false") << '\n';
    return os.str();
  }
};

// check_params found violations; nothing was computed.
class Infeasible : public Error {
 public:
  using Error::Error;
};

// A configuration resolved into library objects; only built from feasible configs.
struct Plan {
  RunConfig cfg;
  Space space;
  StepSchedule sched;
  Family family;               // what the scheme iterates
  std::vector<Map> base_maps;  // the configured maps; their common fixed points define F
  std::vector<double> averaging;
  std::vector<double> t_seq;

  double tol_fp() const {
    if (cfg.certify.tol_fp) return *cfg.certify.tol_fp;
    return cfg.scheme == Scheme::implicit_path ? 1e-6 : 1e-3;
  }

  ProblemInstance instance() const {
    return ProblemInstance{space, family, cfg.A(), cfg.u, sched, cfg.composition_asserted};
  }
};

namespace detail {

inline int iterated_size(const RunConfig& cfg) {
  return cfg.preprocess == Preprocess::combine ? 1 : static_cast<int>(cfg.operators.size());
}

inline std::vector<double> averaging_parameters(const RunConfig& cfg, const Space& space, FeasibilityReport* rep) {
  std::vector<double> out;
  for (std::size_t i = 0; i < cfg.operators.size(); ++i) {
    const auto& op = cfg.operators[i];
    if (!op.k) continue;
    const double amax = max_averaging_parameter(space, *op.k);
    const double a = op.a ? *op.a : *op.a_fraction * amax;
    out.push_back(a);
    if (!rep) continue;
    const std::string tag = "operators[" + std::to_string(i) + "]";
    rep->add(tag + ".k", fmt_short(*op.k));
    rep->add(tag + ".a_max", fmt_short(amax));
    rep->add(tag + ".a", fmt_short(a));
    if (!(a > 0.0 && a < amax)) rep->violations.push_back(tag + ".a = " + fmt_short(a) + " outside (0, a_max)");
  }
  return out;
}

}  // namespace detail

inline FeasibilityReport check_params(const RunConfig& cfg, std::optional<StepSchedule>* sched_out = nullptr) {
  FeasibilityReport rep;
  const Space space = cfg.space();
  const AccretiveOperator& A = cfg.A();
  rep.add("scheme", to_string(cfg.scheme));
  rep.add("q", fmt_short(space.q()));
  rep.add("smoothness", "s = " + fmt_short(space.smooth_exponent()) + ", d = " + fmt_short(space.d()));
  rep.add("eta", fmt_short(A.eta()));
  rep.add("L", fmt_short(A.L()));
  const double lmax = lambda_max(space.smooth_exponent(), A.eta(), A.L(), space.d());

  std::optional<StepSchedule> sched;
  if (cfg.certificate == Certificate::spectral) {
    rep.add("certificate", "spectral");
    rep.add("lambda_max", "unbounded (spectral)");
    try {
      sched = make_spectral_schedule(space, A, *cfg.lambda, cfg.rule, cfg.n0);
    } catch (const InfeasibleLambda& e) {
      rep.violations.push_back(e.what());
    }
  } else {
    rep.add("certificate", "smoothness");
    rep.add("lambda_max", fmt_short(lmax));
    try {
      sched = make_schedule(space, A, cfg.lambda, cfg.rule, cfg.n0);
    } catch (const InfeasibleLambda& e) {
      rep.violations.push_back(e.what());
    }
  }
  if (!sched) {
    rep.add("lambda", cfg.lambda ? fmt_short(*cfg.lambda) : std::string("auto"));
    return rep;
  }
  rep.add("lambda", fmt_short(sched->lambda));
  rep.add("omega", fmt_short(sched->omega));
  rep.add("t_max", fmt_short(sched->t_max));
  rep.add("contraction", "(1 - t omega)^(1/" + fmt_short(sched->contraction_exponent) + ")");

  if (cfg.scheme == Scheme::implicit_path) {
    rep.add("t_path", "t0 = " + fmt_short(cfg.t_path.t0) + ", factor = " + fmt_short(cfg.t_path.factor) +
                          ", count = " + std::to_string(cfg.t_path.count));
    if (!(cfg.t_path.t0 > 0.0 && cfg.t_path.t0 < sched->t_max)) {
      rep.violations.push_back("t_path.t0 = " + fmt_short(cfg.t_path.t0) + " outside (0, t_max)");
    }
  } else {
    rep.add("rule", rule_name(sched->rule));
    rep.add("n0", std::to_string(sched->n0));
    if (cfg.horizon <= sched->n0) {
      rep.violations.push_back("schedule.horizon must exceed n0");
    } else {
      const ScheduleReport sr = validate_schedule(*sched, detail::iterated_size(cfg), cfg.horizon);
      for (const auto& c : sr.checks) {
        rep.add("check " + c.name, std::string(c.passed ? "pass" : "FAIL") + " (margin " + fmt_short(c.margin) + ")");
        if (!c.passed) rep.violations.push_back(c.name + " fails" + (c.detail.empty() ? "" : ": " + c.detail));
      }
    }
  }
  if (cfg.scheme == Scheme::pseudocontractive) detail::averaging_parameters(cfg, space, &rep);
  if (sched_out) *sched_out = sched;
  return rep;
}

// Throws Infeasible when `cfg` does not pass check_params.
inline Plan make_plan(const RunConfig& cfg) {
  std::optional<StepSchedule> sched;
  const FeasibilityReport rep = check_params(cfg, &sched);
  if (!rep.feasible() || !sched) throw Infeasible("configuration infeasible: " + rep.violations.front());
  Plan plan{cfg, cfg.space(), *sched, {}, {}, {}, {}};
  for (const auto& op : cfg.operators) plan.base_maps.push_back(op.map);

  Family fam;
  if (cfg.scheme == Scheme::pseudocontractive) {
    plan.averaging = detail::averaging_parameters(cfg, plan.space, nullptr);
    for (std::size_t i = 0; i < cfg.operators.size(); ++i) {
      fam.members.push_back(average(Pseudocontraction{cfg.operators[i].map, *cfg.operators[i].k}, plan.averaging[i],
                                    plan.space));
    }
  } else {
    fam.members = plan.base_maps;
  }
  if (cfg.preprocess == Preprocess::relax) {
    fam.relax_weights = cfg.pre_weights;
    fam = relax(fam);
  } else if (cfg.preprocess == Preprocess::combine) {
    fam.combine_weights = cfg.pre_weights;
    Family single;
    single.members = {convex_combine(fam)};
    fam = std::move(single);
  }
  plan.family = std::move(fam);
  if (cfg.scheme == Scheme::implicit_path) {
    plan.t_seq = geometric_t_sequence(cfg.t_path.t0, cfg.t_path.factor, cfg.t_path.count);
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Execution.

struct RunResult {
  IterationTrace trace;
  std::optional<VICertificate> cert;
  std::string cert_note;  // why no certificate, or caveats
  std::vector<double> original_residuals;
  std::string failure;  // non-empty when the scheme itself failed
  double seconds = 0.0;

  bool certified(const Plan& plan) const {
    return failure.empty() && cert && cert->certified(plan.cfg.certify.tol_vi, plan.tol_fp());
  }

  int exit_code(const Plan& plan) const {
    if (!failure.empty()) return 1;
    if (!plan.cfg.certify.enabled) return 0;
    return certified(plan) ? 0 : 1;
  }
};

inline std::vector<Vec> probes_for(const Plan& plan) {
  return probe_generator(plan.base_maps, plan.space.q(),
                         ProbeOptions{plan.cfg.certify.probes, plan.cfg.seed, 10.0, 1e-10, 10000});
}

// VI certificate of `x` against the configured maps.
inline VICertificate certify_point(const Plan& plan, const Vec& x) {
  const std::vector<Vec> probes = probes_for(plan);
  return vi_residual(plan.space, plan.base_maps, plan.cfg.A(), plan.sched.lambda, plan.cfg.u, x, probes);
}

inline RunResult execute(const Plan& plan) {
  RunResult out;
  const RunConfig& cfg = plan.cfg;
  const auto start = std::chrono::steady_clock::now();
  log(LogLevel::info, std::string("running ") + to_string(cfg.scheme) + " on " + cfg.source);
  try {
    switch (cfg.scheme) {
      case Scheme::implicit_path: {
        PathResult p = implicit_path(plan.instance(), plan.t_seq, cfg.x0, cfg.budget.tol, cfg.budget.n_max);
        out.trace = std::move(p.trace);
        break;
      }
      case Scheme::explicit_halpern:
        out.trace = explicit_iterate(plan.instance(), cfg.x0, StopRule{cfg.budget.n_max, cfg.budget.tol});
        break;
      case Scheme::yamada:
        out.trace = yamada_iterate(plan.space, plan.family.members.front(), cfg.A(), plan.sched.lambda,
                                   plan.sched.rule, plan.sched.n0, cfg.x0, cfg.budget.n_max);
        break;
      case Scheme::xu:
        out.trace = xu_iterate(plan.space, plan.family, cfg.A(), cfg.u, plan.sched.rule, plan.sched.n0, cfg.x0,
                               cfg.budget.n_max, cfg.composition_asserted);
        break;
      case Scheme::pseudocontractive: {
        PseudocontractiveProblem prob{plan.space, {}, plan.averaging, std::nullopt, cfg.A(), cfg.u, plan.sched,
                                      cfg.composition_asserted};
        for (const auto& op : cfg.operators) prob.maps.push_back(Pseudocontraction{op.map, *op.k});
        if (cfg.preprocess == Preprocess::relax) prob.gamma = cfg.pre_weights;
        PseudocontractiveResult r = pseudocontractive_solve(prob, cfg.x0, StopRule{cfg.budget.n_max, cfg.budget.tol});
        out.trace = std::move(r.trace);
        out.original_residuals = std::move(r.original_residuals);
        break;
      }
    }
  } catch (const DivergenceError& e) {
    out.trace = e.trace();
    out.failure = e.what();
  } catch (const NonConvergence& e) {
    out.trace = e.trace();
    out.failure = e.what();
  } catch (const Error& e) {
    out.failure = e.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!out.failure.empty()) {
    log(LogLevel::error, out.failure);
    return out;
  }
  log(LogLevel::info, std::to_string(out.trace.steps) + " steps in " + fmt_short(out.seconds) + " s");
  if (!cfg.certify.enabled) {
    out.cert_note = "certification disabled";
    return out;
  }
  try {
    out.cert = certify_point(plan, out.trace.final);
    if (!plan.space.is_hilbert()) out.cert_note = "residual-based only; no independent oracle for q != 2";
  } catch (const Error& e) {
    out.cert_note = std::string("no certificate: ") + e.what();
    log(LogLevel::warn, out.cert_note);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output.

// n,step,fp_residual,coord_0..coord_{d-1}
inline void write_trace(std::ostream& os, const IterationTrace& trace, int dim) {
  os << "n,step,fp_residual";
  for (int i = 0; i < dim; ++i) os << ",coord_" << i;
  os << '\n';
  for (const auto& e : trace.iterates) {
    os << e.n << ',' << fmt(e.step) << ',' << fmt(e.fp_residual);
    for (Eigen::Index i = 0; i < e.x.size(); ++i) os << ',' << fmt(e.x[i]);
    os << '\n';
  }
}

inline void write_certificate_fields(std::ostream& os, const Plan& plan, const VICertificate& cert) {
  os << "vi_max_residual = " << fmt(cert.max_residual) << '\n';
  if (cert.worst_probe >= 0) {
    os << "vi_worst_probe = " << fmt(cert.probes[static_cast<std::size_t>(cert.worst_probe)]) << '\n';
  }
  os << "vi_tol = " << fmt(plan.cfg.certify.tol_vi) << '\n';
  os << "probe_count = " << cert.probes.size() << '\n';
  os << "fp_residuals = [";
  for (std::size_t i = 0; i < cert.fixed_point_residuals.size(); ++i) {
    os << (i ? ", " : "") << fmt(cert.fixed_point_residuals[i]);
  }
  os << "]\n";
  os << "fp_tol = " << fmt(plan.tol_fp()) << '\n';
}

inline void write_certificate(std::ostream& os, const Plan& plan, const RunResult& r) {
  os << "config = " << plan.cfg.source << '\n';
  os << "scheme = " << to_string(plan.cfg.scheme) << '\n';
  os << "lambda = " << fmt(plan.sched.lambda) << '\n';
  os << "termination = " << (r.failure.empty() ? to_string(r.trace.terminal) : "diverged") << '\n';
  if (!r.failure.empty()) os << "failure = " << r.failure << '\n';
  os << "iterations = " << r.trace.steps << '\n';
  if (r.trace.final.size() > 0) os << "final_point = " << fmt(r.trace.final) << '\n';
  if (!r.original_residuals.empty()) {
    os << "original_fp_residuals = [";
    for (std::size_t i = 0; i < r.original_residuals.size(); ++i) os << (i ? ", " : "") << fmt(r.original_residuals[i]);
    os << "]\n";
  }
  if (r.cert) write_certificate_fields(os, plan, *r.cert);
  if (!r.cert_note.empty()) os << "note = " << r.cert_note << '\n';
  os << "certified = " << (r.certified(plan) ? "true" : "false") << '\n';
}

// Numbers of a point file: plain whitespace/comma separated values, or the
// final_point line of a certificate.
inline Vec read_point(std::istream& in, int dim) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto key = text.find("final_point");
  if (key != std::string::npos) {
    const auto eq = text.find('=', key);
    const auto eol = text.find('\n', key);
    text = text.substr(eq + 1, eol == std::string::npos ? std::string::npos : eol - eq - 1);
  }
  std::string cleaned;
  for (char c : text) cleaned += (c == ',' || c == '[' || c == ']') ? ' ' : c;
  std::istringstream is(cleaned);
  std::vector<double> vals;
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      vals.push_back(v);
    } catch (const std::exception&) {
      throw SchemaError("point", "not a number: '" + tok + "'");
    }
  }
  if (static_cast<int>(vals.size()) != dim) {
    throw SchemaError("point", "expected " + std::to_string(dim) + " coordinates, got " + std::to_string(vals.size()));
  }
  return Eigen::Map<const Vec>(vals.data(), dim);
}

// ---------------------------------------------------------------------------
// compare

// Two configs describe the same instance when space, operators, accretive
// operator, anchor and lambda agree; preprocessing and scheme may differ.
inline bool same_instance(const Plan& a, const Plan& b) {
  return a.cfg.instance == b.cfg.instance && a.cfg.u == b.cfg.u && a.sched.lambda == b.sched.lambda;
}

struct CompareRow {
  std::string source;
  std::string scheme;
  RunResult result;
};

inline std::vector<CompareRow> run_all(const std::vector<Plan>& plans) {
  std::vector<std::future<RunResult>> jobs;
  jobs.reserve(plans.size());
  for (const auto& p : plans) jobs.push_back(std::async(std::launch::async, [&p] { return execute(p); }));
  std::vector<CompareRow> rows;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    rows.push_back({plans[i].cfg.source, to_string(plans[i].cfg.scheme), jobs[i].get()});
  }
  return rows;
}

inline void write_compare_table(std::ostream& os, const std::vector<Plan>& plans, const std::vector<CompareRow>& rows) {
  os << "config\tscheme\titerations\ttermination\tfp_residual\tvi_max_residual\tcertified\tfinal_point\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i].result;
    const double fp = r.cert ? r.cert->max_fixed_point_residual()
                             : (r.trace.iterates.empty() ? -1.0 : r.trace.iterates.back().fp_residual);
    os << rows[i].source << '\t' << rows[i].scheme << '\t' << r.trace.steps << '\t'
       << (r.failure.empty() ? to_string(r.trace.terminal) : "diverged") << '\t' << fmt(fp) << '\t'
       << (r.cert ? fmt(r.cert->max_residual) : std::string("n/a")) << '\t'
       << (r.certified(plans[i]) ? "true" : "false") << '\t' << fmt(r.trace.final) << '\n';
  }
  double spread = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const Vec& a = rows[0].result.trace.final;
    const Vec& b = rows[i].result.trace.final;
    if (a.size() == b.size() && a.size() > 0) spread = std::max(spread, (a - b).cwiseAbs().maxCoeff());
  }
  os << "max_final_point_spread = " << fmt(spread) << '\n';
}

}  // namespace vifix::cli
