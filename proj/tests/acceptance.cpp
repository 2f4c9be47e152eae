// Acceptance run: one PASS/FAIL line per criterion, each with its runtime
// budget. Exits 1 when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "generators.hpp"
#include "vifix/cli/run.hpp"
#include "vifix/vifix.hpp"

using namespace vifix;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

ProblemInstance box_instance(double lambda, const Vec& u) {
  const Space h(2, 2.0);
  Family fam;
  fam.members = {Map::projection(Box{v2(0, 0), v2(1, 1)})};
  const auto A = AccretiveOperator::scaled_identity(2, 1.0);
  return ProblemInstance{h, fam, A, u, make_schedule(h, A, lambda, ClippedPrototypeRule{0.0}), false};
}

cli::Plan plan_from(const std::string& name) {
  return cli::make_plan(cli::load_config(std::string(VIFIX_CONFIG_DIR) + "/" + name));
}

// 1
Outcome smoothness_constants_check() {
  Outcome o;
  const double b = solve_bq(1.5);
  o.require(std::abs(b - (3.0 - 2.0 * std::sqrt(2.0))) <= 1e-10, "b_1.5 = " + num(b));
  o.require(std::abs(detail::bq_equation(1.5, b)) <= 1e-12, "defining residual " + num(detail::bq_equation(1.5, b)));
  const auto h = smoothness_constants(2.0);
  const auto l4 = smoothness_constants(4.0);
  o.require(h.exponent == 2.0 && h.d == 1.0, "q=2 constants");
  o.require(l4.exponent == 2.0 && l4.d == 3.0, "q=4 constants");
  o.detail = o.ok ? "b = " + num(b) : o.detail;
  return o;
}

// 2
Outcome duality_identities() {
  Outcome o;
  double worst = 0.0;
  for (double q : {1.5, 2.0, 3.0}) {
    const Space sp(5, q);
    const double s = sp.smooth_exponent();
    gen::Rng rng(1000 + static_cast<int>(q * 10));
    for (int k = 0; k < 10000; ++k) {
      const Vec x = rng.vec(5);
      const double nx = norm(sp, x);
      const DualVec f = duality_map(sp, x);
      worst = std::max(worst, std::abs(pairing(f, x) / std::pow(nx, s) - 1.0));
      worst = std::max(worst, std::abs(dual_norm(sp, f) / std::pow(nx, s - 1.0) - 1.0));
    }
  }
  o.require(worst <= 1e-10, "relative error " + num(worst));
  if (o.ok) o.detail = "max relative error " + num(worst);
  return o;
}

// 3
Outcome smoothness_inequality() {
  Outcome o;
  double worst = -INFINITY;
  for (double q : {1.2, 1.5, 1.8, 2.0, 3.0, 4.0}) {
    const Space sp(3, q);
    const double s = sp.smooth_exponent();
    const double d = sp.d();
    gen::Rng rng(2000 + static_cast<int>(q * 10));
    for (int k = 0; k < 10000; ++k) {
      const Vec x = rng.vec(3, 1.0);
      const Vec y = rng.vec(3, 1.0);
      const double gap = std::pow(norm(sp, x + y), s) - std::pow(norm(sp, x), s) -
                         s * pairing(duality_map(sp, x), y) - d * std::pow(norm(sp, y), s);
      worst = std::max(worst, gap);
    }
  }
  o.require(worst <= 1e-9, "worst violation " + num(worst));
  if (o.ok) o.detail = "worst gap " + num(worst);
  return o;
}

// 4
Outcome contraction_certificate() {
  Outcome o;
  const ProblemInstance inst = box_instance(0.9 * 2.0, v2(2, 0.5));
  const double t = 0.5 * inst.sched.t_max;
  const ResolventResult r = implicit_resolvent(inst, t, v2(-3, 4), 1e-12, 100000);
  const double bound = std::sqrt(1.0 - t * inst.sched.omega);
  o.require(r.ratios_recorded > 0, "no ratios recorded");
  o.require(r.max_ratio <= bound + 1e-6, "ratio " + num(r.max_ratio) + " > " + num(bound));
  o.require(r.residual <= 1e-12, "inner tol not reached");
  o.require(r.iterations <= r.apriori_iterations,
            std::to_string(r.iterations) + " > a-priori " + std::to_string(r.apriori_iterations));
  if (o.ok) {
    o.detail = "max ratio " + num(r.max_ratio) + " <= " + num(bound) + ", " + std::to_string(r.iterations) + "/" +
               std::to_string(r.apriori_iterations) + " iterations";
  }
  return o;
}

// 5
Outcome implicit_path_oracle() {
  Outcome o;
  const ProblemInstance inst = box_instance(1.0, v2(2, 0.5));
  const Vec oracle = projection_oracle(inst.u, ConvexSet{{Box{v2(0, 0), v2(1, 1)}}});
  const auto ts = geometric_t_sequence(0.5, 0.5, 20);
  const PathResult p = implicit_path(inst, ts, Vec::Zero(2), 1e-12, 1000000);
  const Map& T = inst.family.members.front();
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const Vec& z = p.solves[k].z;
    const Vec Tz = T(z);
    const double lhs = (z - Tz).norm();
    const double rhs = ts[k] * (inst.u.norm() + inst.sched.lambda * inst.A(Tz).norm());
    o.require(lhs <= rhs, "path residual bound fails at t = " + num(ts[k]));
  }
  const double err = (p.trace.final - oracle).norm();
  o.require(err <= 1e-3, "distance to oracle " + num(err));
  if (o.ok) o.detail = "final error " + num(err) + " at t = " + num(ts.back());
  return o;
}

// Largest violation of ||x_n - p|| <= max(||x_{n0} - p||, e ||u - lambda A p|| / omega)
// over every iterate, for each p.
double boundedness_slack(const ProblemInstance& inst, const Vec& x0, const std::vector<Vec>& ps, long long n_max,
                         IterationTrace* out) {
  std::vector<double> radius;
  for (const Vec& p : ps) {
    const double anchor = (inst.u - inst.sched.lambda * inst.A(p)).norm();
    radius.push_back(std::max((x0 - p).norm(), inst.sched.boundedness_radius(anchor)));
  }
  double worst = -INFINITY;
  auto check = [&](const Vec& x) {
    for (std::size_t i = 0; i < ps.size(); ++i) worst = std::max(worst, (x - ps[i]).norm() - radius[i]);
  };
  check(x0);
  *out = explicit_iterate(inst, x0, StopRule{n_max, 0.0}, [&](long long, const Vec& x, double, int) { check(x); });
  for (const auto& e : out->iterates) check(e.x);
  return worst;
}

// 6
Outcome explicit_oracle() {
  Outcome o;
  const ProblemInstance inst = box_instance(1.0, v2(2, 0.5));
  const std::vector<Vec> ps{v2(1, 0.5), v2(0, 0), v2(1, 1), v2(0, 1), v2(1, 0), v2(0.3, 0.7)};
  IterationTrace tr;
  const double slack = boundedness_slack(inst, Vec::Zero(2), ps, 1000000, &tr);
  const double err = (tr.final - v2(1, 0.5)).norm();
  o.require(err <= 1e-3, "distance to oracle " + num(err));
  o.require(slack <= 1e-9, "boundedness exceeded by " + num(slack));
  if (o.ok) o.detail = "final error " + num(err) + ", boundedness slack " + num(slack);
  return o;
}

// 7
Outcome uniqueness() {
  Outcome o;
  const ProblemInstance inst = box_instance(1.0, v2(2, 0.5));
  const Vec a0 = v2(0, 0);
  const Vec b0 = v2(-4, 7);
  const IterationTrace a = explicit_iterate(inst, a0, StopRule{1000000, 0.0});
  const IterationTrace b = explicit_iterate(inst, b0, StopRule{1000000, 0.0});
  const double gap = (a.final - b.final).norm();
  o.require((a0 - b0).norm() >= 1.0, "starts too close");
  o.require(gap <= 2e-3, "final gap " + num(gap));
  if (o.ok) o.detail = "start distance " + num((a0 - b0).norm()) + ", final gap " + num(gap);
  return o;
}

// 8
Outcome relaxed_cyclic_family() {
  Outcome o;
  const cli::Plan plan = plan_from("triangle_relaxed.json");
  const cli::RunResult r = cli::execute(plan);
  o.require(r.failure.empty(), r.failure);
  o.require(r.cert.has_value(), r.cert_note);
  if (!o.ok) return o;
  const VICertificate& c = *r.cert;
  o.require(plan.base_maps.size() == 3 && plan.family.relaxed, "not a relaxed r = 3 family");
  o.require(c.probes.size() >= 100, "only " + std::to_string(c.probes.size()) + " probes");
  o.require(c.max_fixed_point_residual() <= 1e-3, "fixed-point residual " + num(c.max_fixed_point_residual()));
  o.require(c.max_residual <= 1e-6, "vi residual " + num(c.max_residual));
  if (o.ok) {
    o.detail = "u = (" + num(plan.cfg.u[0]) + ", " + num(plan.cfg.u[1]) + "), fp " +
               num(c.max_fixed_point_residual()) + ", vi " + num(c.max_residual) + " over " +
               std::to_string(c.probes.size()) + " probes";
  }
  return o;
}

bool identical_prefix(const IterationTrace& a, const IterationTrace& b, std::size_t rows) {
  if (a.iterates.size() < rows || b.iterates.size() < rows) return false;
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& x = a.iterates[i];
    const auto& y = b.iterates[i];
    if (x.n != y.n || x.step != y.step || x.fp_residual != y.fp_residual) return false;
    for (Eigen::Index j = 0; j < x.x.size(); ++j) {
      if (x.x[j] != y.x[j]) return false;
    }
  }
  return true;
}

// 9
Outcome scheme_reductions() {
  Outcome o;
  for (const auto& [reduced, full] : {std::pair{"yamada.json", "yamada_explicit.json"}, {"xu.json", "xu_explicit.json"}}) {
    cli::Plan a = plan_from(reduced);
    cli::Plan b = plan_from(full);
    a.cfg.budget.n_max = b.cfg.budget.n_max = 1000;
    a.cfg.certify.enabled = b.cfg.certify.enabled = false;
    const auto ra = cli::execute(a);
    const auto rb = cli::execute(b);
    o.require(ra.failure.empty() && rb.failure.empty(), ra.failure + rb.failure);
    o.require(identical_prefix(ra.trace, rb.trace, 1001), std::string(reduced) + " trace differs from " + full);
  }
  const cli::Plan xu = plan_from("xu.json");
  const cli::RunResult r = cli::execute(xu);
  Mat M = Mat::Zero(2, 2);
  M.diagonal() << 1, 2;
  const Vec target = quadratic_min_oracle(M, xu.cfg.u, ConvexSet{{Box{v2(0, 0), v2(1, 1)}}});
  const double err = (r.trace.final - target).norm();
  o.require(r.failure.empty(), r.failure);
  o.require(err <= 1e-3, "xu limit off by " + num(err));
  if (o.ok) o.detail = "10^3 iterates bitwise equal; xu error " + num(err) + " after " + std::to_string(r.trace.steps);
  return o;
}

// 10
Outcome pseudocontractive_application() {
  Outcome o;
  const Space h(2, 2.0);
  const Map P = Map::projection(Box{v2(0, 0), v2(1, 1)});
  const Pseudocontraction T = synthesize_pseudocontraction(P, 0.5);
  const double a = 0.5 * max_averaging_parameter(h, 0.5);
  const Map Ta = average(T, a, h);
  o.require(Ta.warnings().empty(), "averaging flagged");

  gen::Rng rng(10);
  double worst = -INFINITY;
  for (int k = 0; k < 10000; ++k) {
    const Vec x = rng.vec(2, 1.0);
    const Vec y = rng.vec(2, 1.0);
    worst = std::max(worst, (Ta(x) - Ta(y)).norm() - (x - y).norm());
  }
  o.require(worst <= 1e-9, "nonexpansiveness violated by " + num(worst));

  std::vector<Vec> fixed{v2(0, 0), v2(1, 1), v2(0, 1), v2(1, 0), v2(0.5, 0.25)};
  for (int k = 0; k < 100; ++k) fixed.push_back(rng.box_vec(2, 0.0, 1.0));
  for (const Vec& p : fixed) o.require(Ta(p) == p, "T_a moves a point of F(T)");
  o.require(Ta(v2(2, 0.5)) != v2(2, 0.5), "T_a fixes a point outside F(T)");

  const cli::Plan plan = plan_from("pseudocontractive.json");
  o.require(plan.averaging.size() == 1 && plan.averaging[0] == a, "config averaging parameter differs");
  const cli::RunResult r = cli::execute(plan);
  o.require(r.failure.empty(), r.failure);
  o.require(r.cert.has_value(), r.cert_note);
  if (!o.ok) return o;
  o.require(r.cert->max_residual <= 1e-6, "vi residual " + num(r.cert->max_residual));
  o.require(r.cert->max_fixed_point_residual() <= 1e-3, "fixed-point residual " + num(r.cert->max_fixed_point_residual()));
  if (o.ok) {
    o.detail = "a = " + num(a) + ", nonexpansive slack " + num(worst) + ", vi " + num(r.cert->max_residual) +
               ", fp " + num(r.cert->max_fixed_point_residual());
  }
  return o;
}

struct Criterion {
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"smoothness constants", 1, smoothness_constants_check},
      {"duality-map identities", 5, duality_identities},
      {"smoothness inequality", 10, smoothness_inequality},
      {"contraction certificate", 1, contraction_certificate},
      {"implicit path vs projection oracle", 5, implicit_path_oracle},
      {"explicit scheme vs projection oracle", 60, explicit_oracle},
      {"uniqueness from separated starts", 120, uniqueness},
      {"relaxed cyclic half-space family", 120, relaxed_cyclic_family},
      {"yamada / xu reductions", 30, scheme_reductions},
      {"pseudocontractive application", 120, pseudocontractive_application},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.ok && secs >= c.budget_s) {
      o.ok = false;
      o.detail = "over time budget";
    }
    failed += !o.ok;
    std::printf("%s  %2zu  %-38s %7.3f s (< %g s)  %s\n", o.ok ? "PASS" : "FAIL", i + 1, c.name, secs, c.budget_s,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
