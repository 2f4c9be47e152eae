// vifix: check, run, compare and verify variational-inequality solver configs.
//
//   vifix check-params <config>
//   vifix run <config> [--trace PATH] [--certificate PATH]
//   vifix compare <config> <config>...
//   vifix verify <config> <point-file>
//
// Exit codes: 0 success / feasible / certified, 1 infeasible / uncertified /
// solver failure, 2 usage or schema error. VIFIX_LOG sets log verbosity.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "vifix/cli/run.hpp"

namespace {

using namespace vifix;
using namespace vifix::cli;

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

int schema_failure(const Error& e) {
  std::cerr << "vifix: schema error: " << e.what() << '\n';
  return kUsage;
}

bool write_file(const std::string& path, const std::string& body) {
  if (path.empty()) return true;
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "vifix: cannot write '" << path << "'\n";
    return false;
  }
  out << body;
  return static_cast<bool>(out);
}

int cmd_check(const std::string& path) {
  RunConfig cfg;
  try {
    cfg = load_config(path);
  } catch (const Error& e) {
    return schema_failure(e);
  }
  const FeasibilityReport rep = check_params(cfg);
  std::cout << rep.render();
  return rep.feasible() ? kOk : kFail;
}

int cmd_run(const std::string& path, const std::string& trace_override, const std::string& cert_override) {
  RunConfig cfg;
  try {
    cfg = load_config(path);
  } catch (const Error& e) {
    return schema_failure(e);
  }
  if (!trace_override.empty()) cfg.output.trace = trace_override;
  if (!cert_override.empty()) cfg.output.certificate = cert_override;

  const FeasibilityReport rep = check_params(cfg);
  if (!rep.feasible()) {
    std::cerr << "vifix: configuration infeasible, nothing run\n" << rep.render();
    return kFail;
  }
  const Plan plan = make_plan(cfg);
  const RunResult res = execute(plan);

  std::ostringstream trace;
  write_trace(trace, res.trace, plan.space.dim());
  std::ostringstream cert;
  write_certificate(cert, plan, res);
  if (!write_file(cfg.output.trace, trace.str()) || !write_file(cfg.output.certificate, cert.str())) return kFail;
  std::cout << cert.str();
  if (!res.failure.empty()) std::cerr << "vifix: " << res.failure << '\n';
  return res.exit_code(plan);
}

int cmd_compare(const std::vector<std::string>& paths) {
  if (paths.size() < 2) {
    std::cerr << "vifix: compare needs at least two configs\n";
    return kUsage;
  }
  std::vector<Plan> plans;
  for (const auto& p : paths) {
    RunConfig cfg;
    try {
      cfg = load_config(p);
    } catch (const Error& e) {
      return schema_failure(e);
    }
    const FeasibilityReport rep = check_params(cfg);
    if (!rep.feasible()) {
      std::cerr << "vifix: " << p << " is infeasible, nothing run\n" << rep.render();
      return kFail;
    }
    plans.push_back(make_plan(cfg));
  }
  for (std::size_t i = 1; i < plans.size(); ++i) {
    if (!same_instance(plans.front(), plans[i])) {
      std::cerr << "vifix: " << paths[i] << " describes a different instance than " << paths.front() << '\n';
      return kUsage;
    }
  }
  const auto rows = run_all(plans);
  write_compare_table(std::cout, plans, rows);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].result.exit_code(plans[i]) != kOk) return kFail;
  }
  return kOk;
}

int cmd_verify(const std::string& config_path, const std::string& point_path) {
  RunConfig cfg;
  Vec x;
  try {
    cfg = load_config(config_path);
    std::ifstream in(point_path);
    if (!in) throw SchemaError("point", "cannot open '" + point_path + "'");
    x = read_point(in, cfg.dim);
  } catch (const Error& e) {
    return schema_failure(e);
  }
  const FeasibilityReport rep = check_params(cfg);
  if (!rep.feasible()) {
    std::cerr << "vifix: configuration infeasible\n" << rep.render();
    return kFail;
  }
  const Plan plan = make_plan(cfg);
  VICertificate cert;
  try {
    cert = certify_point(plan, x);
  } catch (const Error& e) {
    std::cerr << "vifix: cannot certify: " << e.what() << '\n';
    return kFail;
  }
  std::cout << "point = " << fmt(x) << '\n';
  write_certificate_fields(std::cout, plan, cert);
  if (!plan.space.is_hilbert()) std::cout << "note = residual-based only; no independent oracle for q != 2\n";
  const bool ok = cert.certified(cfg.certify.tol_vi, plan.tol_fp());
  std::cout << "certified = " << (ok ? "true" : "false") << '\n';
  return ok ? kOk : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational inequalities over common fixed points of nonexpansive maps"};
  app.require_subcommand(1);

  std::string check_path;
  auto* check = app.add_subcommand("check-params", "Report lambda_max, lambda, omega, t_max and schedule checks");
  check->add_option("config", check_path, "Config file")->required();

  std::string run_path, trace_path, cert_path;
  auto* run = app.add_subcommand("run", "Run the configured scheme and write trace and certificate");
  run->add_option("config", run_path, "Config file")->required();
  run->add_option("--trace", trace_path, "Trace CSV path (overrides output.trace)");
  run->add_option("--certificate", cert_path, "Certificate path (overrides output.certificate)");

  std::vector<std::string> compare_paths;
  auto* compare = app.add_subcommand("compare", "Run several configs of one instance side by side");
  compare->add_option("configs", compare_paths, "Config files")->required();

  std::string verify_config, verify_point;
  auto* verify = app.add_subcommand("verify", "Certify a candidate point against a config's instance");
  verify->add_option("config", verify_config, "Config file")->required();
  verify->add_option("point", verify_point, "Point file (numbers, or a certificate)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*check) return cmd_check(check_path);
    if (*run) return cmd_run(run_path, trace_path, cert_path);
    if (*compare) return cmd_compare(compare_paths);
    if (*verify) return cmd_verify(verify_config, verify_point);
  } catch (const SchemaError& e) {
    return schema_failure(e);
  } catch (const std::exception& e) {
    std::cerr << "vifix: " << e.what() << '\n';
    return kFail;
  }
  return kUsage;
}
