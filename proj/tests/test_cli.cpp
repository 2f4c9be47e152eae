#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "vifix/cli/run.hpp"

using namespace vifix;
using namespace vifix::cli;
namespace fs = std::filesystem;

namespace {

struct ToolResult {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("vifix_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  static std::string config(const std::string& name) { return std::string(VIFIX_CONFIG_DIR) + "/" + name; }

  fs::path write(const std::string& name, const std::string& body) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << body;
    return p;
  }

  fs::path write_json(const std::string& name, const json& j) const { return write(name, j.dump(2)); }

  static json load(const std::string& name) {
    std::ifstream in(config(name));
    return json::parse(in);
  }

  ToolResult tool(const std::string& args, const std::string& env = "") const {
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" + VIFIX_TOOL_PATH + "' " + args + " 2>'" +
                            err.string() + "'";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
    const int status = ::pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out, slurp(err)};
  }

  fs::path dir_;
};

double field(const std::string& report, const std::string& key) {
  const auto pos = report.find("\n" + key + " = ");
  if (pos == std::string::npos) return std::nan("");
  return std::stod(report.substr(pos + key.size() + 4));
}

json box_doc() {
  return json::parse(R"({
    "space": {"dim": 2, "q": 2},
    "operators": [{"type": "project_box", "lo": [0, 0], "hi": [1, 1]}],
    "accretive": {"type": "identity_scaled", "eta": 1},
    "u": [2, 0.5],
    "lambda": 1,
    "scheme": "explicit",
    "budget": {"n_max": 1000}
  })");
}

std::string schema_path_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const SchemaError& e) {
    return e.path();
  }
  return "<accepted>";
}

}  // namespace

// Schema.

TEST(Schema, AcceptsMinimalBox) {
  const RunConfig cfg = parse_config(box_doc());
  EXPECT_EQ(cfg.dim, 2);
  EXPECT_EQ(cfg.scheme, Scheme::explicit_halpern);
  EXPECT_EQ(cfg.budget.n_max, 1000);
  EXPECT_TRUE(std::holds_alternative<ClippedPrototypeRule>(cfg.rule));
}

TEST(Schema, FieldPaths) {
  json d = box_doc();
  d["colour"] = 1;
  EXPECT_EQ(schema_path_of(d), "colour");

  d = box_doc();
  d["space"].erase("dim");
  EXPECT_EQ(schema_path_of(d), "space.dim");

  d = box_doc();
  d["operators"][0]["hi"] = {1, 1, 1};
  EXPECT_EQ(schema_path_of(d), "operators[0].hi");

  d = box_doc();
  d["operators"][0]["lo"] = {2, 0};
  EXPECT_EQ(schema_path_of(d), "operators[0]");

  d = box_doc();
  d["schedule"] = {{"rule", "power"}, {"c", 0.5}};
  EXPECT_EQ(schema_path_of(d), "schedule.rho");

  d = box_doc();
  d["lambda"] = "big";
  EXPECT_EQ(schema_path_of(d), "lambda");

  d = box_doc();
  d["space"]["q"] = 3;
  EXPECT_EQ(schema_path_of(d), "operators[0]");  // Euclidean projection in l3

  d = box_doc();
  d["scheme"] = "xu";
  d["space"]["q"] = 3;
  d["operators"] = {{{"type", "identity"}}};
  EXPECT_EQ(schema_path_of(d), "space.q");

  d = box_doc();
  d["scheme"] = "yamada";
  EXPECT_EQ(schema_path_of(d), "u");

  d = box_doc();
  d["operators"][0] = {{"type", "pseudocontraction"}, {"k", 0.5}, {"a", 0.1}, {"of", box_doc()["operators"][0]}};
  EXPECT_EQ(schema_path_of(d), "operators[0].type");

  d = box_doc();
  d["operators"].push_back(d["operators"][0]);
  EXPECT_EQ(schema_path_of(d), "preprocessing");

  d = box_doc();
  d["accretive"] = {{"type", "linear_spd"}, {"matrix", {{1, 2}, {0, 1}}}, {"eta", 1}, {"L", 3}};
  EXPECT_EQ(schema_path_of(d), "accretive");
}

TEST(Schema, RandomAnchorFollowsSeed) {
  json d = box_doc();
  d["u"] = {{"random", {{"lo", -2}, {"hi", 2}}}};
  d["seed"] = 11;
  const Vec a = parse_config(d).u;
  const Vec b = parse_config(d).u;
  EXPECT_EQ(a, b);
  EXPECT_LE(a.cwiseAbs().maxCoeff(), 2.0);
  d["seed"] = 12;
  EXPECT_NE(parse_config(d).u, a);
}

TEST(Schema, XuIsSpectralWithUnitLambda) {
  json d = box_doc();
  d["scheme"] = "xu";
  d.erase("lambda");
  d["accretive"] = {{"type", "linear_spd"}, {"matrix", {{1, 0}, {0, 2}}}, {"eta", 1}, {"L", 2}};
  const RunConfig cfg = parse_config(d);
  EXPECT_EQ(cfg.certificate, Certificate::spectral);
  EXPECT_EQ(*cfg.lambda, 1.0);
  d["lambda"] = 0.5;
  EXPECT_EQ(schema_path_of(d), "lambda");
}

TEST(PointFile, PlainAndCertificate) {
  std::istringstream plain("1, 0.5\n");
  EXPECT_EQ(read_point(plain, 2), (Vec(2) << 1, 0.5).finished());
  std::istringstream cert("scheme = explicit\nfinal_point = [0.25, -3]\ncertified = true\n");
  EXPECT_EQ(read_point(cert, 2), (Vec(2) << 0.25, -3).finished());
  std::istringstream bad("1 two");
  EXPECT_THROW(read_point(bad, 2), SchemaError);
  std::istringstream shorty("1");
  EXPECT_THROW(read_point(shorty, 2), SchemaError);
}

TEST(Plan, GatesInfeasibleConfigs) {
  json d = box_doc();
  d["lambda"] = 3;
  const RunConfig cfg = parse_config(d);
  EXPECT_FALSE(check_params(cfg).feasible());
  EXPECT_THROW(make_plan(cfg), Infeasible);
}

TEST(Plan, CombineIteratesOneMap) {
  json d = box_doc();
  d["operators"].push_back({{"type", "project_ball"}, {"center", {0.5, 0.5}}, {"radius", 0.5}});
  d["preprocessing"] = {{"combine", {0.5, 0.5}}};
  const Plan plan = make_plan(parse_config(d));
  EXPECT_EQ(plan.family.size(), 1);
  EXPECT_EQ(plan.base_maps.size(), 2u);
}

// check-params.

TEST_F(Cli, CheckParamsAutoLambda) {
  const ToolResult r = tool("check-params '" + config("box_auto_lambda.json") + "'");
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_DOUBLE_EQ(field(r.out, "lambda"), 1.8);
  EXPECT_DOUBLE_EQ(field(r.out, "omega"), 0.36);
  EXPECT_DOUBLE_EQ(field(r.out, "t_max"), 1.0);
  EXPECT_DOUBLE_EQ(field(r.out, "lambda_max"), 2.0);
  EXPECT_NE(r.out.find("feasible = true"), std::string::npos);
}

TEST_F(Cli, CheckParamsInfeasibleLambda) {
  const ToolResult r = tool("check-params '" + config("infeasible_lambda.json") + "'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("feasible = false"), std::string::npos);
  EXPECT_NE(r.out.find("lambda = 3 outside"), std::string::npos);
}

TEST_F(Cli, CheckParamsConstantSchedule) {
  const ToolResult r = tool("check-params '" + config("constant_schedule.json") + "'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("α_n → 0 fails"), std::string::npos) << r.out;
}

TEST_F(Cli, SchemaErrorExitsTwoWithPath) {
  json d = box_doc();
  d["budget"]["n_max"] = "lots";
  const fs::path p = write_json("bad.json", d);
  const ToolResult r = tool("check-params '" + p.string() + "'");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("budget.n_max"), std::string::npos) << r.err;

  write("broken.json", "{\"space\": ");
  EXPECT_EQ(tool("run broken.json").code, 2);
  EXPECT_EQ(tool("run missing.json").code, 2);
  EXPECT_EQ(tool("frobnicate").code, 2);
  EXPECT_EQ(tool("").code, 2);
}

// run.

TEST_F(Cli, RunRefusesInfeasibleWithoutComputing) {
  json d = load("infeasible_lambda.json");
  d["output"] = {{"trace", "t.csv"}, {"certificate", "c.txt"}};
  const fs::path p = write_json("inf.json", d);
  const ToolResult r = tool("run '" + p.string() + "'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("nothing run"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "t.csv"));
  EXPECT_FALSE(fs::exists(dir_ / "c.txt"));
}

TEST_F(Cli, RunBoxExplicitCertified) {
  const ToolResult r = tool("run '" + config("box_explicit.json") + "'");
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  const std::string cert = slurp(dir_ / "box_explicit.cert");
  EXPECT_EQ(cert, r.out);
  EXPECT_LE(field(cert, "vi_max_residual"), 1e-6);
  EXPECT_EQ(field(cert, "probe_count"), 100.0);
  EXPECT_NE(cert.find("termination = max_iterations"), std::string::npos);
  EXPECT_NE(cert.find("final_point = [1.00099"), std::string::npos);

  std::ifstream trace(dir_ / "box_explicit.csv");
  std::string header, line, last;
  std::getline(trace, header);
  EXPECT_EQ(header, "n,step,fp_residual,coord_0,coord_1");
  long long rows = 0;
  while (std::getline(trace, line)) {
    ++rows;
    last = line;
  }
  // n0 plus 10^4 dense rows plus log-spaced rows up to 10^6
  EXPECT_GT(rows, 10001);
  EXPECT_LT(rows, 20000);
  EXPECT_EQ(last.substr(0, last.find(',')), "1000005");
}

TEST_F(Cli, RunIsByteIdentical) {
  json d = load("triangle_asserted.json");
  d["budget"]["n_max"] = 20000;
  d["certify"] = false;
  const fs::path p = write_json("tri.json", d);
  ASSERT_EQ(tool("run '" + p.string() + "' --trace a.csv --certificate a.cert").code, 0);
  ASSERT_EQ(tool("run '" + p.string() + "' --trace b.csv --certificate b.cert").code, 0);
  const std::string a = slurp(dir_ / "a.csv");
  EXPECT_GT(a.size(), 100000u);
  EXPECT_EQ(a, slurp(dir_ / "b.csv"));
  EXPECT_EQ(slurp(dir_ / "a.cert"), slurp(dir_ / "b.cert"));
}

TEST_F(Cli, YamadaMatchesExplicitTrace) {
  ASSERT_EQ(tool("run '" + config("yamada.json") + "' --trace y.csv").code, 0);
  ASSERT_EQ(tool("run '" + config("yamada_explicit.json") + "' --trace e.csv").code, 0);
  const std::string y = slurp(dir_ / "y.csv");
  const std::string e = slurp(dir_ / "e.csv");
  ASSERT_FALSE(y.empty());
  EXPECT_EQ(y.substr(y.find('\n')), e.substr(e.find('\n')));
}

TEST_F(Cli, ImplicitPathRun) {
  const ToolResult r = tool("run '" + config("box_implicit.json") + "'");
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("termination = converged"), std::string::npos);
  EXPECT_LE(field(r.out, "vi_max_residual"), 1e-6);
}

TEST_F(Cli, RunRefusesUncertifiedSchedule) {
  json d = box_doc();
  d["schedule"] = {{"rule", "constant"}, {"value", 0.5}};
  d["output"] = {{"trace", "t.csv"}};
  const ToolResult r = tool("run '" + write_json("c.json", d).string() + "'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("α_n → 0 fails"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "t.csv"));
}

TEST_F(Cli, UncertifiedRunExitsOne) {
  json d = box_doc();
  d["budget"]["n_max"] = 10;
  const ToolResult r = tool("run '" + write_json("short.json", d).string() + "'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("certified = false"), std::string::npos);
}

TEST_F(Cli, LogVerbosityFromEnvironment) {
  const ToolResult quiet = tool("run '" + config("box_implicit.json") + "'");
  EXPECT_EQ(quiet.err.find("[vifix] info"), std::string::npos);
  const ToolResult loud = tool("run '" + config("box_implicit.json") + "'", "VIFIX_LOG=info");
  EXPECT_NE(loud.err.find("[vifix] info"), std::string::npos);
  EXPECT_EQ(loud.out, quiet.out);
}

// compare.

TEST_F(Cli, CompareSingleConfigIsUsageError) {
  EXPECT_EQ(tool("compare '" + config("box_explicit.json") + "'").code, 2);
}

TEST_F(Cli, CompareMismatchedInstances) {
  EXPECT_EQ(tool("compare '" + config("box_explicit.json") + "' '" + config("xu.json") + "'").code, 2);
  json d = load("box_explicit.json");
  d["u"] = {2, 0.6};
  const fs::path p = write_json("other.json", d);
  EXPECT_EQ(tool("compare '" + config("box_explicit.json") + "' '" + p.string() + "'").code, 2);
}

TEST_F(Cli, CompareImplicitExplicitBox) {
  const ToolResult r = tool("compare '" + config("box_implicit.json") + "' '" + config("box_explicit.json") + "'");
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_LE(field(r.out, "max_final_point_spread"), 2e-3);
  EXPECT_NE(r.out.find("implicit_path"), std::string::npos);
}

TEST_F(Cli, CompareRelaxedAndAssertedTriangle) {
  const ToolResult r =
      tool("compare '" + config("triangle_relaxed.json") + "' '" + config("triangle_asserted.json") + "'");
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  std::istringstream rows(r.out);
  std::string line;
  std::getline(rows, line);
  int certified = 0;
  while (std::getline(rows, line)) certified += line.find("\ttrue\t") != std::string::npos;
  EXPECT_EQ(certified, 2) << r.out;
}

// verify.

TEST_F(Cli, VerifyPoints) {
  write("good.txt", "1 0.5\n");
  write("bad.txt", "0.5 0.5\n");
  const ToolResult good = tool("verify '" + config("box_explicit.json") + "' good.txt");
  EXPECT_EQ(good.code, 0) << good.out << good.err;
  EXPECT_LE(field(good.out, "vi_max_residual"), 0.0);
  const ToolResult bad = tool("verify '" + config("box_explicit.json") + "' bad.txt");
  EXPECT_EQ(bad.code, 1);
  EXPECT_GT(field(bad.out, "vi_max_residual"), 0.0);
  EXPECT_EQ(tool("verify '" + config("box_explicit.json") + "' nowhere.txt").code, 2);
}

TEST_F(Cli, VerifyReadsCertificate) {
  ASSERT_EQ(tool("run '" + config("pseudocontractive.json") + "' --certificate pc.cert").code, 0);
  const ToolResult r = tool("verify '" + config("pseudocontractive.json") + "' pc.cert");
  EXPECT_EQ(r.code, 0) << r.out << r.err;
}
