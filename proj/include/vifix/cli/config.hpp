#pragma once

// Run configuration: JSON documents describing one problem instance, the
// scheme to run on it, and where to write the results.

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vifix/errors.hpp"
#include "vifix/operators.hpp"
#include "vifix/schedules.hpp"
#include "vifix/space.hpp"

namespace vifix::cli {

using json = nlohmann::json;

// Schema or cross-field violation; `path` names the offending field.
class SchemaError : public ConfigurationError {
 public:
  SchemaError(std::string path, const std::string& msg)
      : ConfigurationError((path.empty() ? std::string("<root>") : path) + ": " + msg), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class Scheme { implicit_path, explicit_halpern, yamada, xu, pseudocontractive };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::implicit_path: return "implicit_path";
    case Scheme::explicit_halpern: return "explicit";
    case Scheme::yamada: return "yamada";
    case Scheme::xu: return "xu";
    case Scheme::pseudocontractive: return "pseudocontractive";
  }
  return "unknown";
}

enum class Preprocess { none, relax, combine };

struct OperatorSpec {
  Map map;                           // the map as iterated (T_i, or the pseudocontraction itself)
  std::optional<double> k;           // pseudocontractions only
  std::optional<double> a;           // absolute averaging parameter
  std::optional<double> a_fraction;  // or a fraction of max_averaging_parameter
};

struct TPath {
  double t0 = 0.5;
  double factor = 0.5;
  int count = 20;
};

struct Budget {
  long long n_max = 1000000;
  double tol = 0.0;
};

struct CertifyOptions {
  bool enabled = true;
  int probes = 100;
  double tol_vi = 1e-6;
  std::optional<double> tol_fp;  // scheme default when unset
};

struct OutputPaths {
  std::string trace;
  std::string certificate;
};

struct RunConfig {
  std::string source;
  int dim = 0;
  double q = 2.0;
  std::vector<OperatorSpec> operators;
  Preprocess preprocess = Preprocess::none;
  std::vector<double> pre_weights;
  bool composition_asserted = false;
  std::optional<AccretiveOperator> accretive;
  Vec u;
  Vec x0;
  std::optional<double> lambda;  // nullopt = auto
  AlphaRule rule = ClippedPrototypeRule{0.0};
  std::optional<long long> n0;
  Certificate certificate = Certificate::smoothness;
  long long horizon = 1000000;
  Scheme scheme = Scheme::explicit_halpern;
  TPath t_path;
  Budget budget;
  std::uint64_t seed = 1;
  CertifyOptions certify;
  OutputPaths output;
  // space/operators/accretive/u/lambda as written; used to match instances.
  json instance;

  Space space() const { return Space(dim, q); }
  const AccretiveOperator& A() const { return *accretive; }
};

namespace detail {

class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& msg) const { throw SchemaError(path_, msg); }

  bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

  Node at(const char* key) const {
    if (!j_.is_object()) fail("expected an object");
    if (!j_.contains(key)) throw SchemaError(child(key), "missing required field");
    return Node(j_.at(key), child(key));
  }

  Node at(std::size_t i) const { return Node(j_.at(i), path_ + "[" + std::to_string(i) + "]"); }

  void only(std::initializer_list<const char*> keys) const {
    if (!j_.is_object()) fail("expected an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool known = false;
      for (const char* k : keys) known = known || it.key() == k;
      if (!known) throw SchemaError(child(it.key()), "unknown field");
    }
  }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    const double v = j_.get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  long long integer() const {
    if (j_.is_number_integer()) return j_.get<long long>();
    if (j_.is_number_float()) {
      const double v = j_.get<double>();
      if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) return static_cast<long long>(v);
    }
    fail("expected an integer");
  }

  bool boolean() const {
    if (!j_.is_boolean()) fail("expected true or false");
    return j_.get<bool>();
  }

  std::string string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }

  std::size_t size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }

  std::vector<double> numbers() const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i).number();
    return out;
  }

  Vec vec(int dim) const {
    const auto v = numbers();
    if (static_cast<int>(v.size()) != dim) fail("expected " + std::to_string(dim) + " entries");
    return Eigen::Map<const Vec>(v.data(), dim);
  }

  // Accepts +-inf spelled as the strings "inf" / "-inf".
  Vec bound_vec(int dim) const {
    if (static_cast<int>(size()) != dim) fail("expected " + std::to_string(dim) + " entries");
    Vec out(dim);
    for (int i = 0; i < dim; ++i) {
      const Node e = at(static_cast<std::size_t>(i));
      if (e.raw().is_string()) {
        const std::string s = e.string();
        if (s == "inf") out[i] = std::numeric_limits<double>::infinity();
        else if (s == "-inf") out[i] = -std::numeric_limits<double>::infinity();
        else e.fail("expected a number, \"inf\" or \"-inf\"");
      } else {
        out[i] = e.number();
      }
    }
    return out;
  }

  Mat matrix(int dim) const {
    if (static_cast<int>(size()) != dim) fail("expected " + std::to_string(dim) + " rows");
    Mat M(dim, dim);
    for (int i = 0; i < dim; ++i) M.row(i) = at(static_cast<std::size_t>(i)).vec(dim).transpose();
    return M;
  }

 private:
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
};

// Library validation errors raised while building a value are re-tagged
// with the field that produced them.
template <class F>
auto at_path(const Node& n, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const SchemaError&) {
    throw;
  } catch (const ConfigurationError& e) {
    n.fail(e.what());
  } catch (const ParameterError& e) {
    n.fail(e.what());
  } catch (const ContractViolation& e) {
    n.fail(e.what());
  }
}

inline Shape parse_shape(const Node& n, const std::string& type, int dim) {
  if (type == "project_box") {
    n.only({"type", "lo", "hi"});
    return Box{n.at("lo").bound_vec(dim), n.at("hi").bound_vec(dim)};
  }
  if (type == "project_ball") {
    n.only({"type", "center", "radius"});
    return Ball{n.at("center").vec(dim), n.at("radius").number()};
  }
  n.only({"type", "normal", "offset"});
  return Halfspace{n.at("normal").vec(dim), n.at("offset").number()};
}

inline Map parse_map(const Node& n, int dim) {
  const std::string type = n.at("type").string();
  return at_path(n, [&]() -> Map {
    if (type == "project_box" || type == "project_ball" || type == "project_halfspace") {
      Shape s = parse_shape(n, type, dim);
      validate_shape(s);
      return Map::projection(std::move(s));
    }
    if (type == "identity") {
      n.only({"type"});
      return Map::identity(dim);
    }
    if (type == "isometry") {
      n.only({"type", "matrix", "shift"});
      const Vec shift = n.has("shift") ? n.at("shift").vec(dim) : Vec::Zero(dim);
      return Map::isometry(n.at("matrix").matrix(dim), shift);
    }
    n.at("type").fail("unknown operator type '" + type + "'");
  });
}

inline OperatorSpec parse_operator(const Node& n, int dim) {
  if (!n.raw().is_object()) n.fail("expected an operator object");
  const std::string type = n.at("type").string();
  if (type != "pseudocontraction") return OperatorSpec{parse_map(n, dim), {}, {}, {}};
  n.only({"type", "k", "of", "a", "a_fraction"});
  OperatorSpec out{Map::identity(dim), n.at("k").number(), {}, {}};
  if (n.has("a") == n.has("a_fraction")) n.fail("exactly one of 'a' or 'a_fraction' is required");
  if (n.has("a")) out.a = n.at("a").number();
  if (n.has("a_fraction")) {
    out.a_fraction = n.at("a_fraction").number();
    if (!(*out.a_fraction > 0.0 && *out.a_fraction < 1.0)) n.at("a_fraction").fail("must lie in (0,1)");
  }
  const Node base = n.at("of");
  const Map P = parse_map(base, dim);
  out.map = at_path(n.at("k"), [&] { return synthesize_pseudocontraction(P, *out.k).map; });
  return out;
}

inline AccretiveOperator parse_accretive(const Node& n, int dim) {
  const std::string type = n.at("type").string();
  return at_path(n, [&]() -> AccretiveOperator {
    if (type == "identity_scaled") {
      n.only({"type", "eta"});
      return AccretiveOperator::scaled_identity(dim, n.has("eta") ? n.at("eta").number() : 1.0);
    }
    if (type == "linear_spd") {
      n.only({"type", "matrix", "eta", "L"});
      return AccretiveOperator::linear_spd(n.at("matrix").matrix(dim), n.at("eta").number(), n.at("L").number());
    }
    if (type == "diagonal_monotone") {
      n.only({"type", "slope", "bend", "offset", "eta", "L"});
      const Vec offset = n.has("offset") ? n.at("offset").vec(dim) : Vec::Zero(dim);
      return AccretiveOperator::diagonal_monotone(n.at("slope").vec(dim), n.at("bend").vec(dim), offset,
                                                  n.at("eta").number(), n.at("L").number());
    }
    n.at("type").fail("unknown accretive type '" + type + "'");
  });
}

inline Vec random_anchor(int dim, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Vec out(dim);
  for (int i = 0; i < dim; ++i) out[i] = dist(rng);
  return out;
}

inline Vec parse_point(const Node& n, int dim, std::uint64_t seed) {
  if (n.raw().is_string()) {
    if (n.string() != "zero") n.fail("expected a vector, \"zero\" or {\"random\": {...}}");
    return Vec::Zero(dim);
  }
  if (n.raw().is_object()) {
    n.only({"random"});
    const Node r = n.at("random");
    r.only({"lo", "hi"});
    const double lo = r.at("lo").number();
    const double hi = r.at("hi").number();
    if (!(lo < hi)) r.fail("require lo < hi");
    return random_anchor(dim, lo, hi, seed);
  }
  return n.vec(dim);
}

inline void parse_schedule(const Node& n, RunConfig& cfg) {
  n.only({"rule", "cap", "c", "rho", "value", "n0", "certificate", "horizon"});
  const std::string rule = n.has("rule") ? n.at("rule").string() : "clipped_prototype";
  auto reject = [&](std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
      if (n.has(k)) n.at(k).fail("not a parameter of rule '" + rule + "'");
    }
  };
  if (rule == "prototype") {
    reject({"cap", "c", "rho", "value"});
    cfg.rule = PrototypeRule{};
  } else if (rule == "clipped_prototype") {
    reject({"c", "rho", "value"});
    const double cap = n.has("cap") ? n.at("cap").number() : 0.0;
    if (n.has("cap") && !(cap > 0.0)) n.at("cap").fail("must be > 0");
    cfg.rule = ClippedPrototypeRule{cap};
  } else if (rule == "power") {
    reject({"cap", "value"});
    const double c = n.at("c").number();
    const double rho = n.at("rho").number();
    if (!(c > 0.0)) n.at("c").fail("must be > 0");
    if (!(rho > 0.0)) n.at("rho").fail("must be > 0");
    cfg.rule = PowerRule{c, rho};
  } else if (rule == "constant") {
    reject({"cap", "c", "rho"});
    const double v = n.at("value").number();
    if (!(v > 0.0)) n.at("value").fail("must be > 0");
    cfg.rule = ConstantRule{v};
  } else {
    n.at("rule").fail("unknown rule '" + rule + "'");
  }
  if (n.has("n0")) {
    cfg.n0 = n.at("n0").integer();
    if (*cfg.n0 < 1) n.at("n0").fail("must be >= 1");
  }
  if (n.has("certificate")) {
    const std::string c = n.at("certificate").string();
    if (c == "smoothness") cfg.certificate = Certificate::smoothness;
    else if (c == "spectral") cfg.certificate = Certificate::spectral;
    else n.at("certificate").fail("expected \"smoothness\" or \"spectral\"");
  }
  if (n.has("horizon")) {
    cfg.horizon = n.at("horizon").integer();
    if (cfg.horizon < 1000) n.at("horizon").fail("must be >= 1000");
  }
}

inline Scheme parse_scheme(const Node& n) {
  const std::string s = n.string();
  if (s == "implicit_path") return Scheme::implicit_path;
  if (s == "explicit") return Scheme::explicit_halpern;
  if (s == "yamada") return Scheme::yamada;
  if (s == "xu") return Scheme::xu;
  if (s == "pseudocontractive") return Scheme::pseudocontractive;
  n.fail("unknown scheme '" + s + "'");
}

inline void cross_check(const Node& root, RunConfig& cfg) {
  const bool pseudo = cfg.scheme == Scheme::pseudocontractive;
  for (std::size_t i = 0; i < cfg.operators.size(); ++i) {
    const bool is_pc = cfg.operators[i].k.has_value();
    if (is_pc != pseudo) {
      root.at("operators").at(i).at("type").fail(pseudo ? "the pseudocontractive scheme takes only pseudocontraction operators"
                                                         : "pseudocontraction operators require scheme \"pseudocontractive\"");
    }
  }
  const Space space = cfg.space();
  for (std::size_t i = 0; i < cfg.operators.size(); ++i) {
    const Node op = root.at("operators").at(i);
    at_path(op, [&] {
      cfg.operators[i].map.validate_for(space);
      return 0;
    });
  }
  at_path(root.at("accretive"), [&] {
    cfg.accretive->validate_for(space);
    return 0;
  });
  if (cfg.preprocess == Preprocess::combine && pseudo) {
    root.at("preprocessing").fail("combine is not available for the pseudocontractive scheme");
  }
  if (cfg.scheme == Scheme::xu) {
    if (!space.is_hilbert()) root.at("space").at("q").fail("scheme xu requires q = 2");
    if (!cfg.accretive->is_linear_spd()) root.at("accretive").fail("scheme xu requires a linear SPD operator");
    if (cfg.lambda && *cfg.lambda != 1.0) root.at("lambda").fail("scheme xu has lambda = 1");
    cfg.lambda = 1.0;
    if (root.has("schedule") && root.at("schedule").has("certificate") && cfg.certificate != Certificate::spectral) {
      root.at("schedule").at("certificate").fail("scheme xu is certified spectrally");
    }
    cfg.certificate = Certificate::spectral;
  }
  if (cfg.scheme == Scheme::yamada) {
    if (cfg.u.cwiseAbs().maxCoeff() != 0.0) root.at("u").fail("scheme yamada has no anchor; u must be zero");
    if (cfg.preprocess == Preprocess::relax) root.at("preprocessing").fail("scheme yamada iterates a single map");
    if (cfg.operators.size() > 1 && cfg.preprocess != Preprocess::combine) {
      root.at("operators").fail("scheme yamada needs one operator or a convex combination");
    }
    if (cfg.certificate == Certificate::spectral) root.at("schedule").at("certificate").fail("yamada uses the smoothness bound");
  }
  if (cfg.certificate == Certificate::spectral) {
    if (!space.is_hilbert()) root.at("schedule").at("certificate").fail("spectral certificate requires q = 2");
    if (!cfg.accretive->is_linear_spd()) {
      root.at("schedule").at("certificate").fail("spectral certificate requires a linear SPD operator");
    }
    if (!cfg.lambda) root.at("lambda").fail("spectral certificate needs a numeric lambda");
  }
  if (cfg.scheme == Scheme::implicit_path && cfg.operators.size() > 1 && cfg.preprocess == Preprocess::none &&
      !cfg.composition_asserted) {
    root.at("preprocessing").fail("multi-member implicit path needs relax, combine or composition_asserted");
  }
  if ((cfg.scheme == Scheme::explicit_halpern || cfg.scheme == Scheme::xu || pseudo) && cfg.operators.size() > 1 &&
      cfg.preprocess == Preprocess::none && !cfg.composition_asserted) {
    root.at("preprocessing").fail("multi-member cyclic scheme needs relax or composition_asserted");
  }
}

}  // namespace detail

inline RunConfig parse_config(const json& doc, std::string source = {}) {
  using detail::Node;
  const Node root(doc, "");
  root.only({"space", "operators", "preprocessing", "composition_asserted", "accretive", "u", "lambda", "schedule",
             "scheme", "x0", "t_path", "budget", "seed", "certify", "output"});
  RunConfig cfg;
  cfg.source = std::move(source);

  const Node sp = root.at("space");
  sp.only({"dim", "q"});
  const long long dim = sp.at("dim").integer();
  if (dim < 1 || dim > 64) sp.at("dim").fail("must lie in [1, 64]");
  cfg.dim = static_cast<int>(dim);
  cfg.q = sp.has("q") ? sp.at("q").number() : 2.0;
  detail::at_path(sp.has("q") ? sp.at("q") : sp, [&] { return cfg.space(); });

  if (root.has("seed")) {
    const long long s = root.at("seed").integer();
    if (s < 0) root.at("seed").fail("must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(s);
  }

  cfg.scheme = root.has("scheme") ? detail::parse_scheme(root.at("scheme")) : Scheme::explicit_halpern;

  const Node ops = root.at("operators");
  if (ops.size() == 0) ops.fail("at least one operator required");
  for (std::size_t i = 0; i < ops.size(); ++i) cfg.operators.push_back(detail::parse_operator(ops.at(i), cfg.dim));

  if (root.has("preprocessing")) {
    const Node pre = root.at("preprocessing");
    if (pre.raw().is_string()) {
      if (pre.string() != "none") pre.fail("expected \"none\" or an object with 'relax' or 'combine'");
    } else {
      pre.only({"relax", "combine"});
      if (pre.has("relax") == pre.has("combine")) pre.fail("exactly one of 'relax' or 'combine'");
      const Node w = pre.has("relax") ? pre.at("relax") : pre.at("combine");
      cfg.preprocess = pre.has("relax") ? Preprocess::relax : Preprocess::combine;
      cfg.pre_weights = w.numbers();
      if (cfg.pre_weights.size() != cfg.operators.size()) w.fail("one weight per operator required");
      Family probe;
      for (const auto& op : cfg.operators) probe.members.push_back(op.map);
      if (cfg.preprocess == Preprocess::relax) probe.relax_weights = cfg.pre_weights;
      else probe.combine_weights = cfg.pre_weights;
      detail::at_path(w, [&] {
        probe.validate();
        return 0;
      });
    }
  }
  if (root.has("composition_asserted")) cfg.composition_asserted = root.at("composition_asserted").boolean();

  cfg.accretive = detail::parse_accretive(root.at("accretive"), cfg.dim);

  cfg.u = root.has("u") ? detail::parse_point(root.at("u"), cfg.dim, cfg.seed) : Vec::Zero(cfg.dim);
  cfg.x0 = root.has("x0") ? detail::parse_point(root.at("x0"), cfg.dim, cfg.seed + 1) : Vec::Zero(cfg.dim);

  if (root.has("lambda")) {
    const Node l = root.at("lambda");
    if (l.raw().is_string()) {
      if (l.string() != "auto") l.fail("expected a number or \"auto\"");
    } else {
      cfg.lambda = l.number();
    }
  }

  if (root.has("schedule")) detail::parse_schedule(root.at("schedule"), cfg);

  if (root.has("t_path")) {
    const Node t = root.at("t_path");
    t.only({"t0", "factor", "count"});
    if (t.has("t0")) cfg.t_path.t0 = t.at("t0").number();
    if (t.has("factor")) cfg.t_path.factor = t.at("factor").number();
    if (t.has("count")) cfg.t_path.count = static_cast<int>(t.at("count").integer());
    if (!(cfg.t_path.factor > 0.0 && cfg.t_path.factor < 1.0)) t.at("factor").fail("must lie in (0,1)");
    if (cfg.t_path.count < 1 || cfg.t_path.count > 1000) t.at("count").fail("must lie in [1, 1000]");
  }

  if (cfg.scheme == Scheme::implicit_path) cfg.budget = Budget{1000000, 1e-12};
  if (root.has("budget")) {
    const Node b = root.at("budget");
    b.only({"n_max", "tol"});
    if (b.has("n_max")) cfg.budget.n_max = b.at("n_max").integer();
    if (b.has("tol")) cfg.budget.tol = b.at("tol").number();
    if (cfg.budget.n_max < 1) b.at("n_max").fail("must be >= 1");
    if (cfg.budget.tol < 0.0) b.at("tol").fail("must be >= 0");
    if (cfg.scheme == Scheme::implicit_path && !(cfg.budget.tol > 0.0)) b.at("tol").fail("implicit path needs tol > 0");
    if (cfg.scheme == Scheme::yamada && cfg.budget.tol != 0.0) b.at("tol").fail("scheme yamada runs a fixed count");
    if (cfg.scheme == Scheme::xu && cfg.budget.tol != 0.0) b.at("tol").fail("scheme xu runs a fixed count");
  }

  if (root.has("certify")) {
    const Node c = root.at("certify");
    if (c.raw().is_boolean()) {
      cfg.certify.enabled = c.boolean();
    } else {
      c.only({"enabled", "probes", "tol_vi", "tol_fp"});
      if (c.has("enabled")) cfg.certify.enabled = c.at("enabled").boolean();
      if (c.has("probes")) cfg.certify.probes = static_cast<int>(c.at("probes").integer());
      if (c.has("tol_vi")) cfg.certify.tol_vi = c.at("tol_vi").number();
      if (c.has("tol_fp")) cfg.certify.tol_fp = c.at("tol_fp").number();
      if (cfg.certify.probes < 1) c.at("probes").fail("must be >= 1");
    }
  }

  if (root.has("output")) {
    const Node o = root.at("output");
    o.only({"trace", "certificate"});
    if (o.has("trace")) cfg.output.trace = o.at("trace").string();
    if (o.has("certificate")) cfg.output.certificate = o.at("certificate").string();
  }

  detail::cross_check(root, cfg);

  cfg.instance = json::object();
  cfg.instance["space"] = doc.at("space");
  cfg.instance["operators"] = doc.at("operators");
  cfg.instance["accretive"] = doc.at("accretive");
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("", "cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("malformed JSON in '") + path + "': " + e.what());
  }
  return parse_config(doc, path);
}

}  // namespace vifix::cli
