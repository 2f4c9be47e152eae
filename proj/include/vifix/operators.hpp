#pragma once

// Declarative operator catalog.
//
// Maps are immutable trees built from a handful of leaves (identity,
// Euclidean projections, affine isometries) and three combinators:
//   blend(T, a)        = (1 - a) I + a T   (averaging, relaxation, synthesis)
//   combination(T, s)  = sum_i s_i T_i
//   composition(T)     = T_r o ... o T_1
// Accretive operators carry their declared constants (eta, L) and are
// checked against them at construction where that is decidable, and by
// sampling otherwise.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "vifix/errors.hpp"
#include "vifix/space.hpp"

namespace vifix {

// ---------------------------------------------------------------------------
// Closed convex shapes and their Euclidean projections.

struct Box {
  Vec lo;
  Vec hi;
};

struct Ball {
  Vec center;
  double radius;
};

// { x : <normal, x> <= offset }
struct Halfspace {
  Vec normal;
  double offset;
};

using Shape = std::variant<Box, Ball, Halfspace>;

inline int shape_dim(const Shape& s) {
  return std::visit(
      [](const auto& v) -> int {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Box>) return static_cast<int>(v.lo.size());
        if constexpr (std::is_same_v<T, Ball>) return static_cast<int>(v.center.size());
        if constexpr (std::is_same_v<T, Halfspace>) return static_cast<int>(v.normal.size());
      },
      s);
}

inline void validate_shape(const Shape& s) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Box>) {
          if (v.lo.size() != v.hi.size()) throw ConfigurationError("box: lo/hi dimension mismatch");
          for (Eigen::Index i = 0; i < v.lo.size(); ++i) {
            if (std::isnan(v.lo[i]) || std::isnan(v.hi[i]) || v.lo[i] > v.hi[i]) {
              throw ConfigurationError("box: require lo <= hi componentwise");
            }
          }
        } else if constexpr (std::is_same_v<T, Ball>) {
          if (!(v.radius > 0.0) || !std::isfinite(v.radius)) {
            throw ConfigurationError("ball: radius must be positive and finite");
          }
          if (!v.center.allFinite()) throw ConfigurationError("ball: center must be finite");
        } else {
          if (!v.normal.allFinite() || !std::isfinite(v.offset)) {
            throw ConfigurationError("halfspace: normal and offset must be finite");
          }
          if (v.normal.squaredNorm() == 0.0) throw ConfigurationError("halfspace: normal must be nonzero");
        }
      },
      s);
}

inline Vec project(const Shape& s, const Vec& x) {
  return std::visit(
      [&x](const auto& v) -> Vec {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Box>) {
          return x.cwiseMax(v.lo).cwiseMin(v.hi);
        } else if constexpr (std::is_same_v<T, Ball>) {
          const Vec off = x - v.center;
          const double r = off.norm();
          if (r <= v.radius) return x;
          return v.center + (v.radius / r) * off;
        } else {
          const double excess = v.normal.dot(x) - v.offset;
          if (excess <= 0.0) return x;
          return x - (excess / v.normal.squaredNorm()) * v.normal;
        }
      },
      s);
}

// Signed violation: <= 0 inside, > 0 outside (Euclidean distance-like).
inline double violation(const Shape& s, const Vec& x) {
  return std::visit(
      [&x](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Box>) {
          return std::max((v.lo - x).maxCoeff(), (x - v.hi).maxCoeff());
        } else if constexpr (std::is_same_v<T, Ball>) {
          return (x - v.center).norm() - v.radius;
        } else {
          return (v.normal.dot(x) - v.offset) / v.normal.norm();
        }
      },
      s);
}

// ---------------------------------------------------------------------------
// Nonexpansive maps.

class Map;

struct IdentityMap {};

struct ProjectionMap {
  Shape shape;
};

// x -> Q x + shift
struct IsometryMap {
  Mat Q;
  Vec shift;
};

// x -> (1 - weight) x + weight * base(x)
struct BlendMap;

// x -> sum_i weights_i * members_i(x)
struct CombinationMap;

// x -> members_r(... members_1(x)); members[0] acts first.
struct CompositionMap;

class Map {
 public:
  struct Node;

  static Map identity(int dim);
  static Map projection(Shape shape);
  static Map isometry(Mat Q, Vec shift);
  // Unchecked for the sign of `weight` beyond > 0; see average() and relax().
  static Map blend(Map base, double weight);
  static Map combination(std::vector<Map> members, std::vector<double> weights);
  static Map composition(std::vector<Map> members);

  int dim() const { return dim_; }
  // True when some leaf is a Euclidean projection (valid only for q = 2).
  bool euclidean_only() const { return euclidean_only_; }
  const Node& node() const { return *node_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

  // Throws ConfigurationError when the map is not nonexpansive-by-construction
  // in `space` (projections with q != 2, non-permutation isometries with q != 2).
  void validate_for(const Space& space) const;

  // Unchecked evaluation; callers validate once up front.
  Vec operator()(const Vec& x) const;

  Vec apply(const Space& space, const Vec& x) const {
    validate_for(space);
    space.check(x);
    return (*this)(x);
  }

  std::string describe() const;

 private:
  explicit Map(std::shared_ptr<const Node> node, int dim, bool euclid)
      : node_(std::move(node)), dim_(dim), euclidean_only_(euclid) {}

  std::shared_ptr<const Node> node_;
  int dim_ = 0;
  bool euclidean_only_ = false;
  std::vector<std::string> warnings_;
};

struct BlendMap {
  Map base;
  double weight;
};

struct CombinationMap {
  std::vector<Map> members;
  std::vector<double> weights;
};

struct CompositionMap {
  std::vector<Map> members;
};

struct Map::Node {
  std::variant<IdentityMap, ProjectionMap, IsometryMap, BlendMap, CombinationMap, CompositionMap> v;
};

inline Map Map::identity(int dim) {
  if (dim < 1) throw ConfigurationError("identity: dim must be >= 1");
  return Map(std::make_shared<Node>(Node{IdentityMap{}}), dim, false);
}

inline Map Map::projection(Shape shape) {
  validate_shape(shape);
  const int d = shape_dim(shape);
  return Map(std::make_shared<Node>(Node{ProjectionMap{std::move(shape)}}), d, true);
}

inline Map Map::isometry(Mat Q, Vec shift) {
  if (Q.rows() != Q.cols() || Q.rows() != shift.size()) {
    throw ConfigurationError("affine_isometry: Q must be square and match shift");
  }
  if (!Q.allFinite() || !shift.allFinite()) throw ConfigurationError("affine_isometry: non-finite entries");
  const Mat gram = Q.transpose() * Q;
  if ((gram - Mat::Identity(Q.rows(), Q.cols())).cwiseAbs().maxCoeff() > 1e-10) {
    throw ConfigurationError("affine_isometry: Q is not orthogonal within 1e-10");
  }
  const int d = static_cast<int>(Q.rows());
  return Map(std::make_shared<Node>(Node{IsometryMap{std::move(Q), std::move(shift)}}), d, false);
}

inline Map Map::blend(Map base, double weight) {
  if (!(weight > 0.0) || !std::isfinite(weight)) {
    throw ParameterError("blend: weight must be positive and finite");
  }
  const int d = base.dim();
  const bool e = base.euclidean_only();
  return Map(std::make_shared<Node>(Node{BlendMap{std::move(base), weight}}), d, e);
}

inline Map Map::combination(std::vector<Map> members, std::vector<double> weights) {
  if (members.empty()) throw ConfigurationError("combination: no members");
  if (members.size() != weights.size()) throw ConfigurationError("combination: weight count mismatch");
  double sum = 0.0;
  bool e = false;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (!(weights[i] > 0.0 && weights[i] <= 1.0)) {
      throw ConfigurationError("combination: weights must lie in (0,1]");
    }
    if (members[i].dim() != members[0].dim()) throw ConfigurationError("combination: dimension mismatch");
    sum += weights[i];
    e = e || members[i].euclidean_only();
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "combination: weights sum to " << sum << ", expected 1 within 1e-12";
    throw ConfigurationError(os.str());
  }
  const int d = members[0].dim();
  return Map(std::make_shared<Node>(Node{CombinationMap{std::move(members), std::move(weights)}}), d, e);
}

inline Map Map::composition(std::vector<Map> members) {
  if (members.empty()) throw ConfigurationError("composition: no members");
  bool e = false;
  for (const auto& m : members) {
    if (m.dim() != members[0].dim()) throw ConfigurationError("composition: dimension mismatch");
    e = e || m.euclidean_only();
  }
  if (members.size() == 1) return members[0];
  const int d = members[0].dim();
  return Map(std::make_shared<Node>(Node{CompositionMap{std::move(members)}}), d, e);
}

namespace detail {

inline bool is_signed_permutation(const Mat& Q) {
  for (Eigen::Index r = 0; r < Q.rows(); ++r) {
    int nonzero = 0;
    for (Eigen::Index c = 0; c < Q.cols(); ++c) {
      const double a = std::abs(Q(r, c));
      if (a > 1e-12) {
        if (std::abs(a - 1.0) > 1e-12) return false;
        ++nonzero;
      }
    }
    if (nonzero != 1) return false;
  }
  return true;
}

}  // namespace detail

inline void Map::validate_for(const Space& space) const {
  if (dim_ != space.dim()) {
    std::ostringstream os;
    os << "map has dimension " << dim_ << ", space has " << space.dim();
    throw ContractViolation(os.str());
  }
  if (euclidean_only_ && !space.is_hilbert()) {
    throw ConfigurationError("projection operators are valid only in the q = 2 space");
  }
  if (space.is_hilbert()) return;
  std::visit(
      [&space](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, IsometryMap>) {
          if (!detail::is_signed_permutation(v.Q)) {
            throw ConfigurationError("affine_isometry: for q != 2, Q must be a signed permutation");
          }
        } else if constexpr (std::is_same_v<T, BlendMap>) {
          v.base.validate_for(space);
        } else if constexpr (std::is_same_v<T, CombinationMap> || std::is_same_v<T, CompositionMap>) {
          for (const auto& m : v.members) m.validate_for(space);
        }
      },
      node_->v);
}

inline Vec Map::operator()(const Vec& x) const {
  return std::visit(
      [&x](const auto& v) -> Vec {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, IdentityMap>) {
          return x;
        } else if constexpr (std::is_same_v<T, ProjectionMap>) {
          return project(v.shape, x);
        } else if constexpr (std::is_same_v<T, IsometryMap>) {
          return v.Q * x + v.shift;
        } else if constexpr (std::is_same_v<T, BlendMap>) {
          return (1.0 - v.weight) * x + v.weight * v.base(x);
        } else if constexpr (std::is_same_v<T, CombinationMap>) {
          Vec acc = v.weights[0] * v.members[0](x);
          for (std::size_t i = 1; i < v.members.size(); ++i) acc += v.weights[i] * v.members[i](x);
          return acc;
        } else {
          Vec y = v.members[0](x);
          for (std::size_t i = 1; i < v.members.size(); ++i) y = v.members[i](y);
          return y;
        }
      },
      node_->v);
}

inline std::string Map::describe() const {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, IdentityMap>) {
          return "identity";
        } else if constexpr (std::is_same_v<T, ProjectionMap>) {
          return std::visit(
              [](const auto& s) -> std::string {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, Box>) return "projection_box";
                if constexpr (std::is_same_v<S, Ball>) return "projection_ball";
                if constexpr (std::is_same_v<S, Halfspace>) return "projection_halfspace";
              },
              v.shape);
        } else if constexpr (std::is_same_v<T, IsometryMap>) {
          return "affine_isometry";
        } else if constexpr (std::is_same_v<T, BlendMap>) {
          std::ostringstream os;
          os << "blend(" << v.weight << ", " << v.base.describe() << ")";
          return os.str();
        } else {
          std::string out = std::is_same_v<T, CombinationMap> ? "combination(" : "composition(";
          for (std::size_t i = 0; i < v.members.size(); ++i) {
            if (i) out += ", ";
            out += v.members[i].describe();
          }
          return out + ")";
        }
      },
      node_->v);
}

// ---------------------------------------------------------------------------
// Strongly accretive operators.

// A = eta * I
struct ScaledIdentity {
  double eta;
};

// A x = M x with M symmetric positive definite (q = 2 only).
struct LinearSpd {
  Mat M;
};

// (A x)_i = slope_i * x_i + bend_i * tanh(x_i) + offset_i.
// Each coordinate function is increasing with derivative in
// (slope_i, slope_i + bend_i], which makes A strongly accretive with
// eta = min slope and L = max(slope + bend) in every l_q.
struct DiagonalMonotone {
  Vec slope;
  Vec bend;
  Vec offset;
};

class AccretiveOperator {
 public:
  using Variant = std::variant<ScaledIdentity, LinearSpd, DiagonalMonotone>;

  static AccretiveOperator scaled_identity(int dim, double eta) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigurationError("identity_scaled: eta must be > 0");
    return AccretiveOperator(ScaledIdentity{eta}, dim, eta, eta);
  }

  // Checks symmetry, smallest eigenvalue >= eta and spectral norm <= L.
  static AccretiveOperator linear_spd(Mat M, double eta, double L) {
    if (M.rows() != M.cols() || M.rows() == 0) throw ConfigurationError("linear_spd: M must be square");
    if (!M.allFinite()) throw ConfigurationError("linear_spd: non-finite entries");
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw ConfigurationError("linear_spd: M is not symmetric");
    }
    check_constants(eta, L);
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
    if (lo < eta * (1.0 - 1e-12)) {
      std::ostringstream os;
      os << "linear_spd: smallest eigenvalue " << lo << " below declared eta " << eta;
      throw ConfigurationError(os.str());
    }
    if (hi > L * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "linear_spd: spectral norm " << hi << " above declared L " << L;
      throw ConfigurationError(os.str());
    }
    const int d = static_cast<int>(M.rows());
    return AccretiveOperator(LinearSpd{std::move(M)}, d, eta, L);
  }

  static AccretiveOperator diagonal_monotone(Vec slope, Vec bend, Vec offset, double eta, double L) {
    const auto d = slope.size();
    if (d == 0 || bend.size() != d || offset.size() != d) {
      throw ConfigurationError("diagonal_monotone: slope/bend/offset dimension mismatch");
    }
    if (!slope.allFinite() || !bend.allFinite() || !offset.allFinite()) {
      throw ConfigurationError("diagonal_monotone: non-finite entries");
    }
    if ((slope.array() <= 0.0).any()) throw ConfigurationError("diagonal_monotone: slopes must be > 0");
    if ((bend.array() < 0.0).any()) throw ConfigurationError("diagonal_monotone: bends must be >= 0");
    check_constants(eta, L);
    if (eta > slope.minCoeff() * (1.0 + 1e-12)) {
      throw ConfigurationError("diagonal_monotone: declared eta exceeds the smallest slope");
    }
    if (L < (slope + bend).maxCoeff() * (1.0 - 1e-12)) {
      throw ConfigurationError("diagonal_monotone: declared L below max(slope + bend)");
    }
    return AccretiveOperator(DiagonalMonotone{std::move(slope), std::move(bend), std::move(offset)},
                             static_cast<int>(d), eta, L);
  }

  // lambda * A, strongly accretive with constant lambda * eta.
  AccretiveOperator scaled(double lambda) const {
    if (!(lambda > 0.0)) throw ParameterError("scaled: lambda must be > 0");
    AccretiveOperator out = *this;
    out.factor_ *= lambda;
    out.eta_ *= lambda;
    out.L_ *= lambda;
    return out;
  }

  int dim() const { return dim_; }
  double eta() const { return eta_; }
  double L() const { return L_; }
  bool is_linear_spd() const { return std::holds_alternative<LinearSpd>(op_) || std::holds_alternative<ScaledIdentity>(op_); }
  bool euclidean_only() const { return std::holds_alternative<LinearSpd>(op_); }
  const Variant& variant() const { return op_; }
  std::string name() const {
    if (std::holds_alternative<ScaledIdentity>(op_)) return "identity_scaled";
    if (std::holds_alternative<LinearSpd>(op_)) return "linear_spd";
    return "diagonal_monotone";
  }

  void validate_for(const Space& space) const {
    if (dim_ != space.dim()) throw ContractViolation("accretive operator dimension mismatch");
    if (euclidean_only() && !space.is_hilbert()) {
      throw ConfigurationError("linear_spd accretive operators are valid only for q = 2");
    }
  }

  Vec operator()(const Vec& x) const {
    return std::visit(
        [this, &x](const auto& v) -> Vec {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, ScaledIdentity>) {
            return (factor_ * v.eta) * x;
          } else if constexpr (std::is_same_v<T, LinearSpd>) {
            if (factor_ == 1.0) return v.M * x;
            return factor_ * (v.M * x);
          } else {
            Vec out(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) {
              out[i] = v.slope[i] * x[i] + v.bend[i] * std::tanh(x[i]) + v.offset[i];
            }
            if (factor_ != 1.0) out *= factor_;
            return out;
          }
        },
        op_);
  }

  Vec apply(const Space& space, const Vec& x) const {
    validate_for(space);
    space.check(x);
    return (*this)(x);
  }

 private:
  AccretiveOperator(Variant op, int dim, double eta, double L)
      : op_(std::move(op)), dim_(dim), eta_(eta), L_(L) {}

  static void check_constants(double eta, double L) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigurationError("accretive: eta must be > 0");
    if (!(L >= eta) || !std::isfinite(L)) throw ConfigurationError("accretive: require 0 < eta <= L");
  }

  Variant op_;
  int dim_;
  double eta_;
  double L_;
  double factor_ = 1.0;
};

// min over sampled pairs of <Ax - Ay, j_s(x - y)> - eta ||x - y||^s with
// s = space.smooth_exponent(). Certified descriptors give >= -1e-9.
inline double accretivity_defect(const AccretiveOperator& A, const Space& space, int sample_count,
                                 std::uint64_t seed = 0x5eed) {
  if (sample_count < 1) throw ParameterError("accretivity_defect: sample_count must be >= 1");
  A.validate_for(space);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> logscale(-1.0, 1.0);
  const double s = space.smooth_exponent();
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < sample_count; ++k) {
    Vec x(space.dim()), y(space.dim());
    const double sx = std::pow(10.0, logscale(rng));
    const double sy = std::pow(10.0, logscale(rng));
    for (int i = 0; i < space.dim(); ++i) {
      x[i] = sx * gauss(rng);
      y[i] = sy * gauss(rng);
    }
    const Vec diff = x - y;
    if (diff.isZero(0.0)) continue;
    const double lhs = pairing(duality_map(space, diff, s), A(x) - A(y));
    const double rhs = A.eta() * std::pow(norm(space, diff), s);
    worst = std::min(worst, lhs - rhs);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Strict pseudocontractions and averaging.

// (s k^{s-1} / d)^{1/(s-1)}: averaging parameters below this make
// (1 - a) I + a T nonexpansive for a k-strict pseudocontraction T.
inline double max_averaging_parameter(double s, double k, double d) {
  if (!(s > 1.0)) throw ParameterError("max_averaging_parameter: exponent must be > 1");
  if (!(k > 0.0 && k < 1.0)) throw ParameterError("max_averaging_parameter: k must lie in (0,1)");
  if (!(d > 0.0)) throw ParameterError("max_averaging_parameter: d must be > 0");
  return std::pow(s * std::pow(k, s - 1.0) / d, 1.0 / (s - 1.0));
}

inline double max_averaging_parameter(const Space& space, double k) {
  return max_averaging_parameter(space.smooth_exponent(), k, space.d());
}

struct Pseudocontraction {
  Map map;
  double k;
};

// T = (1 - 1/k) I + (1/k) P: a k-strict pseudocontraction in Hilbert space
// (I - T = (I - P)/k and I - P is firmly nonexpansive), with F(T) = F(P).
inline Pseudocontraction synthesize_pseudocontraction(Map P, double k) {
  if (!(k > 0.0 && k < 1.0)) throw ParameterError("pseudocontraction: k must lie in (0,1)");
  return {Map::blend(std::move(P), 1.0 / k), k};
}

// T_a = (1 - a) I + a T.
inline Map average(const Map& T, double a) {
  if (!(a > 0.0)) throw ParameterError("average: a must be > 0");
  return Map::blend(T, a);
}

// T_a for a strict pseudocontraction; a >= max_averaging_parameter is
// accepted but recorded as a warning on the returned map.
inline Map average(const Pseudocontraction& T, double a, const Space& space) {
  Map out = average(T.map, a);
  const double amax = max_averaging_parameter(space, T.k);
  if (a >= amax) {
    std::ostringstream os;
    os << "averaging parameter " << a << " >= max " << amax << " for k=" << T.k
       << "; result not certified nonexpansive";
    out.add_warning(os.str());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Families.

struct Family {
  std::vector<Map> members;
  std::optional<std::vector<double>> relax_weights;
  std::optional<std::vector<double>> combine_weights;
  // Set by relax(): the members are S_i = (1 - g_i) I + g_i T_i, for which
  // the fixed-point sets of all cyclic compositions coincide.
  bool relaxed = false;

  int size() const { return static_cast<int>(members.size()); }

  void validate() const {
    if (members.empty()) throw ConfigurationError("family: at least one member required");
    for (const auto& m : members) {
      if (m.dim() != members.front().dim()) throw ConfigurationError("family: member dimension mismatch");
    }
    if (relax_weights) {
      if (relax_weights->size() != members.size()) throw ConfigurationError("family: relax weight count mismatch");
      for (double g : *relax_weights) {
        if (!(g > 0.0 && g < 1.0)) throw ConfigurationError("family: relax weights must lie in (0,1)");
      }
    }
    if (combine_weights) {
      if (combine_weights->size() != members.size()) {
        throw ConfigurationError("family: combine weight count mismatch");
      }
      double sum = 0.0;
      for (double s : *combine_weights) {
        if (!(s > 0.0 && s <= 1.0)) throw ConfigurationError("family: combine weights must lie in (0,1)");
        sum += s;
      }
      if (std::abs(sum - 1.0) > 1e-12) throw ConfigurationError("family: combine weights must sum to 1");
    }
  }

  void validate_for(const Space& space) const {
    validate();
    for (const auto& m : members) m.validate_for(space);
  }
};

// S_i = (1 - g_i) I + g_i T_i; common fixed points are preserved.
inline Family relax(const Family& family) {
  family.validate();
  if (!family.relax_weights) throw ConfigurationError("relax: relax weights missing");
  Family out;
  out.members.reserve(family.members.size());
  for (std::size_t i = 0; i < family.members.size(); ++i) {
    out.members.push_back(Map::blend(family.members[i], (*family.relax_weights)[i]));
  }
  out.combine_weights = family.combine_weights;
  out.relaxed = true;
  return out;
}

// sum_i s_i T_i; a single member with weight 1 is returned as is.
inline Map convex_combine(const Family& family) {
  family.validate();
  if (!family.combine_weights) throw ConfigurationError("convex_combine: combine weights missing");
  if (family.members.size() == 1) return family.members.front();
  return Map::combination(family.members, *family.combine_weights);
}

// 1-based member index of T_n = T_{n mod r}, with the mod taking values in {1..r}.
inline int cyclic_select(int r, long long n) {
  if (r < 1) throw ParameterError("cyclic_select: family must be nonempty");
  if (n < 1) throw ParameterError("cyclic_select: n must be >= 1");
  return static_cast<int>((n - 1) % r) + 1;
}

inline int cyclic_select(const Family& family, long long n) { return cyclic_select(family.size(), n); }

}  // namespace vifix
