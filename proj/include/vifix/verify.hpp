#pragma once

// Independent oracles and the probe-based certificate for the variational
// inequality
//
//   <u - lambda A x', j(p - x')> <= 0  for all p in F.
//
// F is infinite, so certification evaluates the pairing on a finite set of
// verified fixed points ("probes"), extreme points first where they exist.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "vifix/errors.hpp"
#include "vifix/operators.hpp"
#include "vifix/solvers.hpp"
#include "vifix/space.hpp"

namespace vifix {

// ---------------------------------------------------------------------------
// Certificates.

struct VICertificate {
  Vec point;
  double max_residual = -std::numeric_limits<double>::infinity();
  long long worst_probe = -1;
  std::vector<Vec> probes;
  std::vector<double> residuals;              // one per probe
  std::vector<double> fixed_point_residuals;  // ||x' - T_i x'|| per member

  double max_fixed_point_residual() const {
    double m = 0.0;
    for (double r : fixed_point_residuals) m = std::max(m, r);
    return m;
  }

  bool certified(double tol_vi = 1e-6, double tol_fp = 1e-3) const {
    return max_residual <= tol_vi && max_fixed_point_residual() <= tol_fp;
  }
};

// Max over probes of <u - lambda A x, j_s(p - x)>, s the smooth exponent.
// Every probe must satisfy ||p - T_i p|| <= probe_tol for every map.
inline VICertificate vi_residual(const Space& space, const std::vector<Map>& maps, const AccretiveOperator& A,
                                 double lambda, const Vec& u, const Vec& x, const std::vector<Vec>& probes,
                                 double probe_tol = 1e-10) {
  if (probes.empty()) throw ConfigurationError("vi_residual: empty probe set");
  if (maps.empty()) throw ConfigurationError("vi_residual: no maps");
  for (const auto& T : maps) T.validate_for(space);
  A.validate_for(space);
  space.check(u, "anchor u");
  space.check(x, "candidate");
  const double q = space.q();
  for (std::size_t k = 0; k < probes.size(); ++k) {
    space.check(probes[k], "probe");
    for (std::size_t i = 0; i < maps.size(); ++i) {
      const double r = detail::lp_norm(probes[k] - maps[i](probes[k]), q);
      if (!(r <= probe_tol)) {
        std::ostringstream os;
        os << "vi_residual: probe " << k << " is not a fixed point of member " << (i + 1) << " (residual " << r
           << ")";
        throw ConfigurationError(os.str());
      }
    }
  }
  VICertificate cert;
  cert.point = x;
  cert.probes = probes;
  const Vec g = u - lambda * A(x);
  cert.residuals.reserve(probes.size());
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const double r = pairing(duality_map(space, probes[k] - x), g);
    cert.residuals.push_back(r);
    if (r > cert.max_residual) {
      cert.max_residual = r;
      cert.worst_probe = static_cast<long long>(k);
    }
  }
  for (const auto& T : maps) cert.fixed_point_residuals.push_back(detail::lp_norm(x - T(x), q));
  return cert;
}

inline VICertificate vi_residual(const ProblemInstance& inst, const Vec& x, const std::vector<Vec>& probes,
                                 double probe_tol = 1e-10) {
  return vi_residual(inst.space, inst.family.members, inst.A, inst.sched.lambda, inst.u, x, probes, probe_tol);
}

// ---------------------------------------------------------------------------
// Fixed-point-set model.
//
// A Map's fixed-point set is read off its tree: projections contribute their
// shape, isometries the affine subspace {Qx + b = x}, blends inherit from the
// base, and combinations/compositions are modelled by the intersection of
// their members' sets (exact whenever the members share a fixed point).

struct FixedPointModel {
  int dim = 0;
  std::vector<Shape> shapes;
  // Rows of E x = f collected from isometries.
  Mat E;
  Vec f;

  bool has_affine() const { return E.rows() > 0; }
};

namespace detail {

inline void collect_model(const Map& T, FixedPointModel& m) {
  std::visit(
      [&m](const auto& v) {
        using K = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<K, ProjectionMap>) {
          m.shapes.push_back(v.shape);
        } else if constexpr (std::is_same_v<K, IsometryMap>) {
          const Mat rows = v.Q - Mat::Identity(m.dim, m.dim);
          const Eigen::Index old = m.E.rows();
          m.E.conservativeResize(old + rows.rows(), m.dim);
          m.f.conservativeResize(old + rows.rows());
          m.E.bottomRows(rows.rows()) = rows;
          m.f.tail(rows.rows()) = -v.shift;
        } else if constexpr (std::is_same_v<K, BlendMap>) {
          collect_model(v.base, m);
        } else if constexpr (std::is_same_v<K, CombinationMap> || std::is_same_v<K, CompositionMap>) {
          for (const auto& member : v.members) collect_model(member, m);
        }
      },
      T.node().v);
}

}  // namespace detail

inline FixedPointModel fixed_point_model(const std::vector<Map>& maps) {
  if (maps.empty()) throw ConfigurationError("fixed_point_model: no maps");
  FixedPointModel m;
  m.dim = maps.front().dim();
  m.E.resize(0, m.dim);
  m.f.resize(0);
  for (const auto& T : maps) detail::collect_model(T, m);
  return m;
}

inline FixedPointModel fixed_point_model(const Family& family) { return fixed_point_model(family.members); }

// ---------------------------------------------------------------------------
// Euclidean projection onto an intersection of shapes.

struct ConvexSet {
  std::vector<Shape> pieces;  // intersection; empty means the whole space
};

// The shapes of a family whose fixed-point set has no affine part.
inline ConvexSet convex_set_of(const Family& family) {
  const FixedPointModel m = fixed_point_model(family);
  if (m.has_affine()) throw ConfigurationError("convex_set_of: fixed-point set has an isometry component");
  return ConvexSet{m.shapes};
}

struct ProjectionOptions {
  double tol = 1e-12;
  long long max_sweeps = 2000000;
};

// P_F(u) for F a box, ball, half-space or an intersection of them. A single
// piece is projected in closed form; intersections use Dykstra's algorithm
// until a sweep moves x by at most tol and x violates no piece by more than tol.
inline Vec projection_oracle(const Vec& u, const ConvexSet& F, ProjectionOptions opt = {}) {
  if (!u.allFinite()) throw ContractViolation("projection_oracle: non-finite u");
  for (const auto& s : F.pieces) {
    validate_shape(s);
    if (shape_dim(s) != u.size()) throw ContractViolation("projection_oracle: dimension mismatch");
  }
  if (F.pieces.empty()) return u;
  if (F.pieces.size() == 1) return project(F.pieces.front(), u);
  const std::size_t m = F.pieces.size();
  std::vector<Vec> incr(m, Vec::Zero(u.size()));
  Vec x = u;
  for (long long sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    const Vec start = x;
    for (std::size_t i = 0; i < m; ++i) {
      const Vec y = x + incr[i];
      const Vec p = project(F.pieces[i], y);
      incr[i] = y - p;
      x = p;
    }
    double worst = 0.0;
    for (const auto& s : F.pieces) worst = std::max(worst, violation(s, x));
    if ((x - start).norm() <= opt.tol && worst <= opt.tol) return x;
  }
  std::ostringstream os;
  os << "projection_oracle: Dykstra not converged to " << opt.tol << " within " << opt.max_sweeps << " sweeps";
  throw OracleFailure(os.str());
}

namespace detail {

// Outward normals of the pieces active at x (violation within `active_tol`).
inline std::vector<Vec> active_normals(const Vec& x, const ConvexSet& F, double active_tol) {
  std::vector<Vec> out;
  const auto d = x.size();
  for (const auto& s : F.pieces) {
    if (const auto* b = std::get_if<Box>(&s)) {
      for (Eigen::Index i = 0; i < d; ++i) {
        if (std::isfinite(b->hi[i]) && std::abs(x[i] - b->hi[i]) <= active_tol) out.push_back(Vec::Unit(d, i));
        if (std::isfinite(b->lo[i]) && std::abs(x[i] - b->lo[i]) <= active_tol) out.push_back(-Vec::Unit(d, i));
      }
    } else if (const auto* ball = std::get_if<Ball>(&s)) {
      const Vec off = x - ball->center;
      if (std::abs(off.norm() - ball->radius) <= active_tol) out.push_back(off / off.norm());
    } else {
      const auto& h = std::get<Halfspace>(s);
      if (std::abs(violation(s, x)) <= active_tol) out.push_back(h.normal / h.normal.norm());
    }
  }
  return out;
}

}  // namespace detail

// KKT residual of x as the projection of u onto F: the larger of the
// primal violation and the distance from u - x to the cone spanned by the
// outward normals active at x. Cone distance is found by enumerating
// subsets of active normals (nonnegative least squares by brute force).
inline double kkt_residual(const Vec& u, const Vec& x, const ConvexSet& F, double active_tol = 1e-9) {
  double primal = 0.0;
  for (const auto& s : F.pieces) primal = std::max(primal, violation(s, x));
  const Vec g = u - x;
  const std::vector<Vec> normals = detail::active_normals(x, F, active_tol);
  if (normals.size() > 16) throw OracleFailure("kkt_residual: too many active constraints to enumerate");
  double best = g.norm();
  const std::size_t m = normals.size();
  for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (1u << i)) idx.push_back(i);
    }
    if (static_cast<Eigen::Index>(idx.size()) > x.size()) continue;
    Mat N(x.size(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) N.col(static_cast<Eigen::Index>(c)) = normals[idx[c]];
    const Vec mu = N.colPivHouseholderQr().solve(g);
    if ((mu.array() < -1e-14).any()) continue;
    best = std::min(best, (g - N * mu.cwiseMax(0.0)).norm());
  }
  return std::max(primal, best);
}

struct QuadraticOptions {
  double tol = 1e-10;
  long long max_iter = 5000000;
};

// argmin over F of 0.5 <Mx, x> - <u, x> for symmetric positive definite M, by
// projected gradient with step 1/L, L the largest eigenvalue of M. Stops once
// ||x - P_F(x - (Mx - u))|| <= tol.
inline Vec quadratic_min_oracle(const Mat& M, const Vec& u, const ConvexSet& F, QuadraticOptions opt = {}) {
  if (M.rows() != M.cols() || M.rows() != u.size()) throw ContractViolation("quadratic_min_oracle: shape mismatch");
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff())) {
    throw ConfigurationError("quadratic_min_oracle: M is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  const double lo = es.eigenvalues().minCoeff();
  const double L = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) throw ConfigurationError("quadratic_min_oracle: M is not positive definite");
  Vec x = projection_oracle(u, F);
  for (long long k = 0; k < opt.max_iter; ++k) {
    const Vec grad = M * x - u;
    if ((x - projection_oracle(x - grad, F)).norm() <= opt.tol) return x;
    x = projection_oracle(x - grad / L, F);
  }
  throw OracleFailure("quadratic_min_oracle: projected gradient did not reach the first-order tolerance");
}

// ---------------------------------------------------------------------------
// Probes.

struct ProbeOptions {
  int count = 100;
  std::uint64_t seed = 1;
  // Half-width of the sampling cube around the origin, intersected with any
  // box in the model.
  double radius = 10.0;
  double verify_tol = 1e-10;
  long long max_attempts_per_probe = 10000;
};

namespace detail {

inline bool in_model(const FixedPointModel& m, const Vec& x, double tol) {
  for (const auto& s : m.shapes) {
    if (violation(s, x) > tol) return false;
  }
  return true;
}

inline bool verified(const std::vector<Map>& maps, const Vec& x, double q, double tol) {
  for (const auto& T : maps) {
    if (!(detail::lp_norm(x - T(x), q) <= tol)) return false;
  }
  return true;
}

inline void push_unique(std::vector<Vec>& out, const Vec& x) {
  for (const auto& y : out) {
    if ((y - x).cwiseAbs().maxCoeff() <= 1e-12) return;
  }
  out.push_back(x);
}

// Vertices of {x : a_k . x <= b_k} by solving every dim-subset of the
// constraints as equalities; empty if the enumeration would be too large.
inline std::vector<Vec> polytope_vertices(const std::vector<Vec>& a, const std::vector<double>& b, int dim) {
  std::vector<Vec> out;
  const int m = static_cast<int>(a.size());
  if (m < dim || dim > 8) return out;
  double combos = 1.0;
  for (int i = 0; i < dim; ++i) combos = combos * (m - i) / (i + 1);
  if (combos > 2e5) return out;
  std::vector<int> pick(dim);
  for (int i = 0; i < dim; ++i) pick[i] = i;
  while (true) {
    Mat N(dim, dim);
    Vec rhs(dim);
    for (int r = 0; r < dim; ++r) {
      N.row(r) = a[pick[r]].transpose();
      rhs[r] = b[pick[r]];
    }
    Eigen::FullPivLU<Mat> lu(N);
    if (lu.rank() == dim) {
      const Vec v = lu.solve(rhs);
      bool feasible = v.allFinite();
      for (int k = 0; k < m && feasible; ++k) {
        feasible = a[k].dot(v) - b[k] <= 1e-12 * std::max(1.0, std::abs(b[k]));
      }
      if (feasible) push_unique(out, v);
    }
    int i = dim - 1;
    while (i >= 0 && pick[i] == m - dim + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < dim; ++j) pick[j] = pick[j - 1] + 1;
  }
  return out;
}

}  // namespace detail

// Verified common fixed points of `maps`: the extreme points of the model
// when it is a polytope (box corners included), then rejection samples from
// the sampling cube (or the affine fixed-point subspace) until `count`
// points are available. Every returned point satisfies
// ||p - T_i p|| <= verify_tol for every map.
inline std::vector<Vec> probe_generator(const std::vector<Map>& maps, double q, ProbeOptions opt = {}) {
  if (opt.count < 1) throw ParameterError("probe_generator: count must be >= 1");
  const FixedPointModel model = fixed_point_model(maps);
  const int d = model.dim;
  std::vector<Vec> out;

  // Sampling cube, shrunk to any boxes in the model.
  Vec lo = Vec::Constant(d, -opt.radius);
  Vec hi = Vec::Constant(d, opt.radius);
  std::vector<Vec> rows;
  std::vector<double> rhs;
  bool polyhedral = true;
  for (const auto& s : model.shapes) {
    if (const auto* b = std::get_if<Box>(&s)) {
      lo = lo.cwiseMax(b->lo);
      hi = hi.cwiseMin(b->hi);
      for (int i = 0; i < d; ++i) {
        if (std::isfinite(b->hi[i])) {
          rows.push_back(Vec::Unit(d, i));
          rhs.push_back(b->hi[i]);
        }
        if (std::isfinite(b->lo[i])) {
          rows.push_back(-Vec::Unit(d, i));
          rhs.push_back(-b->lo[i]);
        }
      }
    } else if (const auto* h = std::get_if<Halfspace>(&s)) {
      rows.push_back(h->normal);
      rhs.push_back(h->offset);
    } else {
      const auto& ball = std::get<Ball>(s);
      lo = lo.cwiseMax((ball.center.array() - ball.radius).matrix());
      hi = hi.cwiseMin((ball.center.array() + ball.radius).matrix());
      polyhedral = false;
    }
  }
  if ((lo.array() > hi.array()).any()) throw ConfigurationError("probe_generator: empty sampling region");

  if (polyhedral && !model.has_affine() && !rows.empty()) {
    for (const Vec& v : detail::polytope_vertices(rows, rhs, d)) {
      if (detail::verified(maps, v, q, opt.verify_tol)) detail::push_unique(out, v);
    }
  }

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Affine part: x = x_p + N w.
  Vec xp = Vec::Zero(d);
  Mat N = Mat::Identity(d, d);
  if (model.has_affine()) {
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(model.E);
    xp = cod.solve(model.f);
    if ((model.E * xp - model.f).cwiseAbs().maxCoeff() > 1e-9) {
      throw ConfigurationError("probe_generator: isometry fixed-point equations are inconsistent");
    }
    Eigen::FullPivLU<Mat> lu(model.E);
    N = lu.kernel();
    if (lu.rank() == d) N.resize(d, 0);
    // Centre the search at the point of the subspace nearest the cube centre.
    const Vec centre = 0.5 * (lo + hi);
    if (N.cols() > 0) xp += N * (N.transpose() * N).ldlt().solve(N.transpose() * (centre - xp));
  }

  const long long attempts = static_cast<long long>(opt.count) * opt.max_attempts_per_probe;
  const Vec width = hi - lo;
  for (long long k = 0; k < attempts && static_cast<int>(out.size()) < std::max<int>(opt.count, 1); ++k) {
    Vec x(d);
    if (!model.has_affine()) {
      for (int i = 0; i < d; ++i) x[i] = lo[i] + width[i] * unit(rng);
    } else {
      if (N.cols() == 0) {
        x = xp;
      } else {
        Vec w(N.cols());
        const double span = width.maxCoeff();
        for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = span * (unit(rng) - 0.5);
        x = xp + N * w;
      }
    }
    if (!detail::in_model(model, x, 0.0)) continue;
    if (detail::verified(maps, x, q, opt.verify_tol)) detail::push_unique(out, x);
    if (model.has_affine() && N.cols() == 0) break;
    if (!model.has_affine() && (width.array() == 0.0).all()) break;
  }
  if (out.empty()) {
    throw ConfigurationError("probe_generator: no verified common fixed point found; instance unsuitable for certification");
  }
  return out;
}

inline std::vector<Vec> probe_generator(const Family& family, const Space& space, ProbeOptions opt = {}) {
  family.validate_for(space);
  return probe_generator(family.members, space.q(), opt);
}

}  // namespace vifix
