#pragma once

// Finite-dimensional l_q spaces: norms, generalized duality maps and the
// constants of the q-uniform smoothness inequality
//
//   ||x + y||^s <= ||x||^s + s <y, j_s(x)> + d ||y||^s
//
// where (s, d) = smoothness_constants(q).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>

#include "vifix/errors.hpp"

namespace vifix {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// A functional on l_q, stored by its coefficients. The pairing with a Vec
// is the coordinate dot product.
struct DualVec {
  Eigen::VectorXd coords;

  double operator()(const Vec& x) const { return coords.dot(x); }
};

inline double pairing(const DualVec& f, const Vec& x) { return f.coords.dot(x); }

struct SmoothnessConstants {
  double exponent;  // s
  double d;         // d_s
};

namespace detail {

inline double bq_equation(double q, double b) {
  return (q - 2.0) * std::pow(b, q - 1.0) + (q - 1.0) * std::pow(b, q - 2.0) - 1.0;
}

// Scaled p-norm; avoids overflow/underflow of |x_i|^p.
inline double lp_norm(const Eigen::VectorXd& x, double p) {
  const double m = x.cwiseAbs().maxCoeff();
  if (m == 0.0 || !std::isfinite(m)) return m;
  if (p == 2.0) return m * (x / m).norm();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) acc += std::pow(std::abs(x[i]) / m, p);
  return m * std::pow(acc, 1.0 / p);
}

}  // namespace detail

// Unique root b in (0,1) of (q-2) b^{q-1} + (q-1) b^{q-2} - 1 = 0 for q in (1,2).
//
// The left side decreases from +inf at 0+ to 2q-4 < 0 at 1, so bisection on
// (1e-12, 1 - 1e-12) brackets the root. Iterates until the residual is below
// 1e-12 or the bracket collapses to machine precision.
inline double solve_bq(double q) {
  if (!(q > 1.0 && q < 2.0)) {
    throw ParameterError("solve_bq: q must lie in (1,2), got " + std::to_string(q));
  }
  double lo = 1e-12;
  double hi = 1.0 - 1e-12;
  double flo = detail::bq_equation(q, lo);
  double fhi = detail::bq_equation(q, hi);
  if (!(flo > 0.0 && fhi < 0.0)) {
    std::ostringstream os;
    os << "solve_bq: no sign change on bracket for q=" << q << " (f(lo)=" << flo
       << ", f(hi)=" << fhi << ")";
    throw NumericalError(os.str());
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double fm = detail::bq_equation(q, mid);
    if (std::abs(fm) <= 1e-13 || mid == lo || mid == hi) break;
    if (fm > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double residual = std::abs(detail::bq_equation(q, mid));
  if (residual > 1e-12) {
    std::ostringstream os;
    os << "solve_bq: residual " << residual << " above 1e-12 at b=" << mid << " (q=" << q << ")";
    throw NumericalError(os.str());
  }
  return mid;
}

// (s, d) for l_q: (q, d_q) when 1<q<2, (2, 1) for q=2, (2, q-1) for q>2.
inline SmoothnessConstants smoothness_constants(double q) {
  if (!(q > 1.0) || !std::isfinite(q)) {
    throw ParameterError("smoothness_constants: q must be > 1, got " + std::to_string(q));
  }
  if (q < 2.0) {
    const double b = solve_bq(q);
    return {q, (1.0 + std::pow(b, q - 1.0)) / std::pow(1.0 + b, q - 1.0)};
  }
  if (q == 2.0) return {2.0, 1.0};
  return {2.0, q - 1.0};
}

// R^dim with the l_q norm together with its smoothness data.
class Space {
 public:
  Space(int dim, double q) : dim_(dim), q_(q) {
    if (dim < 1) throw ParameterError("Space: dim must be >= 1, got " + std::to_string(dim));
    const auto sc = smoothness_constants(q);  // validates q
    smooth_exponent_ = sc.exponent;
    d_ = sc.d;
  }

  int dim() const { return dim_; }
  double q() const { return q_; }
  double smooth_exponent() const { return smooth_exponent_; }
  double d() const { return d_; }
  bool is_hilbert() const { return q_ == 2.0; }
  // Conjugate exponent q/(q-1) of the dual space.
  double dual_exponent() const { return q_ / (q_ - 1.0); }

  void check(const Vec& x, const char* what = "vector") const {
    if (x.size() != dim_) {
      std::ostringstream os;
      os << what << " has dimension " << x.size() << ", space has " << dim_;
      throw ContractViolation(os.str());
    }
    if (!x.allFinite()) throw ContractViolation(std::string(what) + " has non-finite entries");
  }

  Vec zero() const { return Vec::Zero(dim_); }

  friend bool operator==(const Space& a, const Space& b) {
    return a.dim_ == b.dim_ && a.q_ == b.q_;
  }

 private:
  int dim_;
  double q_;
  double smooth_exponent_ = 2.0;
  double d_ = 1.0;
};

// (sum |x_i|^q)^{1/q}
inline double norm(const Space& space, const Vec& x) {
  space.check(x);
  return detail::lp_norm(x, space.q());
}

// Norm of a functional in the dual space l_{q/(q-1)}.
inline double dual_norm(const Space& space, const DualVec& f) {
  if (f.coords.size() != space.dim()) throw ContractViolation("dual vector dimension mismatch");
  return detail::lp_norm(f.coords, space.dual_exponent());
}

// Generalized duality map j_s: f_i = ||x||^{s-q} sgn(x_i) |x_i|^{q-1}, so that
// <x, f> = ||x||^s and ||f||_* = ||x||^{s-1}. j_s(0) = 0.
inline DualVec duality_map(const Space& space, const Vec& x, double s) {
  if (!(s > 1.0)) throw ParameterError("duality_map: exponent must be > 1, got " + std::to_string(s));
  space.check(x);
  const double nx = detail::lp_norm(x, space.q());
  DualVec f{Eigen::VectorXd::Zero(space.dim())};
  if (nx == 0.0) return f;
  const double q = space.q();
  const double scale = std::pow(nx, s - 1.0);
  if (q == 2.0) {
    f.coords = (scale / nx) * x;
    return f;
  }
  for (int i = 0; i < space.dim(); ++i) {
    const double r = std::abs(x[i]) / nx;
    const double mag = scale * std::pow(r, q - 1.0);
    f.coords[i] = x[i] < 0.0 ? -mag : (x[i] > 0.0 ? mag : 0.0);
  }
  return f;
}

// j_s with s = space.smooth_exponent(); the map used by every scheme.
inline DualVec duality_map(const Space& space, const Vec& x) {
  return duality_map(space, x, space.smooth_exponent());
}

}  // namespace vifix
