#pragma once

// Step-size feasibility: the lambda bound, omega, the admissible t-interval
// and the anchor sequence alpha_n.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "vifix/errors.hpp"
#include "vifix/operators.hpp"
#include "vifix/space.hpp"

namespace vifix {

// (s eta / (L^s d))^{1/(s-1)}
inline double lambda_max(double s, double eta, double L, double d) {
  if (!(s > 1.0)) throw ParameterError("lambda_max: exponent must be > 1");
  if (!(eta > 0.0)) throw ParameterError("lambda_max: eta must be > 0");
  if (!(L >= eta)) throw ParameterError("lambda_max: require L >= eta");
  if (!(d > 0.0)) throw ParameterError("lambda_max: d must be > 0");
  return std::pow(s * eta / (std::pow(L, s) * d), 1.0 / (s - 1.0));
}

// s eta lambda - d (L lambda)^s; positive exactly when 0 < lambda < lambda_max.
inline double omega(double s, double eta, double lambda, double L, double d) {
  const double w = s * eta * lambda - d * std::pow(L * lambda, s);
  if (!(w > 0.0)) {
    std::ostringstream os;
    os << "omega = " << w << " is not positive for lambda = " << lambda << " (lambda_max = "
       << (eta > 0.0 && L >= eta && d > 0.0 && s > 1.0 ? lambda_max(s, eta, L, d) : 0.0) << ")";
    throw InfeasibleLambda(os.str());
  }
  return w;
}

// Right end of the admissible interval (0, min{1, 1/omega}).
inline double t_interval(double omega_value) {
  if (!(omega_value > 0.0)) throw ParameterError("t_interval: omega must be > 0");
  return std::min(1.0, 1.0 / omega_value);
}

// 1/sqrt(n) for odd n, 1/(sqrt(n) - 1) for even n.
inline double prototype_alpha(long long n) {
  if (n < 1) throw ParameterError("prototype_alpha: n must be >= 1");
  const double r = std::sqrt(static_cast<double>(n));
  return (n % 2 == 1) ? 1.0 / r : 1.0 / (r - 1.0);
}

// Smallest n such that prototype_alpha(m) < cap for every m >= n. Each parity
// branch is decreasing, so it suffices to check n and n + 1.
inline long long prototype_start_index(double cap) {
  if (!(cap > 0.0)) throw ParameterError("prototype_start_index: cap must be > 0");
  long long n = 1;
  while (!(prototype_alpha(n) < cap && prototype_alpha(n + 1) < cap)) ++n;
  return n;
}

struct PrototypeRule {};
struct ClippedPrototypeRule {
  double cap;
};
// c n^{-rho}
struct PowerRule {
  double c;
  double rho;
};
struct ConstantRule {
  double value;
};

using AlphaRule = std::variant<PrototypeRule, ClippedPrototypeRule, PowerRule, ConstantRule>;

inline std::string rule_name(const AlphaRule& rule) {
  return std::visit(
      [](const auto& r) -> std::string {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, PrototypeRule>) return "prototype";
        if constexpr (std::is_same_v<T, ClippedPrototypeRule>) return "clipped_prototype";
        if constexpr (std::is_same_v<T, PowerRule>) return "power";
        if constexpr (std::is_same_v<T, ConstantRule>) return "constant";
      },
      rule);
}

inline double alpha_value(const AlphaRule& rule, long long n) {
  return std::visit(
      [n](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, PrototypeRule>) {
          return prototype_alpha(n);
        } else if constexpr (std::is_same_v<T, ClippedPrototypeRule>) {
          return std::min(prototype_alpha(n), r.cap);
        } else if constexpr (std::is_same_v<T, PowerRule>) {
          return r.c * std::pow(static_cast<double>(n), -r.rho);
        } else {
          return r.value;
        }
      },
      rule);
}

// How the contraction of (I - t lambda A) T is certified.
enum class Certificate {
  // q-uniform smoothness: factor (1 - t omega)^{1/s}, omega = s eta lambda - d (L lambda)^s.
  smoothness,
  // Hilbert space, linear symmetric A with spectrum in [eta, L]: factor
  // 1 - t omega with omega = lambda eta, valid while t lambda (eta + L) <= 2.
  spectral,
};

struct StepSchedule {
  double lambda = 0.0;
  double omega = 0.0;
  double t_max = 0.0;
  // e in the contraction factor (1 - t omega)^{1/e}.
  double contraction_exponent = 2.0;
  AlphaRule rule = PrototypeRule{};
  long long n0 = 1;
  Certificate certificate = Certificate::smoothness;

  double alpha(long long n) const { return alpha_value(rule, n); }

  // Lipschitz factor of x -> t u + (I - t lambda A) T x for t in (0, t_max).
  double contraction_factor(double t) const {
    return std::pow(1.0 - t * omega, 1.0 / contraction_exponent);
  }

  // e ||u - lambda A p|| / omega: radius of the ball around p that the
  // iterates of both schemes never leave once inside.
  double boundedness_radius(double anchor_residual) const {
    return contraction_exponent * anchor_residual / omega;
  }
};

namespace detail {

inline long long default_start_index(const AlphaRule& rule, double t_max) {
  if (std::holds_alternative<PrototypeRule>(rule) || std::holds_alternative<ClippedPrototypeRule>(rule)) {
    return prototype_start_index(0.99 * t_max);
  }
  return 1;
}

inline AlphaRule bind_rule(AlphaRule rule, double t_max) {
  if (auto* c = std::get_if<ClippedPrototypeRule>(&rule)) {
    if (!(c->cap > 0.0)) c->cap = 0.99 * t_max;
  }
  return rule;
}

}  // namespace detail

// Schedule certified by the smoothness inequality. `lambda` defaults to
// 0.9 * lambda_max; a clipped prototype with cap <= 0 gets cap 0.99 t_max;
// `n0` defaults to the first index from which the prototype stays below
// 0.99 t_max (prototype rules) or 1 (others).
inline StepSchedule make_schedule(const Space& space, const AccretiveOperator& A, std::optional<double> lambda,
                                  AlphaRule rule, std::optional<long long> n0 = std::nullopt) {
  const double s = space.smooth_exponent();
  const double d = space.d();
  const double lmax = lambda_max(s, A.eta(), A.L(), d);
  StepSchedule out;
  out.lambda = lambda.value_or(0.9 * lmax);
  if (!(out.lambda > 0.0 && out.lambda < lmax)) {
    std::ostringstream os;
    os << "lambda = " << out.lambda << " outside (0, lambda_max = " << lmax << ")";
    throw InfeasibleLambda(os.str());
  }
  out.omega = omega(s, A.eta(), out.lambda, A.L(), d);
  out.t_max = t_interval(out.omega);
  out.contraction_exponent = s;
  out.rule = detail::bind_rule(std::move(rule), out.t_max);
  out.n0 = n0.value_or(detail::default_start_index(out.rule, out.t_max));
  if (out.n0 < 1) throw ParameterError("schedule: n0 must be >= 1");
  out.certificate = Certificate::smoothness;
  return out;
}

// Schedule certified spectrally (q = 2, A = M linear symmetric with
// spectrum in [eta, L]). Any lambda > 0 is admissible; t_max shrinks to
// min{1, 2 / (lambda (eta + L))}.
inline StepSchedule make_spectral_schedule(const Space& space, const AccretiveOperator& A, double lambda,
                                           AlphaRule rule, std::optional<long long> n0 = std::nullopt) {
  if (!space.is_hilbert()) throw ConfigurationError("spectral certificate requires q = 2");
  if (!A.is_linear_spd()) throw ConfigurationError("spectral certificate requires a linear SPD operator");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InfeasibleLambda("spectral schedule: lambda must be > 0");
  StepSchedule out;
  out.lambda = lambda;
  out.omega = lambda * A.eta();
  out.t_max = std::min(1.0, 2.0 / (lambda * (A.eta() + A.L())));
  out.contraction_exponent = 1.0;
  out.rule = detail::bind_rule(std::move(rule), out.t_max);
  out.n0 = n0.value_or(detail::default_start_index(out.rule, out.t_max));
  if (out.n0 < 1) throw ParameterError("schedule: n0 must be >= 1");
  out.certificate = Certificate::spectral;
  return out;
}

struct ScheduleCheck {
  std::string name;
  bool passed;
  double margin;  // positive when passed
  std::string detail;
};

struct ScheduleReport {
  std::vector<ScheduleCheck> checks;

  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }

  // Failure message of the first violated check, empty when certified.
  std::string first_violation() const {
    for (const auto& c : checks) {
      if (!c.passed) return c.name + " fails";
    }
    return {};
  }
};

// Finite-horizon certificate of the anchor-sequence hypotheses over
// n0 <= n <= N. Divergence of sum alpha_n is a heuristic (partial sum > 10),
// not a proof.
inline ScheduleReport validate_schedule(const StepSchedule& sched, int r, long long horizon) {
  if (horizon < 1000) throw ParameterError("validate_schedule: horizon must be >= 1000");
  if (r < 1) throw ParameterError("validate_schedule: family size must be >= 1");
  if (horizon <= sched.n0) throw ParameterError("validate_schedule: horizon must exceed n0");
  ScheduleReport rep;

  double interval_margin = std::numeric_limits<double>::infinity();
  long long first_bad = -1;
  double sum = 0.0;
  for (long long n = sched.n0; n <= horizon; ++n) {
    const double a = sched.alpha(n);
    const double m = std::min(a, sched.t_max - a);
    if (!(m > 0.0) && first_bad < 0) first_bad = n;
    interval_margin = std::min(interval_margin, m);
    sum += a;
  }
  {
    std::ostringstream os;
    if (first_bad >= 0) {
      os << "first violation at n=" << first_bad << " (alpha=" << sched.alpha(first_bad)
         << ", t_max=" << sched.t_max << ")";
    } else {
      os << "min margin " << interval_margin;
    }
    rep.checks.push_back({"α_n ∈ (0, t_max)", first_bad < 0, interval_margin, os.str()});
  }
  {
    const double aN = sched.alpha(horizon);
    std::ostringstream os;
    os << "alpha_N = " << aN << " at N=" << horizon << " (threshold 0.01)";
    rep.checks.push_back({"α_n → 0", aN < 0.01, 0.01 - aN, os.str()});
  }
  {
    std::ostringstream os;
    os << "partial sum " << sum << " over [" << sched.n0 << ", " << horizon << "] (threshold 10)";
    rep.checks.push_back({"Σα_n divergence heuristic", sum > 10.0, sum - 10.0, os.str()});
  }
  {
    double worst = 0.0;
    for (long long n = std::max(sched.n0, horizon / 2); n <= horizon; ++n) {
      worst = std::max(worst, std::abs(sched.alpha(n) / sched.alpha(n + r) - 1.0));
    }
    std::ostringstream os;
    os << "max |alpha_n/alpha_{n+r} - 1| = " << worst << " for n >= N/2, r=" << r << " (threshold 0.01)";
    rep.checks.push_back({"α_n/α_{n+r} → 1", worst < 0.01, 0.01 - worst, os.str()});
  }
  return rep;
}

}  // namespace vifix
